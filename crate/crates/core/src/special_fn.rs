//! Zonal spherical functions on `S^{d-1}` and the measure they are orthogonal against.
//!
//! The spherical function of degree `n` is the normalized Gegenbauer polynomial
//! `p_n(s) = G_n^ν(s) / G_n^ν(1)` with `ν = (d − 2)/2`. Pulling a zonal function back
//! to the colatitude cosine `s` turns the invariant probability measure into
//! `α_d(ds) = c_d (1 − s²)^{(d−3)/2} ds`.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Geometry of the unit sphere `S^{d-1} ⊂ R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    ambient_dim: usize,
    weight_const: f64,
    volume: f64,
}

impl SphereGeometry {
    pub fn new(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 3 {
            return Err(Error::domain(format!(
                "ambient dimension must be at least 3, got {ambient_dim}"
            )));
        }
        // Step d → d + 2 exactly: Γ(d/2)/Γ((d−1)/2) gains d/(d−1), |S^{d−1}| gains 2π/d.
        let (mut k, mut ratio, mut volume) = if ambient_dim % 2 == 1 {
            (3, PI.sqrt() / 2.0, 4.0 * PI)
        } else {
            (4, 2.0 / PI.sqrt(), 2.0 * PI * PI)
        };
        while k < ambient_dim {
            let kf = k as f64;
            ratio *= kf / (kf - 1.0);
            volume *= 2.0 * PI / kf;
            k += 2;
        }
        let weight_const = ratio / PI.sqrt();
        Ok(Self {
            ambient_dim,
            weight_const,
            volume,
        })
    }

    /// `d`, the dimension of the Euclidean space containing the sphere.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `d − 1`, the dimension of the sphere itself.
    pub fn manifold_dim(&self) -> usize {
        self.ambient_dim - 1
    }

    /// `c_d = Γ(d/2) / (√π Γ((d−1)/2))`.
    pub fn weight_const(&self) -> f64 {
        self.weight_const
    }

    /// Riemannian volume `2π^{d/2} / Γ(d/2)`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Gegenbauer index `(d − 2)/2` of the zonal functions.
    pub fn gegenbauer_index(&self) -> f64 {
        (self.ambient_dim as f64 - 2.0) / 2.0
    }

    /// Exponent `(d − 3)/2` of the colatitude weight.
    pub fn weight_exponent(&self) -> f64 {
        (self.ambient_dim as f64 - 3.0) / 2.0
    }

    /// `(1 − s²)^{(d−3)/2}`, without the constant `c_d`.
    pub fn weight(&self, s: f64) -> f64 {
        let base = (1.0 - s * s).max(0.0);
        powi_half(base, self.ambient_dim as i32 - 3)
    }
}

/// `x^{k/2}` for integer `k ≥ 0`, exact for even `k`.
fn powi_half(x: f64, k: i32) -> f64 {
    if k % 2 == 0 {
        x.powi(k / 2)
    } else {
        x.powi(k / 2) * x.sqrt()
    }
}

fn check_unit_interval(s: f64) -> Result<()> {
    if s.is_nan() || s.abs() > 1.0 {
        return Err(Error::domain(format!("argument {s} outside [-1, 1]")));
    }
    Ok(())
}

/// Gegenbauer polynomial `G_n^ν(s)`, the coefficient of `r^n` in `(1 + r² − 2rs)^{−ν}`.
pub fn gegenbauer(n: usize, nu: f64, s: f64) -> Result<f64> {
    check_unit_interval(s)?;
    if !(nu > 0.0) {
        return Err(Error::domain(format!("Gegenbauer index must be positive, got {nu}")));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * nu * s;
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 * (kf + nu) * s * cur - (kf + 2.0 * nu - 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Recurrence coefficients of the normalized family:
/// `p_{k+1} = A_k s p_k − B_k p_{k−1}` with `A_k − B_k = 1`.
#[inline]
fn recurrence_coeffs(k: usize, d: usize) -> (f64, f64) {
    let kf = k as f64;
    let denom = kf + d as f64 - 2.0;
    ((2.0 * kf + d as f64 - 2.0) / denom, kf / denom)
}

/// Spherical function `p_n^d(s)`.
pub fn spherical_fn(n: usize, geom: &SphereGeometry, s: f64) -> Result<f64> {
    check_unit_interval(s)?;
    if s == 1.0 {
        return Ok(1.0);
    }
    if s == -1.0 {
        return Ok(if n % 2 == 0 { 1.0 } else { -1.0 });
    }
    Ok(*spherical_fn_all(geom, s, n).last().expect("non-empty"))
}

/// `p_0(s), …, p_{n_max}(s)`. The caller guarantees `|s| ≤ 1`.
pub fn spherical_fn_all(geom: &SphereGeometry, s: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(s);
    let d = geom.ambient_dim;
    for k in 1..n_max {
        let (a, b) = recurrence_coeffs(k, d);
        out.push(a * s * out[k] - b * out[k - 1]);
    }
    out
}

/// Values and first derivatives `p_n'(s)` for `n = 0..=n_max`.
pub fn spherical_fn_with_derivative_all(
    geom: &SphereGeometry,
    s: f64,
    n_max: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut val = Vec::with_capacity(n_max + 1);
    let mut der = Vec::with_capacity(n_max + 1);
    val.push(1.0);
    der.push(0.0);
    if n_max > 0 {
        val.push(s);
        der.push(1.0);
    }
    let d = geom.ambient_dim;
    for k in 1..n_max {
        let (a, b) = recurrence_coeffs(k, d);
        val.push(a * s * val[k] - b * val[k - 1]);
        der.push(a * (val[k] + s * der[k]) - b * der[k - 1]);
    }
    (val, der)
}

/// `1 − p_n(1 − x)` for `n = 0..=n_max`, accurate when `x = 1 − s` is tiny.
///
/// Substituting `p = 1 − q` into the three-term recurrence gives
/// `q_{k+1} = A_k (x p_k + q_k) − B_k q_{k−1}`, which avoids the cancellation in `1 − p_n`.
pub fn one_minus_spherical_all(geom: &SphereGeometry, x: f64, n_max: usize) -> Vec<f64> {
    let s = 1.0 - x;
    let mut q = Vec::with_capacity(n_max + 1);
    q.push(0.0);
    if n_max == 0 {
        return q;
    }
    q.push(x);
    let d = geom.ambient_dim;
    let mut p_prev = 1.0;
    let mut p_cur = s;
    for k in 1..n_max {
        let (a, b) = recurrence_coeffs(k, d);
        q.push(a * (x * p_cur + q[k]) - b * q[k - 1]);
        let p_next = a * s * p_cur - b * p_prev;
        p_prev = p_cur;
        p_cur = p_next;
    }
    q
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// Dimension `d_n = C(d+n−1, d−1) − C(d+n−3, d−1)` of the degree-`n` spherical harmonics.
pub fn spherical_dim(n: usize, geom: &SphereGeometry) -> BigUint {
    let d = geom.ambient_dim as u64;
    let n = n as u64;
    binomial(d + n - 1, d - 1) - binomial(d + n - 3, d - 1)
}

/// [`spherical_dim`] converted to floating point once.
pub fn spherical_dim_f64(n: usize, geom: &SphereGeometry) -> f64 {
    spherical_dim(n, geom).to_f64().unwrap_or(f64::INFINITY)
}

/// Casimir eigenvalue `κ_n = n(n + d − 2)`.
pub fn casimir(n: usize, geom: &SphereGeometry) -> f64 {
    let n = n as f64;
    n * (n + geom.ambient_dim as f64 - 2.0)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(order, x);
        if dp != 0.0 {
            deriv = dp;
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[order - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Default quadrature order.
pub const DEFAULT_ORDER: usize = 256;

/// Quadrature rule for integrals `∫_{-1}^{1} F(s) ds` over the colatitude cosine.
///
/// The Gauss–Legendre rule is laid out in the colatitude `φ ∈ [0, π]` and mapped by
/// `s = cos φ`; the Jacobian `sin φ` is part of the weights. The colatitude weight
/// `(1 − s²)^{(d−3)/2}` has a branch point at `s = ±1` for even `d`, whereas
/// `sin^{d−2} φ` is analytic, so this layout converges spectrally for every `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `sin φ_i = √(1 − s_i²)`, kept to avoid cancellation near the poles.
    pub sines: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::domain(format!("quadrature order must be at least 2, got {order}")));
        }
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let mut sines = Vec::with_capacity(order);
        for (xi, wi) in x.iter().zip(&w) {
            let phi = PI / 2.0 * (xi + 1.0);
            let sin = phi.sin();
            nodes.push(phi.cos());
            weights.push(PI / 2.0 * wi * sin);
            sines.push(sin);
        }
        Ok(Self {
            nodes,
            weights,
            sines,
            order,
        })
    }

    /// Weights for `∫ F dα_d`, i.e. with `c_d (1 − s²)^{(d−3)/2}` folded in.
    pub fn alpha_weights(&self, geom: &SphereGeometry) -> Vec<f64> {
        let k = geom.ambient_dim as i32 - 3;
        self.weights
            .iter()
            .zip(&self.sines)
            .map(|(w, sin)| geom.weight_const * w * sin_power(*sin, k))
            .collect()
    }

    /// `∫ F dα_d`.
    pub fn integrate_alpha<F: FnMut(f64) -> f64>(&self, geom: &SphereGeometry, mut f: F) -> f64 {
        self.alpha_weights(geom)
            .iter()
            .zip(&self.nodes)
            .map(|(w, s)| w * f(*s))
            .sum()
    }
}

#[inline]
fn sin_power(sin: f64, k: i32) -> f64 {
    sin.powi(k)
}

/// Gauss–Legendre rule for the measure `α_d` of `geom`.
pub fn quadrature(_geom: &SphereGeometry, order: usize) -> Result<QuadratureRule> {
    QuadratureRule::new(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geom(d: usize) -> SphereGeometry {
        SphereGeometry::new(d).unwrap()
    }

    /// Coefficients of `r^n` in `(1 + r² − 2rs)^{−ν}` from the binomial series
    /// `Σ_k C(−ν, k)(r² − 2rs)^k`, expanded term by term.
    fn generating_function_coeff(n: usize, nu: f64, s: f64) -> f64 {
        // (r² − 2rs)^k = Σ_j C(k, j) r^{2j} (−2rs)^{k−j}, exponent of r is k + j.
        let mut total = 0.0;
        for k in 0..=n {
            let mut gen_binom = 1.0;
            for i in 0..k {
                gen_binom *= (-nu - i as f64) / (i as f64 + 1.0);
            }
            for j in 0..=k {
                if k + j != n {
                    continue;
                }
                let choose = binomial(k as u64, j as u64).to_f64().unwrap();
                total += gen_binom * choose * (-2.0 * s).powi((k - j) as i32);
            }
        }
        total
    }

    #[test]
    fn gegenbauer_low_orders() {
        assert_eq!(gegenbauer(0, 1.7, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(gegenbauer(1, 1.7, 0.3).unwrap(), 2.0 * 1.7 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(gegenbauer(2, 0.5, 0.5).unwrap(), -0.125, epsilon = 1e-15);
    }

    #[test]
    fn gegenbauer_matches_generating_function() {
        for &nu in &[0.5, 1.0, 1.5, 2.5] {
            for &s in &[-0.9, -0.2, 0.0, 0.35, 0.8] {
                for n in 0..8 {
                    let series = generating_function_coeff(n, nu, s);
                    assert_abs_diff_eq!(gegenbauer(n, nu, s).unwrap(), series, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn gegenbauer_domain_errors() {
        assert!(matches!(gegenbauer(2, 0.5, 1.01), Err(Error::Domain(_))));
        assert!(matches!(gegenbauer(2, 0.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(gegenbauer(2, -1.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(spherical_fn(2, &geom(3), -1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn geometry_constants() {
        let g3 = geom(3);
        assert_abs_diff_eq!(g3.weight_const(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g3.volume(), 4.0 * PI, epsilon = 1e-13);
        assert_eq!(g3.manifold_dim(), 2);
        let g4 = geom(4);
        assert_abs_diff_eq!(g4.weight_const(), 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(g4.volume(), 2.0 * PI * PI, epsilon = 1e-13);
        assert!(SphereGeometry::new(2).is_err());
    }

    #[test]
    fn spherical_fn_basic_values() {
        for d in 3..=8 {
            let g = geom(d);
            for &s in &[-0.7, 0.0, 0.4] {
                assert_eq!(spherical_fn(0, &g, s).unwrap(), 1.0);
                assert_abs_diff_eq!(spherical_fn(1, &g, s).unwrap(), s, epsilon = 1e-15);
            }
            for n in 0..30 {
                assert_eq!(spherical_fn(n, &g, 1.0).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn spherical_fn_is_normalized_gegenbauer() {
        for d in [4usize, 5, 7] {
            let g = geom(d);
            let nu = g.gegenbauer_index();
            for n in 0..12 {
                let norm = binomial((n + d - 3) as u64, n as u64).to_f64().unwrap();
                for &s in &[-0.8, 0.1, 0.66] {
                    let expected = gegenbauer(n, nu, s).unwrap() / norm;
                    assert_abs_diff_eq!(spherical_fn(n, &g, s).unwrap(), expected, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_minus_form_agrees_and_stays_accurate() {
        let g = geom(5);
        let s = 0.3;
        let p = spherical_fn_all(&g, s, 40);
        let q = one_minus_spherical_all(&g, 1.0 - s, 40);
        for n in 0..=40 {
            assert_abs_diff_eq!(q[n], 1.0 - p[n], epsilon = 1e-13);
        }
        // Near the pole 1 − p_n(cos θ) ≈ κ_n θ²/(2(d−1)).
        let theta: f64 = 1e-9;
        let x = 2.0 * (theta / 2.0).sin().powi(2);
        let q = one_minus_spherical_all(&g, x, 10);
        for n in 1..=10 {
            let lead = casimir(n, &g) * theta * theta / (2.0 * 4.0);
            assert!((q[n] / lead - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = geom(4);
        let (_, der) = spherical_fn_with_derivative_all(&g, 0.2, 10);
        let h = 1e-6;
        let up = spherical_fn_all(&g, 0.2 + h, 10);
        let dn = spherical_fn_all(&g, 0.2 - h, 10);
        for n in 0..=10 {
            assert_abs_diff_eq!(der[n], (up[n] - dn[n]) / (2.0 * h), epsilon = 1e-7);
        }
    }

    #[test]
    fn dimensions() {
        for d in 3..=9 {
            assert_eq!(spherical_dim(0, &geom(d)), BigUint::from(1u32));
        }
        for n in 0..50 {
            assert_eq!(spherical_dim(n, &geom(3)), BigUint::from(2 * n as u64 + 1));
        }
        assert_eq!(spherical_dim(1, &geom(4)), BigUint::from(4u32));
        // d = 4: (n + 1)²
        for n in 0..20 {
            assert_eq!(spherical_dim(n, &geom(4)), BigUint::from(((n + 1) * (n + 1)) as u64));
        }
        // Large arguments stay exact.
        let big = spherical_dim(100_000, &geom(12));
        assert!(big.to_f64().unwrap() > 1e40);
    }

    #[test]
    fn casimir_values() {
        assert_eq!(casimir(0, &geom(6)), 0.0);
        assert_eq!(casimir(1, &geom(3)), 2.0);
        assert_eq!(casimir(2, &geom(5)), 10.0);
    }

    #[test]
    fn quadrature_normalization_and_symmetry() {
        for d in 3..=8 {
            let g = geom(d);
            let rule = quadrature(&g, DEFAULT_ORDER).unwrap();
            assert_abs_diff_eq!(rule.integrate_alpha(&g, |_| 1.0), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rule.integrate_alpha(&g, |s| s), 0.0, epsilon = 1e-12);
        }
        assert!(QuadratureRule::new(1).is_err());
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        let order = 12;
        let (x, w) = gauss_legendre(order);
        for deg in 0..(2 * order) {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert_abs_diff_eq!(approx, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn mapped_rule_integrates_polynomials() {
        // ∫_{-1}^{1} s^k ds for moderate degrees at the default order.
        let rule = QuadratureRule::new(DEFAULT_ORDER).unwrap();
        for deg in 0..=200 {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let approx: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| w * s.powi(deg))
                .sum();
            assert_abs_diff_eq!(approx, exact, epsilon = 1e-13);
        }
    }
}
