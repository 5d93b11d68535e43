//! Spherical-function series for transition densities and traces.
//!
//! The time-`t` law started at the pole has density
//! `k_t(cos γ) = Σ_n d_n e^{−tχ'_n} p_n(cos γ)` with respect to the normalized
//! invariant measure `σ`. Evaluated at `γ = 0` this is the semigroup trace.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::special_fn::{
    casimir, spherical_dim_f64, spherical_fn_all, spherical_fn_with_derivative_all,
    QuadratureRule, SphereGeometry,
};
use crate::spectrum::{
    adaptive_series, build_table, density_class, effective_exponents, exponents_bounded,
    growth_bound, AdaptiveSum, BernsteinFunction, GrowthBound, LevyModel, SpectrumTable,
};

/// Where to cut the series and how much the discarded tail can weigh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub n_max: usize,
    /// Certified bound on `Σ_{n > n_max} d_n e^{−tχ'_n}`; `None` when the cut is heuristic.
    pub tail_bound: Option<f64>,
}

/// Upper envelope `2(x + 1)^m e^{−λ x^p}` of the series terms, `m = d − 2`.
struct TermEnvelope {
    m: f64,
    lambda: f64,
    p: f64,
}

impl TermEnvelope {
    fn term(&self, n: f64) -> f64 {
        2.0 * (n + 1.0).powf(self.m) * (-self.lambda * n.powf(self.p)).exp()
    }

    /// Smallest integer `x ≥ 1` beyond which the envelope is decreasing.
    fn monotone_from(&self) -> f64 {
        // The envelope decreases where m x^{1−p} / (x + 1) ≤ λ p, and that ratio is
        // itself decreasing once x ≥ (1 − p)/p.
        let start = ((1.0 - self.p) / self.p).max(1.0).ceil();
        let ok = |x: f64| self.m * x.powf(1.0 - self.p) / (x + 1.0) <= self.lambda * self.p;
        if ok(start) {
            return start;
        }
        let mut lo = start;
        let mut hi = start * 2.0;
        while !ok(hi) {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1.0 {
            let mid = (0.5 * (lo + hi)).floor();
            // Past 2^53 neighbouring floats are more than 1 apart.
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `∫_x^∞ 2(y + 1)^m e^{−λ y^p} dy ≤ 2^{m+1} Γ(a) Q(a, λ x^p) / (p λ^a)`, `a = (m+1)/p`, `x ≥ 1`.
    fn integral_from(&self, x: f64) -> f64 {
        let a = (self.m + 1.0) / self.p;
        let q = gamma_ur(a, self.lambda * x.powf(self.p));
        let log_scale =
            (self.m + 1.0) * 2f64.ln() + ln_gamma(a) - self.p.ln() - a * self.lambda.ln();
        q * log_scale.exp()
    }

    /// Certified bound on the sum of envelope terms over `n > cut`.
    fn tail(&self, cut: usize, monotone_from: f64) -> f64 {
        let start = monotone_from.max(cut as f64 + 1.0) as usize;
        let explicit: f64 = ((cut + 1)..start).map(|n| self.term(n as f64)).sum();
        // Σ_{n ≥ start} f(n) ≤ ∫_{start−1}^∞ f when f decreases on [start − 1, ∞).
        let from = (start as f64 - 1.0).max(monotone_from);
        let integral = self.integral_from(from);
        let head = if from > start as f64 - 1.0 {
            self.term(start as f64)
        } else {
            0.0
        };
        explicit + head + integral
    }
}

/// Cut-off `N` for the series at time `t` so the discarded tail is below `eps`.
///
/// With a certified growth bound `χ'_n ≥ λ n^p` the tail is bounded by an integral of the
/// envelope `2(n + 1)^{d−2} e^{−tλ n^p}`; otherwise `N` grows until
/// 50 consecutive terms each fall below `eps` times the running sum.
pub fn truncation_level(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
    eps: f64,
) -> Result<Truncation> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time t = {t} must be positive")));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("tolerance eps = {eps} must be positive")));
    }
    if let Some(GrowthBound { rate, power }) = growth_bound(model, psi) {
        let env = TermEnvelope {
            m: model.geom().ambient_dim() as f64 - 2.0,
            lambda: t * rate,
            p: power,
        };
        let mono = env.monotone_from();
        let too_long = || {
            Error::Numerical(format!(
                "certified truncation at t = {t} needs more than {MAX_CERTIFIED_TERMS} terms"
            ))
        };
        // Past the peak of the envelope every term is large, so the tail cannot be small.
        if mono > MAX_CERTIFIED_TERMS as f64 {
            return Err(too_long());
        }
        // The bound is nonincreasing in the cut: gallop, then bisect.
        let ok = |cut: usize| env.tail(cut, mono) < eps;
        let mut hi = 0usize;
        if !ok(hi) {
            // Invariant: `lo` fails, `hi` passes.
            let mut lo = 0usize;
            hi = 1;
            while !ok(hi) {
                if hi >= MAX_CERTIFIED_TERMS {
                    return Err(too_long());
                }
                lo = hi;
                hi = (2 * hi).min(MAX_CERTIFIED_TERMS);
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        return Ok(Truncation {
            n_max: hi,
            tail_bound: Some(env.tail(hi, mono)),
        });
    }
    if exponents_bounded(model, psi) {
        return Err(Error::Divergence {
            verdict: "NoSquareIntegrableDensity".into(),
        });
    }
    match adaptive_series(model, psi, t, eps)? {
        AdaptiveSum::Settled { n_max, .. } => Ok(Truncation {
            n_max,
            tail_bound: None,
        }),
        AdaptiveSum::Exhausted { .. } => {
            let verdict = density_class(model, psi, t)?;
            if verdict.has_density() {
                Err(Error::Numerical(format!(
                    "series at t = {t} did not settle within the term cap"
                )))
            } else {
                Err(Error::Divergence {
                    verdict: verdict.name().into(),
                })
            }
        }
    }
}

/// Largest cut the certified search will consider.
pub const MAX_CERTIFIED_TERMS: usize = 10_000_000;

/// Default truncation tolerance.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Truncated series `Σ_{n ≤ N} d_n e^{−tχ'_n} p_n` for the time-`t` density.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries {
    pub table: SpectrumTable,
    pub t: f64,
    pub psi: Option<BernsteinFunction>,
    /// `χ'_n`, equal to `χ_n` or `ψ(χ_n)`.
    pub exponents: Vec<f64>,
    /// `d_n e^{−tχ'_n}`.
    pub coeffs: Vec<f64>,
    pub n_max: usize,
    pub tail_bound: Option<f64>,
}

impl KernelSeries {
    pub fn build(
        model: &LevyModel,
        psi: Option<&BernsteinFunction>,
        t: f64,
        eps: f64,
    ) -> Result<Self> {
        let cut = truncation_level(model, psi, t, eps)?;
        Self::with_truncation(model, psi, t, cut)
    }

    /// Series cut at a caller-chosen `N`.
    pub fn with_truncation(
        model: &LevyModel,
        psi: Option<&BernsteinFunction>,
        t: f64,
        cut: Truncation,
    ) -> Result<Self> {
        let table = build_table(model, cut.n_max)?;
        let exponents: Vec<f64> = match psi {
            None => table.entries.iter().map(|e| e.chi).collect(),
            Some(psi) => table.entries.iter().map(|e| psi.eval(e.chi)).collect(),
        };
        let coeffs = table
            .entries
            .iter()
            .zip(&exponents)
            .map(|(e, x)| e.dim * (-t * x).exp())
            .collect();
        Ok(Self {
            table,
            t,
            psi: psi.cloned(),
            exponents,
            coeffs,
            n_max: cut.n_max,
            tail_bound: cut.tail_bound,
        })
    }

    pub fn geom(&self) -> &SphereGeometry {
        self.table.model.geom()
    }

    pub fn model(&self) -> &LevyModel {
        &self.table.model
    }

    /// Tail bound, or zero for a heuristic cut.
    pub fn tail_or_zero(&self) -> f64 {
        self.tail_bound.unwrap_or(0.0)
    }

    /// Density at geodesic angle `γ` from the start point, `cos_gamma = cos γ`,
    /// with respect to the normalized invariant measure.
    pub fn eval(&self, cos_gamma: f64) -> f64 {
        let s = cos_gamma.clamp(-1.0, 1.0);
        let d = self.geom().ambient_dim() as f64;
        let mut sum = KahanSum::default();
        let mut p_prev = 1.0;
        let mut p_cur = s;
        sum.add(self.coeffs[0]);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            sum.add(c * p_cur);
            let kf = k as f64;
            let denom = kf + d - 2.0;
            let next = ((2.0 * kf + d - 2.0) * s * p_cur - kf * p_prev) / denom;
            p_prev = p_cur;
            p_cur = next;
        }
        sum.value()
    }

    /// Density with respect to Riemannian volume.
    pub fn eval_volume_normalized(&self, cos_gamma: f64) -> f64 {
        self.eval(cos_gamma) / self.geom().volume()
    }

    /// Density of the colatitude `Θ` with respect to `dθ`:
    /// `c_d k(cos θ) sin^{d−2} θ`.
    pub fn colatitude_density(&self, theta: f64) -> f64 {
        let geom = self.geom();
        geom.weight_const()
            * self.eval(theta.cos())
            * theta.sin().abs().powi(geom.ambient_dim() as i32 - 2)
    }

    /// `P(Θ ≤ θ)` in closed form.
    ///
    /// The Gegenbauer equation `((1 − s²)^{(d−1)/2} p_n')' = −κ_n (1 − s²)^{(d−3)/2} p_n`
    /// integrates each `n ≥ 1` term exactly; the constant term is a regularized
    /// incomplete beta function.
    pub fn colatitude_cdf(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, PI);
        let geom = self.geom();
        let m = geom.manifold_dim() as f64;
        let s = theta.cos();
        let base = 1.0 - beta_reg(m / 2.0, m / 2.0, ((1.0 + s) / 2.0).clamp(0.0, 1.0));
        let (_, der) = spherical_fn_with_derivative_all(geom, s, self.n_max);
        let sin_pow = theta.sin().powi(geom.ambient_dim() as i32 - 1);
        let mut sum = KahanSum::default();
        sum.add(base);
        for n in 1..=self.n_max {
            sum.add(
                geom.weight_const() * self.coeffs[n] * sin_pow * der[n] / casimir(n, geom),
            );
        }
        sum.value()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kernel_eval(series: &KernelSeries, cos_gamma: f64) -> f64 {
    series.eval(cos_gamma)
}

/// Evaluates the density on many angles in parallel; output order follows the input.
pub fn kernel_eval_many(series: &KernelSeries, cos_gammas: &[f64]) -> Vec<f64> {
    cos_gammas.par_iter().map(|&s| series.eval(s)).collect()
}

/// Trace `Σ d_n e^{−tχ'_n}`, zonal trace `Σ e^{−tχ'_n}` and the diagonal `k_t(o, o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceReport {
    pub t: f64,
    pub trace: f64,
    pub trace_k: f64,
    pub diagonal: f64,
    pub n_max: usize,
    pub tail_bound: Option<f64>,
}

impl TraceReport {
    pub fn from_series(series: &KernelSeries) -> Self {
        let mut trace = KahanSum::default();
        let mut trace_k = KahanSum::default();
        for (c, x) in series.coeffs.iter().zip(&series.exponents) {
            trace.add(*c);
            trace_k.add((-series.t * x).exp());
        }
        Self {
            t: series.t,
            trace: trace.value(),
            trace_k: trace_k.value(),
            diagonal: series.eval(1.0),
            n_max: series.n_max,
            tail_bound: series.tail_bound,
        }
    }
}

pub fn trace(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
    eps: f64,
) -> Result<TraceReport> {
    Ok(TraceReport::from_series(&KernelSeries::build(model, psi, t, eps)?))
}

/// Funk–Hecke eigenvalue `λ_n = c_d ∫ a(s) p_n(s) (1 − s²)^{(d−3)/2} ds` of the zonal kernel `a`.
pub fn funk_hecke<F: Fn(f64) -> f64>(
    kernel: F,
    n: usize,
    geom: &SphereGeometry,
    order: usize,
) -> Result<f64> {
    Ok(funk_hecke_all(kernel, n, geom, order)?[n])
}

/// `λ_0, …, λ_{n_max}` from a single pass over the quadrature nodes.
pub fn funk_hecke_all<F: Fn(f64) -> f64>(
    kernel: F,
    n_max: usize,
    geom: &SphereGeometry,
    order: usize,
) -> Result<Vec<f64>> {
    let rule = QuadratureRule::new(order)?;
    let weights = rule.alpha_weights(geom);
    let mut out = vec![KahanSum::default(); n_max + 1];
    for (s, w) in rule.nodes.iter().zip(&weights) {
        let a = kernel(*s);
        let p = spherical_fn_all(geom, *s, n_max);
        for (acc, pn) in out.iter_mut().zip(&p) {
            acc.add(w * a * pn);
        }
    }
    Ok(out.into_iter().map(|k| k.value()).collect())
}

/// A zonal kernel known only at sample points, interpolated in `s = cos θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    points: Vec<(f64, f64)>,
}

const INTERP_POINTS: usize = 8;

impl TabulatedKernel {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a tabulated kernel needs at least two samples"));
        }
        for (i, (s, v)) in points.iter().enumerate() {
            if !(s.abs() <= 1.0) || !v.is_finite() {
                return Err(Error::domain(format!("sample {i} = ({s}, {v}) is not admissible")));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        if points.len() < 2 {
            return Err(Error::domain("a tabulated kernel needs two distinct abscissae"));
        }
        Ok(Self { points })
    }

    /// Local Lagrange interpolation through the nearest samples.
    pub fn eval(&self, s: f64) -> f64 {
        let pts = &self.points;
        let k = INTERP_POINTS.min(pts.len());
        let idx = pts.partition_point(|p| p.0 < s);
        let start = idx.saturating_sub(k / 2).min(pts.len() - k);
        let window = &pts[start..start + k];
        let mut total = 0.0;
        for (i, (xi, yi)) in window.iter().enumerate() {
            let mut basis = 1.0;
            for (j, (xj, _)) in window.iter().enumerate() {
                if i != j {
                    basis *= (s - xj) / (xi - xj);
                }
            }
            total += basis * yi;
        }
        total
    }
}

/// Which Chapman–Kolmogorov comparison to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkPath {
    /// `Σ d_n |e^{−sχ'_n} e^{−tχ'_n} − e^{−(s+t)χ'_n}|`.
    Spectral,
    /// Two-angle quadrature of `∫ a_s(x·z) a_t(z·y) σ(dz)` on `S²`.
    Direct { order: usize },
}

/// Max residual of `a_{s+t}(x·y) = ∫ a_s(x·z) a_t(z·y) σ(dz)` over the given angles `γ = ∠(x, y)`.
pub fn ck_residual(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    s: f64,
    t: f64,
    angles: &[f64],
    path: CkPath,
) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::domain(format!(
            "Chapman–Kolmogorov needs s, t > 0, got s = {s}, t = {t}"
        )));
    }
    match path {
        CkPath::Spectral => {
            let cut = truncation_level(model, psi, s.min(t), 1e-14)?;
            let geom = model.geom();
            let exps = effective_exponents(model, psi, cut.n_max)?;
            let mut total = KahanSum::default();
            for (n, x) in exps.iter().enumerate() {
                let lhs = (-s * x).exp() * (-t * x).exp();
                let rhs = (-(s + t) * x).exp();
                total.add(spherical_dim_f64(n, geom) * (lhs - rhs).abs());
            }
            Ok(total.value())
        }
        CkPath::Direct { order } => {
            if model.geom().ambient_dim() != 3 {
                return Err(Error::Unsupported(format!(
                    "direct Chapman–Kolmogorov quadrature is implemented for d = 3, got d = {}",
                    model.geom().ambient_dim()
                )));
            }
            let eps = 1e-14;
            let a_s = KernelSeries::build(model, psi, s, eps)?;
            let a_t = KernelSeries::build(model, psi, t, eps)?;
            let a_st = KernelSeries::build(model, psi, s + t, eps)?;
            let rule = QuadratureRule::new(order)?;
            let n_phi = order.max(8);
            let cos_phi: Vec<f64> = (0..n_phi)
                .map(|j| (2.0 * PI * j as f64 / n_phi as f64).cos())
                .collect();
            // σ(dz) = sin θ dθ dφ / 4π; the rule's weights carry sin θ dθ.
            let left: Vec<f64> = rule.nodes.iter().map(|&c| a_s.eval(c)).collect();
            let residuals: Vec<f64> = angles
                .par_iter()
                .map(|&gamma| {
                    let (sg, cg) = gamma.sin_cos();
                    let mut acc = KahanSum::default();
                    for ((ct, w), (st, l)) in rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(rule.sines.iter().zip(&left))
                    {
                        let inner: f64 = cos_phi
                            .iter()
                            .map(|cp| a_t.eval(ct * cg + st * sg * cp))
                            .sum();
                        acc.add(w * l * inner * (2.0 * PI / n_phi as f64));
                    }
                    let lhs = acc.value() / (4.0 * PI);
                    (lhs - a_st.eval(cg)).abs()
                })
                .collect();
            Ok(residuals.into_iter().fold(0.0, f64::max))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{DensityFamily, LevyMeasureSpec};
    use approx::assert_abs_diff_eq;

    fn heat3() -> LevyModel {
        LevyModel::heat(SphereGeometry::new(3).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn envelope_dominates_dimensions() {
        for d in 3..=10 {
            let g = SphereGeometry::new(d).unwrap();
            for n in 0..1000 {
                let dn = spherical_dim_f64(n, &g);
                assert!(dn <= 2.0 * (n as f64 + 1.0).powi(d as i32 - 2));
            }
        }
    }

    #[test]
    fn heat_truncation_is_short_and_certified() {
        let cut = truncation_level(&heat3(), None, 0.5, 1e-12).unwrap();
        assert!(cut.n_max <= 10, "n_max = {}", cut.n_max);
        let bound = cut.tail_bound.unwrap();
        assert!(bound < 1e-12);
        // The bound really dominates the discarded terms.
        let actual: f64 = ((cut.n_max + 1)..200)
            .map(|n| (2 * n + 1) as f64 * (-0.5 * (n * (n + 1)) as f64).exp())
            .sum();
        assert!(actual <= bound);
    }

    #[test]
    fn certified_bound_dominates_actual_tails() {
        let g = SphereGeometry::new(5).unwrap();
        let model = LevyModel::heat(g, 0.7).unwrap();
        let st = BernsteinFunction::stable(0.3).unwrap();
        for (psi, t) in [(None, 0.05), (Some(&st), 0.8), (Some(&st), 3.0)] {
            let cut = truncation_level(&model, psi, t, 1e-8).unwrap();
            let exps = effective_exponents(&model, psi, cut.n_max + 4000).unwrap();
            let actual: f64 = ((cut.n_max + 1)..exps.len())
                .map(|n| spherical_dim_f64(n, &g) * (-t * exps[n]).exp())
                .sum();
            assert!(actual <= cut.tail_bound.unwrap(), "{actual} > {:?}", cut.tail_bound);
        }
    }

    #[test]
    fn large_time_needs_only_constant() {
        let cut = truncation_level(&heat3(), None, 30.0, 1e-6).unwrap();
        assert_eq!(cut.n_max, 0);
    }

    #[test]
    fn compound_poisson_diverges() {
        let g = SphereGeometry::new(3).unwrap();
        let cp = LevyModel::new(g, 0.0, LevyMeasureSpec::atoms([(PI / 2.0, 1.0)])).unwrap();
        assert!(matches!(
            truncation_level(&cp, None, 0.5, 1e-10),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn power_family_truncation_is_heuristic() {
        let g = SphereGeometry::new(3).unwrap();
        let nu = LevyMeasureSpec::zero().with_family(DensityFamily::Power { c: 1.0, beta: 1.5 });
        let m = LevyModel::new(g, 0.0, nu).unwrap();
        let cut = truncation_level(&m, None, 1.0, 1e-12).unwrap();
        assert!(cut.tail_bound.is_none());
        assert!(cut.n_max > 5);
    }

    #[test]
    fn heat_diagonal_partial_sum() {
        let series = KernelSeries::build(&heat3(), None, 0.5, 1e-12).unwrap();
        let oracle = 1.0
            + 3.0 * (-1.0f64).exp()
            + 5.0 * (-3.0f64).exp()
            + 7.0 * (-6.0f64).exp()
            + 9.0 * (-10.0f64).exp()
            + 11.0 * (-15.0f64).exp();
        assert_abs_diff_eq!(series.eval(1.0), oracle, epsilon = 1e-5);
        assert_abs_diff_eq!(series.eval(1.0), 2.370337, epsilon = 1e-5);
        assert_eq!(series.coeffs[0], 1.0);
    }

    #[test]
    fn kahan_sum_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..10 {
            k.add(1e-17);
        }
        assert_abs_diff_eq!(k.value(), 1.0 + 1e-16, epsilon = 1e-18);
    }

    #[test]
    fn tabulated_kernel_reproduces_polynomials() {
        let pts: Vec<(f64, f64)> = (0..=50)
            .map(|i| {
                let s = (PI * i as f64 / 50.0).cos();
                (s, 3.0 * s * s - 1.0)
            })
            .collect();
        let k = TabulatedKernel::new(pts).unwrap();
        for s in [-1.0, -0.33, 0.0, 0.71, 1.0] {
            assert_abs_diff_eq!(k.eval(s), 3.0 * s * s - 1.0, epsilon = 1e-12);
        }
        assert!(TabulatedKernel::new(vec![(0.0, 1.0)]).is_err());
        assert!(TabulatedKernel::new(vec![(0.0, 1.0), (1.5, 1.0)]).is_err());
    }

    #[test]
    fn ck_rejects_zero_time_and_other_dimensions() {
        let m = heat3();
        assert!(ck_residual(&m, None, 0.0, 0.5, &[0.3], CkPath::Spectral).is_err());
        let m4 = LevyModel::heat(SphereGeometry::new(4).unwrap(), 1.0).unwrap();
        assert!(matches!(
            ck_residual(&m4, None, 0.2, 0.2, &[0.3], CkPath::Direct { order: 64 }),
            Err(Error::Unsupported(_))
        ));
        let r = ck_residual(&m4, None, 0.2, 0.3, &[], CkPath::Spectral).unwrap();
        assert!(r < 1e-12);
    }
}
