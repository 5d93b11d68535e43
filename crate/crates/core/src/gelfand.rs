//! Exact Fourier analysis on the finite Gelfand pairs `(D_m, {e, s})`.
//!
//! Matrix entries are stored in the usual row/column order, `A[(i, j)] = ⟨A e_j, e_i⟩`.
//! The clause statements about `μ̂(π)_{ij}` and `π_{ij}` use `⟨A e_i, e_j⟩`, i.e. the
//! transposed index order; the checks below translate accordingly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::RngStream;

pub type Mat = DMatrix<f64>;

/// Entries below this magnitude count as zero.
pub const ZERO_TOL: f64 = 1e-13;
/// Tolerance for identities between computed quantities.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    /// `π(g)` for every group element, indexed like the group.
    pub matrices: Vec<Mat>,
    /// `E_π^K = |K|^{-1} Σ_{k∈K} π(k)`.
    pub projection: Mat,
    pub spherical: bool,
}

impl Irrep {
    /// `φ_π(g) = ⟨e_1, π(g)e_1⟩`.
    pub fn spherical_fn(&self, g: usize) -> f64 {
        self.matrices[g][(0, 0)]
    }
}

/// `D_m = ⟨r, s | r^m = s² = e, srs = r^{-1}⟩` with `K = {e, s}`.
///
/// Element `r^k s^f` has index `k + m f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGelfandPair {
    pub m: usize,
    pub order: usize,
    pub mul: Vec<Vec<usize>>,
    pub inv: Vec<usize>,
    pub k: Vec<usize>,
    pub irreps: Vec<Irrep>,
}

fn rotation(angle: f64) -> Mat {
    let (s, c) = angle.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Orthogonal change of basis whose first column spans the image of the rank-one projection `e`.
fn fixed_vector_basis(e: &Mat) -> Mat {
    let n = e.nrows();
    let best = (0..n)
        .max_by(|&a, &b| e.column(a).norm().total_cmp(&e.column(b).norm()))
        .unwrap_or(0);
    let mut cols: Vec<DVector<f64>> = vec![e.column(best).normalize()];
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        for c in &cols {
            v -= c * c.dot(&v);
        }
        if v.norm() > 1e-8 {
            cols.push(v.normalize());
        }
    }
    Mat::from_columns(&cols)
}

impl FiniteGelfandPair {
    pub fn element(&self, k: usize, f: usize) -> usize {
        (k % self.m) + self.m * (f % 2)
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn label(&self, g: usize) -> String {
        let (k, f) = (g % self.m, g / self.m);
        match (k, f) {
            (0, 0) => "e".into(),
            (0, 1) => "s".into(),
            (k, 0) => format!("r^{k}"),
            (k, _) => format!("r^{k}s"),
        }
    }

    /// `K g K`, sorted.
    pub fn double_coset(&self, g: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .k
            .iter()
            .flat_map(|&a| self.k.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.mul[self.mul[a][g]][b])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn double_cosets(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.order];
        let mut out = Vec::new();
        for g in 0..self.order {
            if !seen[g] {
                let dc = self.double_coset(g);
                dc.iter().for_each(|&h| seen[h] = true);
                out.push(dc);
            }
        }
        out
    }

    pub fn spherical_irreps(&self) -> impl Iterator<Item = (usize, &Irrep)> {
        self.irreps.iter().enumerate().filter(|(_, p)| p.spherical)
    }
}

/// Builds `D_m` with its real orthogonal irreps, each in a basis whose first vector is K-fixed
/// when one exists.
pub fn build_dihedral_pair(m: usize) -> Result<FiniteGelfandPair> {
    if m < 3 {
        return Err(Error::domain(format!("dihedral order m = {m} must be at least 3")));
    }
    let order = 2 * m;
    let split = |g: usize| (g % m, g / m);
    let mul: Vec<Vec<usize>> = (0..order)
        .map(|a| {
            (0..order)
                .map(|b| {
                    let ((ka, fa), (kb, fb)) = (split(a), split(b));
                    let k = if fa == 0 { ka + kb } else { ka + m - kb };
                    k % m + m * ((fa + fb) % 2)
                })
                .collect()
        })
        .collect();
    let inv: Vec<usize> = (0..order)
        .map(|a| (0..order).find(|&b| mul[a][b] == 0).expect("group element without inverse"))
        .collect();
    let k = vec![0, m];

    let character = |label: &str, f: &dyn Fn(usize, usize) -> f64| {
        (label.to_string(), 1, (0..order).map(|g| {
            let (kk, ff) = split(g);
            Mat::from_element(1, 1, f(kk, ff))
        }).collect::<Vec<_>>())
    };
    let sign = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let mut raw = vec![
        character("trivial", &|_, _| 1.0),
        character("sign", &|_, f| sign(f)),
    ];
    if m % 2 == 0 {
        raw.push(character("alt_r", &|k, _| sign(k)));
        raw.push(character("alt_rs", &|k, f| sign(k + f)));
    }
    let reflection = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    for h in 1..=(m - 1) / 2 {
        let mats = (0..order)
            .map(|g| {
                let (kk, ff) = split(g);
                let r = rotation(2.0 * std::f64::consts::PI * (h * kk) as f64 / m as f64);
                if ff == 0 {
                    r
                } else {
                    r * &reflection
                }
            })
            .collect();
        raw.push((format!("rho_{h}"), 2, mats));
    }

    let irreps = raw
        .into_iter()
        .map(|(label, dim, mats)| {
            let e = k.iter().fold(Mat::zeros(dim, dim), |acc, &kk| acc + &mats[kk]) / k.len() as f64;
            let rank = e.trace().round() as usize;
            let (matrices, projection) = if rank == 1 {
                let q = fixed_vector_basis(&e);
                let conj = |a: &Mat| q.transpose() * a * &q;
                (mats.iter().map(conj).collect(), conj(&e))
            } else {
                (mats, e)
            };
            Irrep {
                label,
                dim,
                matrices,
                projection,
                spherical: rank == 1,
            }
        })
        .collect();
    Ok(FiniteGelfandPair {
        m,
        order,
        mul,
        inv,
        k,
        irreps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Invariance {
    None,
    Left,
    Right,
    Bi,
}

/// A finite measure given by its point masses `μ({g})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    pub weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn point_mass(pair: &FiniteGelfandPair, g: usize) -> Self {
        let mut weights = vec![0.0; pair.order];
        weights[g] = 1.0;
        Self { weights }
    }

    /// Normalized counting measure on `G`.
    pub fn haar(pair: &FiniteGelfandPair) -> Self {
        Self {
            weights: vec![1.0 / pair.order as f64; pair.order],
        }
    }

    /// Uniform probability on a subset.
    pub fn uniform_on(pair: &FiniteGelfandPair, set: &[usize]) -> Self {
        let mut weights = vec![0.0; pair.order];
        for &g in set {
            weights[g] = 1.0 / set.len() as f64;
        }
        Self { weights }
    }

    /// Haar measure `m_K` on the subgroup.
    pub fn haar_k(pair: &FiniteGelfandPair) -> Self {
        Self::uniform_on(pair, &pair.k)
    }

    /// I.i.d. uniform weights, averaged to the requested invariance, normalized to mass 1.
    pub fn random<R: Rng + ?Sized>(pair: &FiniteGelfandPair, kind: Invariance, rng: &mut R) -> Self {
        let raw = Self {
            weights: (0..pair.order).map(|_| rng.random::<f64>()).collect(),
        };
        raw.project(pair, kind).normalized()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalized(&self) -> Self {
        let m = self.mass();
        Self {
            weights: self.weights.iter().map(|w| w / m).collect(),
        }
    }

    /// Averages over left, right or two-sided translation by `K`.
    pub fn project(&self, pair: &FiniteGelfandPair, kind: Invariance) -> Self {
        let nk = pair.k.len() as f64;
        let left = |w: &[f64]| -> Vec<f64> {
            (0..pair.order)
                .map(|g| pair.k.iter().map(|&k| w[pair.mul[k][g]]).sum::<f64>() / nk)
                .collect()
        };
        let right = |w: &[f64]| -> Vec<f64> {
            (0..pair.order)
                .map(|g| pair.k.iter().map(|&k| w[pair.mul[g][k]]).sum::<f64>() / nk)
                .collect()
        };
        let weights = match kind {
            Invariance::None => self.weights.clone(),
            Invariance::Left => left(&self.weights),
            Invariance::Right => right(&self.weights),
            Invariance::Bi => right(&left(&self.weights)),
        };
        Self { weights }
    }

    fn max_gap(&self, pair: &FiniteGelfandPair, kind: Invariance) -> f64 {
        let p = self.project(pair, kind);
        self.weights
            .iter()
            .zip(&p.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_invariant(&self, pair: &FiniteGelfandPair, kind: Invariance) -> bool {
        self.max_gap(pair, kind) <= ZERO_TOL
    }

    /// `μ({hgh⁻¹}) = μ({g})` for all `g, h`.
    pub fn is_central(&self, pair: &FiniteGelfandPair) -> bool {
        (0..pair.order).all(|g| {
            (0..pair.order).all(|h| {
                let c = pair.mul[pair.mul[h][g]][pair.inv[h]];
                (self.weights[c] - self.weights[g]).abs() <= ZERO_TOL
            })
        })
    }

    /// `(μ * ν)({g}) = Σ_{ab = g} μ({a}) ν({b})`.
    pub fn convolve(&self, pair: &FiniteGelfandPair, other: &FiniteMeasure) -> FiniteMeasure {
        let mut weights = vec![0.0; pair.order];
        for (a, wa) in self.weights.iter().enumerate() {
            if *wa == 0.0 {
                continue;
            }
            for (b, wb) in other.weights.iter().enumerate() {
                weights[pair.mul[a][b]] += wa * wb;
            }
        }
        FiniteMeasure { weights }
    }

    /// Density with respect to normalized counting measure, `|G| μ({g})`.
    pub fn density(&self) -> Vec<f64> {
        let n = self.weights.len() as f64;
        self.weights.iter().map(|w| n * w).collect()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `μ̂(π) = Σ_g π(g⁻¹) μ({g})`.
pub fn fourier_transform(pair: &FiniteGelfandPair, mu: &FiniteMeasure, pi: &Irrep) -> Mat {
    mu.weights
        .iter()
        .enumerate()
        .fold(Mat::zeros(pi.dim, pi.dim), |acc, (g, w)| {
            acc + &pi.matrices[pair.inv[g]] * *w
        })
}

/// `μ̂(φ_π) = Σ_g φ_π(g) μ({g})`.
pub fn spherical_transform(mu: &FiniteMeasure, pi: &Irrep) -> f64 {
    mu.weights
        .iter()
        .enumerate()
        .map(|(g, w)| pi.spherical_fn(g) * w)
        .sum()
}

/// A failing `(clause, irrep, entry)`; the entry is in the transposed `⟨A e_i, e_j⟩` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub clause: String,
    pub irrep: String,
    pub entry: (usize, usize),
    pub value: f64,
}

/// The three equivalent conditions of one invariance type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseVerdict {
    pub invariance: Invariance,
    /// (a) the measure is invariant.
    pub invariant: bool,
    /// (b) the projection identity on `μ̂`.
    pub projection_identity: bool,
    /// (c) the zero pattern of `μ̂`.
    pub zero_pattern: bool,
    pub violation: Option<Violation>,
}

impl ClauseVerdict {
    pub fn holds(&self) -> bool {
        self.invariant && self.projection_identity && self.zero_pattern
    }

    pub fn consistent(&self) -> bool {
        self.invariant == self.projection_identity && self.projection_identity == self.zero_pattern
    }
}

fn clause_verdict(pair: &FiniteGelfandPair, mu: &FiniteMeasure, kind: Invariance) -> ClauseVerdict {
    let tag = match kind {
        Invariance::Left => "left",
        Invariance::Right => "right",
        Invariance::Bi => "bi",
        Invariance::None => "none",
    };
    let mut projection_identity = true;
    let mut zero_pattern = true;
    let mut violation = None;
    for pi in &pair.irreps {
        let hat = fourier_transform(pair, mu, pi);
        let e = &pi.projection;
        let target = if pi.spherical {
            hat.clone()
        } else {
            Mat::zeros(pi.dim, pi.dim)
        };
        let lhs = match kind {
            Invariance::Left => &hat * e,
            Invariance::Right => e * &hat,
            Invariance::Bi => e * &hat * e,
            Invariance::None => hat.clone(),
        };
        if max_abs(&(lhs - target)) > ZERO_TOL {
            projection_identity = false;
            violation.get_or_insert_with(|| Violation {
                clause: format!("{tag}.b"),
                irrep: pi.label.clone(),
                entry: (0, 0),
                value: f64::NAN,
            });
        }
        for r in 0..pi.dim {
            for c in 0..pi.dim {
                // Paper order: (i, j) = (c, r).
                let (i, j) = (c, r);
                let must_vanish = !pi.spherical
                    || match kind {
                        Invariance::Left => i != 0,
                        Invariance::Right => j != 0,
                        Invariance::Bi => i != 0 || j != 0,
                        Invariance::None => false,
                    };
                if must_vanish && hat[(r, c)].abs() > ZERO_TOL {
                    zero_pattern = false;
                    let v = Violation {
                        clause: format!("{tag}.c"),
                        irrep: pi.label.clone(),
                        entry: (i + 1, j + 1),
                        value: hat[(r, c)],
                    };
                    if violation.as_ref().is_none_or(|old| old.clause.ends_with(".b")) {
                        violation = Some(v);
                    }
                }
            }
        }
    }
    let invariant = mu.is_invariant(pair, kind);
    if !invariant && violation.is_none() {
        violation = Some(Violation {
            clause: format!("{tag}.a"),
            irrep: String::new(),
            entry: (0, 0),
            value: mu.max_gap(pair, kind),
        });
    }
    ClauseVerdict {
        invariance: kind,
        invariant,
        projection_identity,
        zero_pattern,
        violation,
    }
}

/// Left, right and bi-invariance clauses evaluated on one measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ft1Verdict {
    pub left: ClauseVerdict,
    pub right: ClauseVerdict,
    pub bi: ClauseVerdict,
}

impl Ft1Verdict {
    pub fn consistent(&self) -> bool {
        self.left.consistent() && self.right.consistent() && self.bi.consistent()
    }

    pub fn get(&self, kind: Invariance) -> Option<&ClauseVerdict> {
        match kind {
            Invariance::Left => Some(&self.left),
            Invariance::Right => Some(&self.right),
            Invariance::Bi => Some(&self.bi),
            Invariance::None => None,
        }
    }
}

pub fn check_ft1(pair: &FiniteGelfandPair, mu: &FiniteMeasure) -> Ft1Verdict {
    Ft1Verdict {
        left: clause_verdict(pair, mu, Invariance::Left),
        right: clause_verdict(pair, mu, Invariance::Right),
        bi: clause_verdict(pair, mu, Invariance::Bi),
    }
}

/// Inverse transform `f = Σ_π d_π tr(A_π π)`, as a measure `f/|G|`.
pub fn measure_from_transforms(pair: &FiniteGelfandPair, transforms: &[Mat]) -> FiniteMeasure {
    let n = pair.order as f64;
    let weights = (0..pair.order)
        .map(|g| {
            pair.irreps
                .iter()
                .zip(transforms)
                .map(|(pi, a)| pi.dim as f64 * (a * &pi.matrices[g]).trace())
                .sum::<f64>()
                / n
        })
        .collect();
    FiniteMeasure { weights }
}

/// Random transforms with the zero pattern of `kind`, inverted and shifted by a multiple of
/// Haar measure (which only moves the trivial coefficient) until nonnegative.
pub fn measure_with_pattern<R: Rng + ?Sized>(
    pair: &FiniteGelfandPair,
    kind: Invariance,
    rng: &mut R,
) -> FiniteMeasure {
    let transforms: Vec<Mat> = pair
        .irreps
        .iter()
        .map(|pi| {
            Mat::from_fn(pi.dim, pi.dim, |r, c| {
                let (i, j) = (c, r);
                let allowed = pi.spherical
                    && match kind {
                        Invariance::Left => i == 0,
                        Invariance::Right => j == 0,
                        Invariance::Bi => i == 0 && j == 0,
                        Invariance::None => true,
                    };
                if allowed || kind == Invariance::None {
                    rng.random::<f64>() * 2.0 - 1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mut mu = measure_from_transforms(pair, &transforms);
    let lowest = mu.weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if lowest < 0.0 {
        let shift = -lowest + 1.0 / pair.order as f64;
        mu.weights.iter_mut().for_each(|w| *w += shift);
    }
    mu.normalized()
}

/// `max_g |Σ_π d_π tr(μ̂(π)π(g)) − |G|μ({g})|`.
pub fn dens1_residual(pair: &FiniteGelfandPair, mu: &FiniteMeasure) -> f64 {
    let hats: Vec<Mat> = pair.irreps.iter().map(|pi| fourier_transform(pair, mu, pi)).collect();
    let expansion: Vec<f64> = (0..pair.order)
        .map(|g| {
            pair.irreps
                .iter()
                .zip(&hats)
                .map(|(pi, h)| pi.dim as f64 * (h * &pi.matrices[g]).trace())
                .sum()
        })
        .collect();
    max_abs_diff(&expansion, &mu.density())
}

/// `max_g |Σ_{π∈Ĝ_s} d_π μ̂(φ_π) φ_π(g) − |G|μ({g})|` for a bi-invariant measure.
pub fn dens2_residual(pair: &FiniteGelfandPair, mu: &FiniteMeasure) -> Result<f64> {
    if !mu.is_invariant(pair, Invariance::Bi) {
        return Err(Error::domain("the spherical expansion needs a K-bi-invariant measure"));
    }
    let expansion: Vec<f64> = (0..pair.order)
        .map(|g| {
            pair.spherical_irreps()
                .map(|(_, pi)| pi.dim as f64 * spherical_transform(mu, pi) * pi.spherical_fn(g))
                .sum()
        })
        .collect();
    Ok(max_abs_diff(&expansion, &mu.density()))
}

/// `|Σ_g f_μ(g)²/|G| − Σ_π d_π ‖μ̂(π)‖²_HS|`, and for bi-invariant measures also the gap to
/// `Σ_{π∈Ĝ_s} d_π μ̂(φ_π)²`.
pub fn parseval_residual(pair: &FiniteGelfandPair, mu: &FiniteMeasure) -> (f64, Option<f64>) {
    let lhs = mu.density().iter().map(|f| f * f).sum::<f64>() / pair.order as f64;
    let rhs: f64 = pair
        .irreps
        .iter()
        .map(|pi| pi.dim as f64 * fourier_transform(pair, mu, pi).norm_squared())
        .sum();
    let spherical = mu.is_invariant(pair, Invariance::Bi).then(|| {
        let s: f64 = pair
            .spherical_irreps()
            .map(|(_, pi)| pi.dim as f64 * spherical_transform(mu, pi).powi(2))
            .sum();
        (lhs - s).abs() / lhs.max(1.0)
    });
    ((lhs - rhs).abs() / lhs.max(1.0), spherical)
}

/// `max_{g,h} |⟨v, |K|⁻¹Σ_k π(gkh) v⟩ − ⟨v, π(g)v⟩⟨v, π(h)v⟩|`; `v = e_1` when `None`.
pub fn spherical_eq_residual(pair: &FiniteGelfandPair, pi: &Irrep, v: Option<&[f64]>) -> f64 {
    let v = match v {
        Some(v) => DVector::from_column_slice(v).normalize(),
        None => DVector::from_fn(pi.dim, |r, _| if r == 0 { 1.0 } else { 0.0 }),
    };
    let phi = |g: usize| v.dot(&(&pi.matrices[g] * &v));
    let mut worst: f64 = 0.0;
    for g in 0..pair.order {
        for h in 0..pair.order {
            let avg = pair
                .k
                .iter()
                .map(|&k| phi(pair.mul[pair.mul[g][k]][h]))
                .sum::<f64>()
                / pair.k.len() as f64;
            worst = worst.max((avg - phi(g) * phi(h)).abs());
        }
    }
    worst
}

/// Gram-matrix check of one orthonormal family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramReport {
    pub family: String,
    pub count: usize,
    pub expected_dim: usize,
    pub gram_error: f64,
    pub invariance_error: f64,
}

impl GramReport {
    pub fn pass(&self) -> bool {
        self.count == self.expected_dim
            && self.gram_error <= IDENTITY_TOL
            && self.invariance_error <= IDENTITY_TOL
    }
}

/// The three matrix-entry families: `√d_π⟨π(·)e_i, e_1⟩`, `√d_π⟨π(·)e_1, e_j⟩` and
/// `√d_π⟨π(·)e_1, e_1⟩` over spherical `π`, checked for orthonormality in `L²(G, m_G)`,
/// membership in the left-, right- and bi-invariant subspaces, and count against the
/// subspace dimensions `|G|/|K|`, `|G|/|K|` and the number of double cosets.
pub fn peter_weyl_check(pair: &FiniteGelfandPair) -> Vec<GramReport> {
    let n = pair.order;
    let families: [(&str, Invariance, usize); 3] = [
        ("left", Invariance::Left, n / pair.k.len()),
        ("right", Invariance::Right, n / pair.k.len()),
        ("bi", Invariance::Bi, pair.double_cosets().len()),
    ];
    families
        .iter()
        .map(|&(name, kind, expected_dim)| {
            let mut funcs: Vec<Vec<f64>> = Vec::new();
            for (_, pi) in pair.spherical_irreps() {
                let scale = (pi.dim as f64).sqrt();
                let entries: Vec<(usize, usize)> = match kind {
                    // ⟨π(g)e_i, e_1⟩ is row 1, column i.
                    Invariance::Left => (0..pi.dim).map(|i| (0, i)).collect(),
                    Invariance::Right => (0..pi.dim).map(|j| (j, 0)).collect(),
                    _ => vec![(0, 0)],
                };
                for (r, c) in entries {
                    funcs.push((0..n).map(|g| scale * pi.matrices[g][(r, c)]).collect());
                }
            }
            let mut gram_error: f64 = 0.0;
            for (a, fa) in funcs.iter().enumerate() {
                for (b, fb) in funcs.iter().enumerate() {
                    let ip = fa.iter().zip(fb).map(|(x, y)| x * y).sum::<f64>() / n as f64;
                    let delta = if a == b { 1.0 } else { 0.0 };
                    gram_error = gram_error.max((ip - delta).abs());
                }
            }
            let invariance_error = funcs
                .iter()
                .map(|f| {
                    let as_measure = FiniteMeasure { weights: f.clone() };
                    max_abs_diff(f, &as_measure.project(pair, kind).weights)
                })
                .fold(0.0, f64::max);
            GramReport {
                family: name.into(),
                count: funcs.len(),
                expected_dim,
                gram_error,
                invariance_error,
            }
        })
        .collect()
}

/// The compound-Poisson semigroup `μ_t = e^{−ct} Σ_k (ct)^k/k! ρ^{*k} * m_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundPoissonSemigroup {
    pub rho: FiniteMeasure,
    pub rate: f64,
}

impl CompoundPoissonSemigroup {
    pub fn new(pair: &FiniteGelfandPair, rho: FiniteMeasure, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::domain(format!("jump rate c = {rate} must be positive")));
        }
        if !rho.is_invariant(pair, Invariance::Bi) || (rho.mass() - 1.0).abs() > ZERO_TOL {
            return Err(Error::domain("ρ must be a K-bi-invariant probability measure"));
        }
        Ok(Self { rho, rate })
    }

    pub fn at(&self, pair: &FiniteGelfandPair, t: f64) -> FiniteMeasure {
        let lambda = self.rate * t;
        let mut power = FiniteMeasure::point_mass(pair, pair.identity());
        let mut weight = (-lambda).exp();
        let mut acc = vec![0.0; pair.order];
        let mut k = 0usize;
        loop {
            for (a, p) in acc.iter_mut().zip(&power.weights) {
                *a += weight * p;
            }
            k += 1;
            weight *= lambda / k as f64;
            if k as f64 > lambda && weight < 1e-20 {
                break;
            }
            power = power.convolve(pair, &self.rho);
        }
        FiniteMeasure { weights: acc }.convolve(pair, &FiniteMeasure::haar_k(pair))
    }

    /// `e^{−ct(1 − ρ̂(φ_π))}`.
    pub fn spherical_transform(&self, pi: &Irrep, t: f64) -> f64 {
        (-self.rate * t * (1.0 - spherical_transform(&self.rho, pi))).exp()
    }
}

/// `P f(g) = Σ_h f(gh) μ({h})`.
pub fn right_translation(pair: &FiniteGelfandPair, mu: &FiniteMeasure, f: &[f64]) -> Vec<f64> {
    (0..pair.order)
        .map(|g| {
            mu.weights
                .iter()
                .enumerate()
                .map(|(h, w)| f[pair.mul[g][h]] * w)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupReport {
    /// `max |μ_s * μ_t − μ_{s+t}|`.
    pub convolution: f64,
    /// `max_π |μ̂_{s+t}(φ_π) − μ̂_s(φ_π)μ̂_t(φ_π)|`.
    pub multiplicativity: f64,
    /// `max_π |μ̂_t(φ_π) − e^{−ct(1 − ρ̂(φ_π))}|`.
    pub exponent: f64,
    /// `max |P_t π_{ij} − λ π_{ij}|` with `λ = μ̂_t(φ_π)` when `i = 1`, `π` spherical, else `λ = 0`.
    pub eigen: f64,
    /// `|Tr(P_t) − Σ_{π∈Ĝ_s} d_π μ̂_t(φ_π)|`.
    pub trace: f64,
    /// `|Tr(P_t|_{bi-invariant}) − Σ_{π∈Ĝ_s} μ̂_t(φ_π)|`.
    pub trace_bi: f64,
}

impl SemigroupReport {
    pub fn pass(&self) -> bool {
        [
            self.convolution,
            self.multiplicativity,
            self.exponent,
            self.eigen,
            self.trace,
            self.trace_bi,
        ]
        .iter()
        .all(|r| *r <= IDENTITY_TOL)
    }
}

pub fn semigroup_check(
    pair: &FiniteGelfandPair,
    sg: &CompoundPoissonSemigroup,
    s: f64,
    t: f64,
) -> SemigroupReport {
    let (mu_s, mu_t, mu_st) = (sg.at(pair, s), sg.at(pair, t), sg.at(pair, s + t));
    let convolution = max_abs_diff(&mu_s.convolve(pair, &mu_t).weights, &mu_st.weights);
    let mut multiplicativity: f64 = 0.0;
    let mut exponent: f64 = 0.0;
    for (_, pi) in pair.spherical_irreps() {
        let (a, b, c) = (
            spherical_transform(&mu_s, pi),
            spherical_transform(&mu_t, pi),
            spherical_transform(&mu_st, pi),
        );
        multiplicativity = multiplicativity.max((c - a * b).abs());
        exponent = exponent.max((b - sg.spherical_transform(pi, t)).abs());
    }
    let mut eigen: f64 = 0.0;
    let mut expected_trace = 0.0;
    let mut expected_trace_bi = 0.0;
    for pi in &pair.irreps {
        let lambda = if pi.spherical {
            spherical_transform(&mu_t, pi)
        } else {
            0.0
        };
        if pi.spherical {
            expected_trace += pi.dim as f64 * lambda;
            expected_trace_bi += lambda;
        }
        for i in 0..pi.dim {
            for j in 0..pi.dim {
                // π_{ij}(g) = ⟨π(g)e_i, e_j⟩ sits at row j, column i.
                let f: Vec<f64> = (0..pair.order).map(|g| pi.matrices[g][(j, i)]).collect();
                let pf = right_translation(pair, &mu_t, &f);
                let scale = if i == 0 { lambda } else { 0.0 };
                let target: Vec<f64> = f.iter().map(|v| scale * v).collect();
                eigen = eigen.max(max_abs_diff(&pf, &target));
            }
        }
    }
    // Tr(P_t) = Σ_g μ_t({e}); on the bi-invariant subspace, Tr(P_t Q) with Q the K×K average.
    let trace = (pair.order as f64 * mu_t.weights[pair.identity()] - expected_trace).abs();
    let mut trace_bi = 0.0;
    for g in 0..pair.order {
        let mut delta = vec![0.0; pair.order];
        delta[g] = 1.0;
        let q = FiniteMeasure { weights: delta }.project(pair, Invariance::Bi);
        trace_bi += right_translation(pair, &mu_t, &q.weights)[g];
    }
    SemigroupReport {
        convolution,
        multiplicativity,
        exponent,
        eigen,
        trace,
        trace_bi: (trace_bi - expected_trace_bi).abs(),
    }
}

/// Classes of the equivalence generated by conjugacy and double-coset membership.
/// A measure constant on each class is both central and K-bi-invariant.
pub fn central_bi_invariant_blocks(pair: &FiniteGelfandPair) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..pair.order).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for g in 0..pair.order {
        for h in 0..pair.order {
            union(g, pair.mul[pair.mul[h][g]][pair.inv[h]]);
        }
        for other in pair.double_coset(g) {
            union(g, other);
        }
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for g in 0..pair.order {
        blocks.entry(find(&mut parent, g)).or_default().push(g);
    }
    blocks.into_values().collect()
}

/// Random weights constant on the central, bi-invariant blocks.
pub fn random_central_bi_invariant<R: Rng + ?Sized>(
    pair: &FiniteGelfandPair,
    rng: &mut R,
) -> FiniteMeasure {
    let mut weights = vec![0.0; pair.order];
    for block in central_bi_invariant_blocks(pair) {
        let w: f64 = rng.random();
        block.iter().for_each(|&g| weights[g] = w);
    }
    FiniteMeasure { weights }.normalized()
}

/// Largest entry of `μ̂(π)` over spherical `π` with `d_π > 1`; zero for central bi-invariant `μ`.
pub fn nocent_coefficient(pair: &FiniteGelfandPair, mu: &FiniteMeasure) -> f64 {
    pair.spherical_irreps()
        .filter(|(_, pi)| pi.dim > 1)
        .map(|(_, pi)| max_abs(&fourier_transform(pair, mu, pi)))
        .fold(0.0, f64::max)
}

/// Unitarity, homomorphism and Schur orthogonality, plus the K-fixed first basis vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub unitarity: f64,
    pub homomorphism: f64,
    pub schur: f64,
    pub projection: f64,
    pub symmetric_pair: bool,
    pub commutativity: f64,
    pub spherical_count: usize,
    pub double_cosets: usize,
}

impl StructureReport {
    pub fn pass(&self) -> bool {
        self.unitarity <= IDENTITY_TOL
            && self.homomorphism <= IDENTITY_TOL
            && self.schur <= IDENTITY_TOL
            && self.projection <= IDENTITY_TOL
            && self.symmetric_pair
            && self.commutativity <= IDENTITY_TOL
            && self.spherical_count == self.double_cosets
    }
}

pub fn structure_check(pair: &FiniteGelfandPair) -> StructureReport {
    let n = pair.order;
    let mut unitarity: f64 = 0.0;
    let mut homomorphism: f64 = 0.0;
    let mut projection: f64 = 0.0;
    for pi in &pair.irreps {
        let id = Mat::identity(pi.dim, pi.dim);
        for g in 0..n {
            let a = &pi.matrices[g];
            unitarity = unitarity.max(max_abs(&(a * a.transpose() - &id)));
            for h in 0..n {
                let prod = a * &pi.matrices[h];
                homomorphism = homomorphism.max(max_abs(&(prod - &pi.matrices[pair.mul[g][h]])));
            }
        }
        let e = &pi.projection;
        projection = projection.max(max_abs(&(e * e - e))).max(max_abs(&(e - e.transpose())));
        let rank = e.trace();
        let expected = if pi.spherical { 1.0 } else { 0.0 };
        projection = projection.max((rank - expected).abs());
        if pi.spherical {
            let mut fixed = Mat::zeros(pi.dim, pi.dim);
            fixed[(0, 0)] = 1.0;
            projection = projection.max(max_abs(&(e - fixed)));
        }
    }
    let mut schur: f64 = 0.0;
    for (p, a) in pair.irreps.iter().enumerate() {
        for (q, b) in pair.irreps.iter().enumerate() {
            for i in 0..a.dim {
                for j in 0..a.dim {
                    for k in 0..b.dim {
                        for l in 0..b.dim {
                            let s: f64 = (0..n)
                                .map(|g| a.matrices[g][(i, j)] * b.matrices[g][(k, l)])
                                .sum();
                            let target = if p == q && i == k && j == l {
                                n as f64 / a.dim as f64
                            } else {
                                0.0
                            };
                            schur = schur.max((s - target).abs());
                        }
                    }
                }
            }
        }
    }
    let symmetric_pair = (0..n).all(|g| pair.double_coset(g) == pair.double_coset(pair.inv[g]));
    let cosets = pair.double_cosets();
    let indicators: Vec<FiniteMeasure> = cosets
        .iter()
        .map(|dc| FiniteMeasure::uniform_on(pair, dc))
        .collect();
    let mut commutativity: f64 = 0.0;
    for a in &indicators {
        for b in &indicators {
            let ab = a.convolve(pair, b);
            let ba = b.convolve(pair, a);
            commutativity = commutativity.max(max_abs_diff(&ab.weights, &ba.weights));
        }
    }
    StructureReport {
        unitarity,
        homomorphism,
        schur,
        projection,
        symmetric_pair,
        commutativity,
        spherical_count: pair.spherical_irreps().count(),
        double_cosets: cosets.len(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PassFail {
    pub pass: u64,
    pub fail: u64,
}

/// Per-clause pass/fail counts over a batch of random trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestbedReport {
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub clauses: BTreeMap<String, PassFail>,
    pub first_failure: Option<String>,
}

impl TestbedReport {
    pub fn pass(&self) -> bool {
        self.first_failure.is_none()
    }

    fn record(&mut self, clause: &str, ok: bool, detail: impl FnOnce() -> String) {
        let entry = self.clauses.entry(clause.to_string()).or_default();
        if ok {
            entry.pass += 1;
        } else {
            entry.fail += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(format!("{clause}: {}", detail()));
            }
        }
    }
}

/// Structural checks once, then `trials` random instances of every identity.
pub fn run_testbed(m: usize, trials: usize, seed: u64) -> Result<TestbedReport> {
    let pair = build_dihedral_pair(m)?;
    let mut report = TestbedReport {
        m,
        trials,
        seed,
        clauses: BTreeMap::new(),
        first_failure: None,
    };
    let st = structure_check(&pair);
    report.record("structure.unitarity", st.unitarity <= IDENTITY_TOL, || format!("{:e}", st.unitarity));
    report.record("structure.homomorphism", st.homomorphism <= IDENTITY_TOL, || {
        format!("{:e}", st.homomorphism)
    });
    report.record("structure.schur", st.schur <= IDENTITY_TOL, || format!("{:e}", st.schur));
    report.record("structure.projection", st.projection <= IDENTITY_TOL, || {
        format!("{:e}", st.projection)
    });
    report.record("structure.symmetric_pair", st.symmetric_pair, || "KgK ≠ Kg⁻¹K".into());
    report.record(
        "structure.commutativity",
        st.commutativity <= IDENTITY_TOL && st.spherical_count == st.double_cosets,
        || format!("{:e}", st.commutativity),
    );
    if trials == 0 {
        return Ok(report);
    }
    for r in peter_weyl_check(&pair) {
        report.record(&format!("pw.{}", r.family), r.pass(), || format!("{r:?}"));
    }
    for (_, pi) in pair.spherical_irreps() {
        let res = spherical_eq_residual(&pair, pi, None);
        report.record("spherical_eq", res <= IDENTITY_TOL, || format!("{}: {res:e}", pi.label));
    }

    for trial in 0..trials {
        let mut rng = RngStream::new(seed, trial as u64).rng();
        for kind in [Invariance::None, Invariance::Left, Invariance::Right, Invariance::Bi] {
            let mu = FiniteMeasure::random(&pair, kind, &mut rng);
            let verdict = check_ft1(&pair, &mu);
            let expected_ok = verdict.get(kind).is_none_or(|v| v.holds());
            report.record("ft1.forward", verdict.consistent() && expected_ok, || format!("{verdict:?}"));
            if kind != Invariance::None {
                let built = measure_with_pattern(&pair, kind, &mut rng);
                let v = check_ft1(&pair, &built);
                let ok = v.get(kind).is_some_and(|c| c.holds()) && v.consistent();
                report.record("ft1.converse", ok, || format!("{v:?}"));
            }
            let d1 = dens1_residual(&pair, &mu);
            report.record("dens1", d1 <= IDENTITY_TOL, || format!("{d1:e}"));
            let (parseval, collapse) = parseval_residual(&pair, &mu);
            report.record("parseval", parseval <= IDENTITY_TOL, || format!("{parseval:e}"));
            if kind == Invariance::Bi {
                let d2 = dens2_residual(&pair, &mu)?;
                report.record("dens2", d2 <= IDENTITY_TOL, || format!("{d2:e}"));
                let c = collapse.unwrap_or(f64::NAN);
                report.record("parseval.spherical", c <= IDENTITY_TOL, || format!("{c:e}"));
            }
        }
        let rho = FiniteMeasure::random(&pair, Invariance::Bi, &mut rng);
        let rate = 0.1 + 2.0 * rng.random::<f64>();
        let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
        let sg = CompoundPoissonSemigroup::new(&pair, rho, rate)?;
        let rep = semigroup_check(&pair, &sg, s, t);
        report.record("semigroup.convolution", rep.convolution <= IDENTITY_TOL, || format!("{rep:?}"));
        report.record("semigroup.multiplicativity", rep.multiplicativity <= IDENTITY_TOL, || {
            format!("{rep:?}")
        });
        report.record("semigroup.eigen", rep.eigen <= IDENTITY_TOL && rep.exponent <= IDENTITY_TOL, || {
            format!("{rep:?}")
        });
        report.record("semigroup.trace", rep.trace <= IDENTITY_TOL && rep.trace_bi <= IDENTITY_TOL, || {
            format!("{rep:?}")
        });
        let central = random_central_bi_invariant(&pair, &mut rng);
        let coef = nocent_coefficient(&pair, &central);
        let ok = central.is_central(&pair) && central.is_invariant(&pair, Invariance::Bi) && coef <= ZERO_TOL;
        report.record("nocent", ok, || format!("{coef:e}"));
    }
    Ok(report)
}
