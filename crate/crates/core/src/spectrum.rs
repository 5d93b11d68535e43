//! Lévy–Khintchine exponents of isotropic processes on the sphere.
//!
//! A K-bi-invariant Lévy process on `S^{d-1}` is fixed by a diffusion coefficient `a ≥ 0`
//! and a Lévy measure `ν` on the colatitude `(0, π]`. Its exponent on the degree-`n`
//! harmonics is
//!
//! ```text
//! χ_n = a n(n + d − 2) + ∫_0^π (1 − p_n(cos θ)) ν(dθ),
//! ```
//!
//! and subordination by a Bernstein function `ψ` replaces `χ_n` with `ψ(χ_n)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special_fn::{
    casimir, gauss_legendre, one_minus_spherical_all, spherical_dim_f64, SphereGeometry,
};

/// Point mass of the Lévy measure at colatitude `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyAtom {
    pub theta: f64,
    pub mass: f64,
}

/// Absolutely continuous part of the Lévy measure, as a density in `θ` on `(0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DensityFamily {
    #[default]
    None,
    /// `ν(dθ) = c dθ`.
    Uniform { c: f64 },
    /// `ν(dθ) = c θ^{−1−β} dθ`, `0 < β < 2`.
    Power { c: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevyMeasureSpec {
    pub atoms: Vec<LevyAtom>,
    pub family: DensityFamily,
}

impl LevyMeasureSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            atoms: atoms
                .into_iter()
                .map(|(theta, mass)| LevyAtom { theta, mass })
                .collect(),
            family: DensityFamily::None,
        }
    }

    pub fn with_family(mut self, family: DensityFamily) -> Self {
        self.family = family;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.family == DensityFamily::None
    }

    /// Total mass `ν((0, π])`, `None` when infinite.
    pub fn total_mass(&self) -> Option<f64> {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        match self.family {
            DensityFamily::None => Some(atoms),
            DensityFamily::Uniform { c } => Some(atoms + c * PI),
            DensityFamily::Power { .. } => None,
        }
    }
}

/// A Lévy measure that passed [`validate_levy`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedLevy {
    pub spec: LevyMeasureSpec,
    /// `∫ (1 − cos θ) ν(dθ)`.
    pub cosine_moment: f64,
}

/// Checks the shape of `spec` and the integrability condition `∫(1 − cos θ) ν(dθ) < ∞`.
pub fn validate_levy(spec: &LevyMeasureSpec) -> Result<ValidatedLevy> {
    for (i, atom) in spec.atoms.iter().enumerate() {
        if !(atom.theta > 0.0 && atom.theta <= PI) {
            return Err(Error::domain(format!(
                "levy_measure.atoms[{i}].theta = {} outside (0, π]",
                atom.theta
            )));
        }
        if !(atom.mass > 0.0 && atom.mass.is_finite()) {
            return Err(Error::domain(format!(
                "levy_measure.atoms[{i}].mass = {} must be positive",
                atom.mass
            )));
        }
    }
    match spec.family {
        DensityFamily::None => {}
        DensityFamily::Uniform { c } => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::domain(format!("levy_measure.family.c = {c} must be positive")));
            }
        }
        DensityFamily::Power { c, beta } => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::domain(format!("levy_measure.family.c = {c} must be positive")));
            }
            if beta.is_nan() || beta <= 0.0 {
                return Err(Error::domain(format!(
                    "levy_measure.family.beta = {beta} must be positive"
                )));
            }
            if beta >= 2.0 {
                return Err(Error::Integrability(format!(
                    "levy_measure.family.beta = {beta}: ∫(1 − cos θ) θ^(−1−β) dθ diverges for β ≥ 2"
                )));
            }
        }
    }
    let atoms: f64 = spec
        .atoms
        .iter()
        .map(|a| a.mass * (1.0 - a.theta.cos()))
        .sum();
    // 1 − p_1(s) = 1 − s in every dimension.
    let geom = SphereGeometry::new(3)?;
    let density = density_jump_integrals(&geom, &spec.family, 1)?[1];
    let cosine_moment = atoms + density;
    if !cosine_moment.is_finite() {
        return Err(Error::Integrability(format!(
            "∫(1 − cos θ) ν(dθ) evaluated to {cosine_moment}"
        )));
    }
    Ok(ValidatedLevy {
        spec: spec.clone(),
        cosine_moment,
    })
}

const PANEL_NODES: usize = 20;

/// `∫_0^π (1 − p_n(cos θ)) w(θ) dθ` for `n = 0..=n_max`, `w` the density family.
///
/// The power family is integrated on dyadic panels `[π 2^{−k−1}, π 2^{−k}]`, each split
/// so that a panel spans at most a few radians of the degree-`n_max` oscillation. The
/// innermost piece `[0, ε]` uses the small-angle form `1 − p_n ≈ κ_n θ² / (2(d − 1))`
/// with `κ_{n_max} ε² ≤ 1e−12`.
pub(crate) fn density_jump_integrals(
    geom: &SphereGeometry,
    family: &DensityFamily,
    n_max: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_max + 1];
    let (c, exponent, singular) = match *family {
        DensityFamily::None => return Ok(out),
        DensityFamily::Uniform { c } => (c, 0.0, false),
        DensityFamily::Power { c, beta } => (c, -1.0 - beta, true),
    };
    let (gl_x, gl_w) = gauss_legendre(PANEL_NODES);
    let accumulate = |lo: f64, hi: f64, out: &mut Vec<f64>| {
        let pieces = (((n_max as f64 + 1.0) * (hi - lo) / 3.0).ceil() as usize).max(1);
        let h = (hi - lo) / pieces as f64;
        for piece in 0..pieces {
            let a = lo + piece as f64 * h;
            for (x, w) in gl_x.iter().zip(&gl_w) {
                let theta = a + 0.5 * h * (x + 1.0);
                let weight = 0.5 * h * w * c * theta.powf(exponent);
                let half = (0.5 * theta).sin();
                let q = one_minus_spherical_all(geom, 2.0 * half * half, n_max);
                for (acc, qn) in out.iter_mut().zip(&q) {
                    *acc += weight * qn;
                }
            }
        }
    };
    if !singular {
        accumulate(0.0, PI, &mut out);
        return Ok(out);
    }
    let kappa_max = casimir(n_max, geom).max(1.0);
    let eps_target = 1e-6 / kappa_max.sqrt();
    let mut hi = PI;
    let mut panels = 0;
    while hi > eps_target {
        accumulate(hi / 2.0, hi, &mut out);
        hi /= 2.0;
        panels += 1;
        if panels > 2000 {
            return Err(Error::Numerical("dyadic panel refinement did not terminate".into()));
        }
    }
    let two_minus_beta = 2.0 + exponent + 1.0;
    let m = geom.manifold_dim() as f64;
    let tail_scale = c * hi.powf(two_minus_beta) / (2.0 * m * two_minus_beta);
    for (n, acc) in out.iter_mut().enumerate() {
        *acc += tail_scale * casimir(n, geom);
    }
    Ok(out)
}

/// Gangolli triple `(geometry, a, ν)` of an isotropic Lévy process on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    geom: SphereGeometry,
    diffusion: f64,
    nu: LevyMeasureSpec,
    cosine_moment: f64,
}

impl LevyModel {
    pub fn new(geom: SphereGeometry, diffusion: f64, nu: LevyMeasureSpec) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(Error::domain(format!("diffusion = {diffusion} must be nonnegative")));
        }
        let validated = validate_levy(&nu)?;
        if diffusion == 0.0 && nu.is_zero() {
            return Err(Error::domain(
                "degenerate model: diffusion = 0 and an empty Lévy measure",
            ));
        }
        Ok(Self {
            geom,
            diffusion,
            nu,
            cosine_moment: validated.cosine_moment,
        })
    }

    /// Brownian motion with generator `a Δ`.
    pub fn heat(geom: SphereGeometry, diffusion: f64) -> Result<Self> {
        Self::new(geom, diffusion, LevyMeasureSpec::zero())
    }

    pub fn geom(&self) -> &SphereGeometry {
        &self.geom
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn levy_measure(&self) -> &LevyMeasureSpec {
        &self.nu
    }

    pub fn cosine_moment(&self) -> f64 {
        self.cosine_moment
    }

    /// Pure Brownian motion (`a > 0`, `ν = 0`).
    pub fn is_heat(&self) -> bool {
        self.diffusion > 0.0 && self.nu.is_zero()
    }

    /// The same jump part with the diffusion replaced.
    pub fn with_diffusion(&self, diffusion: f64) -> Result<Self> {
        Self::new(self.geom, diffusion, self.nu.clone())
    }
}

/// `χ_n` for `n = 0..=n_max`.
pub fn chi_all(model: &LevyModel, n_max: usize) -> Result<Vec<f64>> {
    let geom = &model.geom;
    let mut out = density_jump_integrals(geom, &model.nu.family, n_max)?;
    for atom in &model.nu.atoms {
        let half = (0.5 * atom.theta).sin();
        let q = one_minus_spherical_all(geom, 2.0 * half * half, n_max);
        for (acc, qn) in out.iter_mut().zip(&q) {
            *acc += atom.mass * qn;
        }
    }
    for (n, acc) in out.iter_mut().enumerate() {
        *acc = (*acc + model.diffusion * casimir(n, geom)).max(0.0);
        if !acc.is_finite() {
            return Err(Error::Numerical(format!("χ_{n} is not finite")));
        }
    }
    out[0] = 0.0;
    Ok(out)
}

/// Gangolli exponent `χ_n`.
pub fn chi(model: &LevyModel, n: usize) -> Result<f64> {
    Ok(chi_all(model, n)?[n])
}

#[derive(Debug, Clone, PartialEq)]
pub enum BernsteinKind {
    Identity,
    /// `ψ(u) = u^α`, `0 < α < 1`.
    Stable { alpha: f64 },
    /// `ψ(u) = b u + Σ m_i (1 − e^{−y_i u})`.
    DriftCp { b: f64, tau_atoms: Vec<(f64, f64)> },
}

/// Laplace exponent of a subordinator, with its index of regular variation at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinFunction {
    kind: BernsteinKind,
    index: Option<f64>,
}

impl BernsteinFunction {
    pub fn identity() -> Self {
        Self {
            kind: BernsteinKind::Identity,
            index: Some(1.0),
        }
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("subordinator.alpha = {alpha} outside (0, 1)")));
        }
        Ok(Self {
            kind: BernsteinKind::Stable { alpha },
            index: Some(alpha),
        })
    }

    pub fn drift_cp(b: f64, tau_atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("subordinator.b = {b} must be nonnegative")));
        }
        for (i, &(y, mass)) in tau_atoms.iter().enumerate() {
            if !(y > 0.0 && y.is_finite()) {
                return Err(Error::domain(format!("subordinator.tau_atoms[{i}].y = {y} must be positive")));
            }
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(Error::domain(format!(
                    "subordinator.tau_atoms[{i}].mass = {mass} must be positive"
                )));
            }
        }
        if b == 0.0 && tau_atoms.is_empty() {
            return Err(Error::domain("subordinator is identically zero"));
        }
        let index = if b > 0.0 { Some(1.0) } else { None };
        Ok(Self {
            kind: BernsteinKind::DriftCp { b, tau_atoms },
            index,
        })
    }

    pub fn kind(&self) -> &BernsteinKind {
        &self.kind
    }

    /// Index `r` of regular variation at infinity; `None` for bounded `ψ`.
    pub fn regular_variation_index(&self) -> Option<f64> {
        self.index
    }

    /// Linear drift `b`, i.e. `lim ψ(u)/u`.
    pub fn drift(&self) -> f64 {
        match &self.kind {
            BernsteinKind::Identity => 1.0,
            BernsteinKind::Stable { .. } => 0.0,
            BernsteinKind::DriftCp { b, .. } => *b,
        }
    }

    /// `sup ψ`, finite only for a pure compound-Poisson subordinator.
    pub fn supremum(&self) -> f64 {
        match &self.kind {
            BernsteinKind::DriftCp { b, tau_atoms } if *b == 0.0 => {
                tau_atoms.iter().map(|(_, m)| m).sum()
            }
            _ => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.supremum().is_finite()
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            BernsteinKind::Identity => u,
            BernsteinKind::Stable { alpha } => u.powf(*alpha),
            BernsteinKind::DriftCp { b, tau_atoms } => {
                b * u
                    + tau_atoms
                        .iter()
                        .map(|(y, m)| -m * (-y * u).exp_m1())
                        .sum::<f64>()
            }
        }
    }

    /// Increasing inverse `ψ^{−1}(v)` by bracketing bisection.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("ψ^-1 needs a positive finite level, got {v}")));
        }
        if matches!(self.kind, BernsteinKind::Identity) {
            return Ok(v);
        }
        let sup = self.supremum();
        if v >= sup {
            return Err(Error::NotInvertible(format!(
                "ψ is bounded by {sup}, cannot reach {v}"
            )));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut expansions = 0;
        while self.eval(hi) < v {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 2100 {
                return Err(Error::Numerical(format!("no bracket found for ψ^-1({v})")));
            }
        }
        let tol = 1e-12 * v.max(1.0);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let val = self.eval(mid);
            if (val - v).abs() <= tol || mid == lo || mid == hi {
                return Ok(mid);
            }
            if val < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

pub fn bernstein_eval(psi: &BernsteinFunction, u: f64) -> f64 {
    psi.eval(u)
}

pub fn bernstein_inverse(psi: &BernsteinFunction, v: f64) -> Result<f64> {
    psi.inverse(v)
}

/// `ψ(χ_n)`.
pub fn subordinated_spectrum(model: &LevyModel, psi: &BernsteinFunction, n: usize) -> Result<f64> {
    Ok(psi.eval(chi(model, n)?))
}

/// The exponents `χ'_n` governing the semigroup: `χ_n`, or `ψ(χ_n)` under subordination.
pub fn effective_exponents(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    n_max: usize,
) -> Result<Vec<f64>> {
    let chi = chi_all(model, n_max)?;
    Ok(match psi {
        None => chi,
        Some(psi) => chi.into_iter().map(|c| psi.eval(c)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub n: usize,
    pub dim: f64,
    pub kappa: f64,
    pub chi: f64,
}

/// Cached `(n, d_n, κ_n, χ_n)` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub model: LevyModel,
    pub entries: Vec<SpectrumEntry>,
    pub n_max: usize,
}

pub fn build_table(model: &LevyModel, n_max: usize) -> Result<SpectrumTable> {
    let geom = model.geom;
    let chi = chi_all(model, n_max)?;
    let entries = chi
        .into_iter()
        .enumerate()
        .map(|(n, chi)| SpectrumEntry {
            n,
            dim: spherical_dim_f64(n, &geom),
            kappa: casimir(n, &geom),
            chi,
        })
        .collect();
    Ok(SpectrumTable {
        model: model.clone(),
        entries,
        n_max,
    })
}

/// Lower bound `χ'_n ≥ rate · n^power` valid for every `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GrowthBound {
    pub rate: f64,
    pub power: f64,
}

/// A certified polynomial lower bound on the exponents, from `χ_n ≥ a κ_n ≥ a n²`
/// and the monotonicity of `ψ`.
pub(crate) fn growth_bound(model: &LevyModel, psi: Option<&BernsteinFunction>) -> Option<GrowthBound> {
    let a = model.diffusion;
    if a <= 0.0 {
        return None;
    }
    match psi.map(|p| p.kind()) {
        None | Some(BernsteinKind::Identity) => Some(GrowthBound { rate: a, power: 2.0 }),
        Some(BernsteinKind::Stable { alpha }) => Some(GrowthBound {
            rate: a.powf(*alpha),
            power: 2.0 * alpha,
        }),
        Some(BernsteinKind::DriftCp { b, .. }) if *b > 0.0 => Some(GrowthBound {
            rate: a * b,
            power: 2.0,
        }),
        Some(BernsteinKind::DriftCp { .. }) => None,
    }
}

/// Whether the exponents are provably bounded, so no `L²` density exists.
pub(crate) fn exponents_bounded(model: &LevyModel, psi: Option<&BernsteinFunction>) -> bool {
    if psi.is_some_and(|p| p.is_bounded()) {
        return true;
    }
    model.diffusion == 0.0 && model.nu.total_mass().is_some()
}

/// Verdict of the `L²` (equivalently, continuity) criterion `Σ d_n e^{−2tχ'_n} < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DensityClass {
    Continuous,
    NoSquareIntegrableDensity,
    NumericallyConvergent(f64),
    Undetermined(Vec<f64>),
}

impl DensityClass {
    pub fn name(&self) -> &'static str {
        match self {
            DensityClass::Continuous => "Continuous",
            DensityClass::NoSquareIntegrableDensity => "NoSquareIntegrableDensity",
            DensityClass::NumericallyConvergent(_) => "NumericallyConvergent",
            DensityClass::Undetermined(_) => "Undetermined",
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(self, DensityClass::Continuous | DensityClass::NumericallyConvergent(_))
    }
}

impl std::fmt::Display for DensityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Consecutive negligible terms required before a numeric sum counts as settled.
pub(crate) const STAGNATION_RUN: usize = 50;
pub(crate) const NUMERIC_N_CAP: usize = 2048;

/// Outcome of summing `Σ weight_n` until a run of negligible terms appears.
pub(crate) enum AdaptiveSum {
    Settled { n_max: usize, sum: f64 },
    Exhausted { partial_sums: Vec<f64> },
}

/// Sums `Σ d_n e^{−scale·χ'_n}` for growing `N` until [`STAGNATION_RUN`] consecutive
/// terms each fall below `rel_eps · (running sum)`.
pub(crate) fn adaptive_series(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    scale: f64,
    rel_eps: f64,
) -> Result<AdaptiveSum> {
    let geom = model.geom;
    let mut n_max = 128;
    let mut checkpoints = Vec::new();
    loop {
        let exps = effective_exponents(model, psi, n_max)?;
        let mut sum = 0.0;
        let mut run = 0;
        for (n, x) in exps.iter().enumerate() {
            let term = spherical_dim_f64(n, &geom) * (-scale * x).exp();
            sum += term;
            if n > 0 && term < rel_eps * sum {
                run += 1;
                if run >= STAGNATION_RUN {
                    return Ok(AdaptiveSum::Settled { n_max: n, sum });
                }
            } else {
                run = 0;
            }
        }
        checkpoints.push(sum);
        if n_max >= NUMERIC_N_CAP {
            return Ok(AdaptiveSum::Exhausted {
                partial_sums: checkpoints,
            });
        }
        n_max *= 2;
    }
}

/// Classifies the time-`t` law by the square-summability of its spherical transform.
pub fn density_class(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
) -> Result<DensityClass> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time t = {t} must be positive")));
    }
    if growth_bound(model, psi).is_some() {
        return Ok(DensityClass::Continuous);
    }
    if exponents_bounded(model, psi) {
        return Ok(DensityClass::NoSquareIntegrableDensity);
    }
    Ok(match adaptive_series(model, psi, 2.0 * t, 1e-15)? {
        AdaptiveSum::Settled { sum, .. } => DensityClass::NumericallyConvergent(sum),
        AdaptiveSum::Exhausted { partial_sums } => DensityClass::Undetermined(partial_sums),
    })
}
