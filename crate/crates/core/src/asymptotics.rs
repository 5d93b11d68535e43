//! Short-time behaviour of the return density `k_t(o, o)`.
//!
//! The power of `t` is governed by the dimension of the sphere itself, `m = d − 1`.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernel::{trace, DEFAULT_EPS};
use crate::special_fn::SphereGeometry;
use crate::spectrum::{BernsteinFunction, LevyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AsymptoticMode {
    Heat,
    Subordinated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSpec {
    pub geom: SphereGeometry,
    pub psi: Option<BernsteinFunction>,
    pub mode: AsymptoticMode,
}

impl AsymptoticSpec {
    pub fn heat(geom: SphereGeometry) -> Self {
        Self {
            geom,
            psi: None,
            mode: AsymptoticMode::Heat,
        }
    }

    pub fn subordinated(geom: SphereGeometry, psi: BernsteinFunction) -> Result<Self> {
        if psi.regular_variation_index().is_none() || psi.is_bounded() {
            return Err(Error::NotInvertible(
                "subordinated asymptotics need an unbounded, regularly varying ψ".into(),
            ));
        }
        Ok(Self {
            geom,
            psi: Some(psi),
            mode: AsymptoticMode::Subordinated,
        })
    }

    pub fn predict(&self, t: f64) -> Result<f64> {
        match (&self.mode, &self.psi) {
            (AsymptoticMode::Subordinated, Some(psi)) => subordinated_asym(&self.geom, psi, t),
            _ => Ok(heat_asym(&self.geom, t)),
        }
    }
}

/// `Vol(S^{d−1}) / (4π)^{m/2} · t^{−m/2}`.
pub fn heat_asym(geom: &SphereGeometry, t: f64) -> f64 {
    let half_m = geom.manifold_dim() as f64 / 2.0;
    geom.volume() / (4.0 * PI * t).powf(half_m)
}

/// `Vol · Γ(m/2r + 1) / ((4π)^{m/2} Γ(m/2 + 1)) · ψ^{−1}(1/t)^{m/2}`, `r` the regular-variation index.
pub fn subordinated_asym(geom: &SphereGeometry, psi: &BernsteinFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time t = {t} must be positive")));
    }
    let r = psi.regular_variation_index().ok_or_else(|| {
        Error::NotInvertible("ψ is bounded; no regular variation at infinity".into())
    })?;
    let half_m = geom.manifold_dim() as f64 / 2.0;
    let gamma_ratio = (ln_gamma(half_m / r + 1.0) - ln_gamma(half_m + 1.0)).exp();
    let inv = psi.inverse(1.0 / t)?;
    Ok(geom.volume() * gamma_ratio / (4.0 * PI).powf(half_m) * inv.powf(half_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymRow {
    pub t: f64,
    pub exact: f64,
    pub prediction: f64,
    pub ratio: f64,
}

/// Leading-order prediction for a heat-based model with diffusion `a`.
///
/// Brownian motion with generator `aΔ` at time `t` is the unit-speed motion at time `at`;
/// under subordination `ψ(aκ)` has inverse `ψ^{−1}(v)/a`.
pub fn model_prediction(model: &LevyModel, psi: Option<&BernsteinFunction>, t: f64) -> Result<f64> {
    if !model.is_heat() {
        return Err(Error::domain(
            "short-time asymptotics apply to Brownian motion (diffusion > 0, no jumps) and its subordinates",
        ));
    }
    let a = model.diffusion();
    let geom = model.geom();
    match psi {
        None => Ok(heat_asym(geom, a * t)),
        Some(psi) => {
            let half_m = geom.manifold_dim() as f64 / 2.0;
            Ok(subordinated_asym(geom, psi, t)? / a.powf(half_m))
        }
    }
}

/// Exact diagonal versus the leading-order prediction on a grid of times.
pub fn asym_ratio_curve(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t_grid: &[f64],
) -> Result<Vec<AsymRow>> {
    t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::domain(format!("time t = {t} must be positive")));
            }
            let prediction = model_prediction(model, psi, t)?;
            let exact = trace(model, psi, t, DEFAULT_EPS * 1e-2)?.diagonal;
            Ok(AsymRow {
                t,
                exact,
                prediction,
                ratio: exact / prediction,
            })
        })
        .collect()
}
