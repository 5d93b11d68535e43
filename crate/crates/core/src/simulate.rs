//! Monte-Carlo simulation of isotropic Lévy processes on `S^{d−1}`.
//!
//! Every replica draws from its own ChaCha8 stream keyed by `(seed, replica index)`,
//! so results do not depend on how replicas are spread over worker threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KahanSum, KernelSeries};
use crate::special_fn::{spherical_fn_all, SphereGeometry};
use crate::spectrum::{
    effective_exponents, BernsteinFunction, BernsteinKind, DensityFamily, LevyModel,
};

/// Default number of points in tabulated colatitude CDFs.
pub const DEFAULT_THETA_GRID: usize = 2048;

/// A reproducible random stream: ChaCha8 seeded from `seed` with stream number `stream_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Histogram of colatitudes on `[0, π]` with equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColatHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ColatHistogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        Ok(Self {
            edges: (0..=bins).map(|i| PI * i as f64 / bins as f64).collect(),
            counts: vec![0; bins],
            total: 0,
        })
    }

    pub fn add(&mut self, theta: f64) {
        let bins = self.counts.len();
        let idx = ((theta / PI) * bins as f64).floor();
        let idx = (idx.max(0.0) as usize).min(bins - 1);
        self.counts[idx] += 1;
        self.total += 1;
    }

    /// Bin-wise sum of two histograms with identical edges.
    pub fn merge(&mut self, other: &ColatHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::domain("cannot merge histograms with different bins"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

/// Inverse-CDF sampler for the colatitude of a zonal law, tabulated on `[0, θ_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColatitudeSampler {
    thetas: Vec<f64>,
    cdf: Vec<f64>,
}

impl ColatitudeSampler {
    /// Tabulates `c_d k(cos θ) sin^{d−2} θ`, clamps negative wiggles to zero, integrates by
    /// the trapezoid rule and normalizes.
    pub fn from_series(series: &KernelSeries, grid: usize, theta_max: f64) -> Result<Self> {
        if grid < 2 {
            return Err(Error::domain("colatitude grid needs at least two points"));
        }
        let theta_max = theta_max.min(PI);
        let thetas: Vec<f64> = (0..grid)
            .map(|j| theta_max * j as f64 / (grid - 1) as f64)
            .collect();
        let density: Vec<f64> = thetas
            .par_iter()
            .map(|&th| series.colatitude_density(th).max(0.0))
            .collect();
        let mut cdf = Vec::with_capacity(grid);
        cdf.push(0.0);
        let h = theta_max / (grid - 1) as f64;
        for j in 1..grid {
            cdf.push(cdf[j - 1] + 0.5 * h * (density[j - 1] + density[j]));
        }
        let total = cdf[grid - 1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical("colatitude density has no mass on the grid".into()));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { thetas, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.thetas[j - 1] + frac * (self.thetas[j] - self.thetas[j - 1])
    }
}

/// One colatitude draw from the time-`t` law started at the pole.
pub fn sample_colatitude<R: Rng + ?Sized>(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let series = KernelSeries::build(model, psi, t, 1e-12)?;
    Ok(ColatitudeSampler::from_series(&series, DEFAULT_THETA_GRID, PI)?.sample(rng))
}

/// A draw of `S(t)` for the subordinator with Laplace exponent `ψ`,
/// normalized so that `E e^{−uS(t)} = e^{−tψ(u)}`.
pub fn sample_subordinator<R: Rng + ?Sized>(psi: &BernsteinFunction, t: f64, rng: &mut R) -> f64 {
    match psi.kind() {
        BernsteinKind::Identity => t,
        BernsteinKind::Stable { alpha } => {
            let alpha = *alpha;
            if alpha == 0.5 {
                let z: f64 = StandardNormal.sample(rng);
                return t * t / (2.0 * z * z);
            }
            // Kanter's representation of the one-sided stable law with E e^{−uS} = e^{−u^α}.
            let u = PI * rng.random::<f64>();
            let e: f64 = Exp1.sample(rng);
            let unit = (alpha * u).sin() / u.sin().powf(1.0 / alpha)
                * ((1.0 - alpha) * u).sin().powf((1.0 - alpha) / alpha)
                / e.powf((1.0 - alpha) / alpha);
            t.powf(1.0 / alpha) * unit
        }
        BernsteinKind::DriftCp { b, tau_atoms } => {
            let mut s = b * t;
            for &(y, mass) in tau_atoms {
                s += y * poisson(mass * t, rng);
            }
            s
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
}

/// The pole `o = e_d`.
pub fn north_pole(geom: &SphereGeometry) -> Vec<f64> {
    let mut x = vec![0.0; geom.ambient_dim()];
    x[geom.ambient_dim() - 1] = 1.0;
    x
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x.iter_mut() {
        *v /= norm;
    }
}

/// Uniform unit vector orthogonal to `x`.
fn tangent_direction<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
        let dot: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi -= dot * xi;
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in &mut g {
                *v /= norm;
            }
            return g;
        }
    }
}

/// Moves `x` by geodesic angle `theta` in a uniformly random direction.
pub fn apply_jump<R: Rng + ?Sized>(x: &mut [f64], theta: f64, rng: &mut R) {
    if theta == 0.0 {
        return;
    }
    let dir = tangent_direction(x, rng);
    let (s, c) = theta.sin_cos();
    for (xi, ui) in x.iter_mut().zip(&dir) {
        *xi = c * *xi + s * ui;
    }
    normalize(x);
}

fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in &mut g {
                *v /= norm;
            }
            return g;
        }
    }
}

/// Colatitude of a point relative to the pole.
pub fn colatitude(x: &[f64]) -> f64 {
    x[x.len() - 1].clamp(-1.0, 1.0).acos()
}

/// Exact-in-law Brownian increments for unit diffusion at arbitrary times.
///
/// Times are decomposed in binary over dyadic levels `u_0 2^k`; each level has its own
/// inverse-CDF table, and increments are composed by isotropic rotation (Chapman–Kolmogorov).
/// The remainder below `u_0` is taken as an exponential-map Gaussian step, and times
/// beyond mixing are drawn from the uniform law.
#[derive(Debug, Clone)]
pub struct HeatStepper {
    geom: SphereGeometry,
    levels: Vec<(f64, ColatitudeSampler)>,
    mixing_time: f64,
}

impl HeatStepper {
    const FINEST: f64 = 1.0 / 131072.0;

    pub fn new(geom: SphereGeometry, grid: usize) -> Result<Self> {
        let d = geom.ambient_dim() as f64;
        // d_1 e^{−κ_1 u} < 1e−17 with d_1 = d, κ_1 = d − 1.
        let mixing_time = (d.ln() + 17.0 * 10f64.ln()) / (d - 1.0);
        let unit = LevyModel::heat(geom, 1.0)?;
        let mut times = Vec::new();
        let mut u = Self::FINEST;
        while u < mixing_time {
            times.push(u);
            u *= 2.0;
        }
        let levels = times
            .par_iter()
            .map(|&u| {
                let series = KernelSeries::build(&unit, None, u, 1e-13)?;
                let theta_max = 14.0 * u.sqrt() + 1e-3;
                Ok((u, ColatitudeSampler::from_series(&series, grid, theta_max)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geom,
            levels,
            mixing_time,
        })
    }

    /// Advances `x` by unit-diffusion Brownian motion for time `u`.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut Vec<f64>, u: f64, rng: &mut R) {
        if u <= 0.0 {
            return;
        }
        if u >= self.mixing_time {
            *x = uniform_point(self.geom.ambient_dim(), rng);
            return;
        }
        let mut rest = u;
        for (level, sampler) in self.levels.iter().rev() {
            if rest >= *level {
                let theta = sampler.sample(rng);
                apply_jump(x, theta, rng);
                rest -= level;
            }
        }
        if rest > 0.0 {
            let sd = (2.0 * rest).sqrt();
            let mut v: Vec<f64> = (0..x.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect();
            let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            for (vi, xi) in v.iter_mut().zip(x.iter()) {
                *vi -= dot * xi;
            }
            let angle = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if angle > 0.0 {
                let (s, c) = angle.sin_cos();
                for (xi, vi) in x.iter_mut().zip(&v) {
                    *xi = c * *xi + s * vi / angle;
                }
                normalize(x);
            }
        }
    }
}

/// Draws colatitudes from the normalized finite Lévy measure `ν/|ν|`.
#[derive(Debug, Clone)]
struct JumpLaw {
    rate: f64,
    atoms: Vec<(f64, f64)>,
    uniform_mass: f64,
}

impl JumpLaw {
    fn new(model: &LevyModel) -> Option<Self> {
        let nu = model.levy_measure();
        let rate = nu.total_mass()?;
        let uniform_mass = match nu.family {
            DensityFamily::Uniform { c } => c * PI,
            _ => 0.0,
        };
        Some(Self {
            rate,
            atoms: nu.atoms.iter().map(|a| (a.theta, a.mass)).collect(),
            uniform_mass,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>() * self.rate;
        for &(theta, mass) in &self.atoms {
            if u < mass {
                return theta;
            }
            u -= mass;
        }
        if self.uniform_mass > 0.0 {
            return PI * (1.0 - rng.random::<f64>());
        }
        self.atoms.last().map(|a| a.0).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
enum EndpointMethod {
    /// One inverse-CDF draw from the series density at time `t`.
    Direct(ColatitudeSampler),
    /// Brownian displacement plus compound-Poisson jumps, at a possibly random time.
    Composed {
        stepper: Option<HeatStepper>,
        jumps: Option<JumpLaw>,
    },
}

/// Simulates `Y(t)` started at the pole.
#[derive(Debug, Clone)]
pub struct EndpointSimulator {
    model: LevyModel,
    psi: Option<BernsteinFunction>,
    t: f64,
    method: EndpointMethod,
}

impl EndpointSimulator {
    pub fn new(
        model: &LevyModel,
        psi: Option<&BernsteinFunction>,
        t: f64,
        grid: usize,
    ) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time t = {t} must be positive")));
        }
        let jumps = JumpLaw::new(model).filter(|j| j.rate > 0.0);
        let finite_jumps = model.levy_measure().total_mass().is_some();
        let method = if psi.is_none() && (model.levy_measure().is_zero() || !finite_jumps) {
            let series = KernelSeries::build(model, None, t, 1e-13)?;
            EndpointMethod::Direct(ColatitudeSampler::from_series(&series, grid, PI)?)
        } else if !finite_jumps {
            return Err(Error::Unsupported(
                "subordinating a process with infinitely many small jumps".into(),
            ));
        } else {
            let stepper = if model.diffusion() > 0.0 {
                Some(HeatStepper::new(*model.geom(), grid)?)
            } else {
                None
            };
            EndpointMethod::Composed { stepper, jumps }
        };
        Ok(Self {
            model: model.clone(),
            psi: psi.cloned(),
            t,
            method,
        })
    }

    pub fn geom(&self) -> &SphereGeometry {
        self.model.geom()
    }

    /// Endpoint after operational time `s` of the unsubordinated process.
    ///
    /// Bi-invariant increments commute in law, so the diffusion displacement for the
    /// whole interval can be applied before the jumps.
    pub fn endpoint_at<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> Vec<f64> {
        let mut x = north_pole(self.geom());
        match &self.method {
            EndpointMethod::Direct(sampler) => {
                let theta = sampler.sample(rng);
                apply_jump(&mut x, theta, rng);
            }
            EndpointMethod::Composed { stepper, jumps } => {
                if let Some(stepper) = stepper {
                    stepper.step(&mut x, self.model.diffusion() * s, rng);
                }
                if let Some(jumps) = jumps {
                    let count = poisson(jumps.rate * s, rng) as u64;
                    for _ in 0..count {
                        let theta = jumps.sample(rng);
                        apply_jump(&mut x, theta, rng);
                    }
                }
            }
        }
        x
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let s = match (&self.psi, &self.method) {
            (Some(psi), _) => sample_subordinator(psi, self.t, rng),
            (None, _) => self.t,
        };
        self.endpoint_at(s, rng)
    }
}

/// Endpoint of one replica drawn from stream `(seed, replica)`.
pub fn simulate_endpoint<R: Rng + ?Sized>(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(EndpointSimulator::new(model, psi, t, DEFAULT_THETA_GRID)?.simulate(rng))
}

/// Colatitudes of `samples` replicas, replica `i` using stream `(seed, i)`.
pub fn simulate_colatitudes(
    sim: &EndpointSimulator,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<f64>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(seed, i as u64).rng();
                colatitude(&sim.simulate(&mut rng))
            })
            .collect()
    }))
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// `sup |F_M − F|` acceptance band at sample size `m`: 1.5 × the 0.1% critical value 1.95/√M.
pub fn ks_band(m: usize) -> f64 {
    1.5 * 1.95 / (m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub n: usize,
    pub empirical: f64,
    pub expected: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Compares the sample mean of `p_n(cos Θ)` with `e^{−tχ'_n}` at a 4-standard-error band.
///
/// `exponents[n]` holds `χ'_n`; checks run for `1 ≤ n < exponents.len()`.
pub fn moment_checks(
    geom: &SphereGeometry,
    exponents: &[f64],
    t: f64,
    colatitudes: &[f64],
) -> Vec<MomentCheck> {
    let n_max = exponents.len().saturating_sub(1);
    let m = colatitudes.len() as f64;
    let mut sums = vec![KahanSum::default(); n_max + 1];
    let mut squares = vec![KahanSum::default(); n_max + 1];
    for &theta in colatitudes {
        let p = spherical_fn_all(geom, theta.cos(), n_max);
        for n in 0..=n_max {
            sums[n].add(p[n]);
            squares[n].add(p[n] * p[n]);
        }
    }
    (1..=n_max)
        .map(|n| {
            let mean = sums[n].value() / m;
            let var = (squares[n].value() / m - mean * mean).max(0.0) * m / (m - 1.0);
            let std_error = (var / m).sqrt();
            let expected = (-t * exponents[n]).exp();
            let z_score = if std_error > 0.0 {
                (mean - expected) / std_error
            } else {
                0.0
            };
            MomentCheck {
                n,
                empirical: mean,
                expected,
                std_error,
                z_score,
                pass: z_score.abs() <= 4.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnDensityEstimate {
    pub histogram: ColatHistogram,
    pub ks: f64,
    pub ks_band: f64,
    pub moments: Vec<MomentCheck>,
}

impl ReturnDensityEstimate {
    pub fn pass(&self) -> bool {
        self.ks <= self.ks_band && self.moments.iter().all(|m| m.pass)
    }
}

/// Settings for [`estimate_return_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub samples: usize,
    pub bins: usize,
    pub seed: u64,
    pub workers: usize,
    pub theta_grid: usize,
    pub eps: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            bins: 64,
            seed: 0,
            workers: 1,
            theta_grid: DEFAULT_THETA_GRID,
            eps: 1e-12,
        }
    }
}

/// Simulates endpoints and compares their colatitudes with the series law.
pub fn estimate_return_density(
    model: &LevyModel,
    psi: Option<&BernsteinFunction>,
    t: f64,
    config: &SimulationConfig,
) -> Result<ReturnDensityEstimate> {
    if config.samples < 1000 {
        return Err(Error::domain(format!(
            "at least 1000 samples are required, got {}",
            config.samples
        )));
    }
    let series = KernelSeries::build(model, psi, t, config.eps)?;
    let sim = EndpointSimulator::new(model, psi, t, config.theta_grid)?;
    let colats = simulate_colatitudes(&sim, config.samples, config.seed, config.workers)?;
    let mut histogram = ColatHistogram::new(config.bins)?;
    for &theta in &colats {
        histogram.add(theta);
    }
    let ks = ks_statistic(&colats, |th| series.colatitude_cdf(th));
    let exponents = effective_exponents(model, psi, 3)?;
    let moments = moment_checks(model.geom(), &exponents, t, &colats);
    Ok(ReturnDensityEstimate {
        histogram,
        ks,
        ks_band: ks_band(config.samples),
        moments,
    })
}
