//! Command-line front end: model files, subcommands, CSV/JSON output and exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::model_prediction;
use crate::error::{Error, Result};
use crate::gelfand::run_testbed;
use crate::kernel::{funk_hecke_all, KernelSeries, TabulatedKernel, TraceReport};
use crate::simulate::{estimate_return_density, MomentCheck, SimulationConfig};
use crate::special_fn::{quadrature, spherical_dim, SphereGeometry};
use crate::spectrum::{
    build_table, BernsteinFunction, DensityFamily, LevyMeasureSpec, LevyModel,
};

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const INTEGRABILITY: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
    pub const STATISTICAL: i32 = 5;
    pub const TESTBED: i32 = 6;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Domain(_) => exit::PARSE,
        Error::Integrability(_) => exit::INTEGRABILITY,
        Error::Divergence { .. } => exit::DIVERGENCE,
        _ => exit::OTHER,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub theta: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilyFile {
    #[default]
    None,
    Uniform {
        c: f64,
    },
    Power {
        c: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyMeasureFile {
    #[serde(default)]
    pub atoms: Vec<AtomFile>,
    #[serde(default)]
    pub family: FamilyFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauAtomFile {
    pub y: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubordinatorFile {
    Identity,
    Stable {
        alpha: f64,
    },
    DriftCp {
        #[serde(default)]
        b: f64,
        #[serde(default)]
        tau_atoms: Vec<TauAtomFile>,
    },
}

fn default_order() -> usize {
    256
}
fn default_eps() -> f64 {
    1e-10
}
fn default_grid() -> usize {
    2048
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsFile {
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_grid")]
    pub theta_grid: usize,
}

impl Default for NumericsFile {
    fn default() -> Self {
        Self {
            quadrature_order: default_order(),
            eps: default_eps(),
            theta_grid: default_grid(),
        }
    }
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dimension: usize,
    pub diffusion: f64,
    #[serde(default)]
    pub levy_measure: LevyMeasureFile,
    #[serde(default)]
    pub subordinator: Option<SubordinatorFile>,
    #[serde(default)]
    pub numerics: NumericsFile,
}

/// A parsed and validated model file.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub file: ModelFile,
    pub model: LevyModel,
    pub psi: Option<BernsteinFunction>,
}

impl LoadedModel {
    /// SHA-256 of the canonical re-serialization of the file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.file).unwrap_or_default();
        Sha256::digest(canonical.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

fn field_error(field: &str, err: Error) -> Error {
    match err {
        Error::Domain(msg) => Error::Parse(format!("{field}: {msg}")),
        other => other,
    }
}

pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("{path}: {}", e.inner()))
    })?;
    let geom = SphereGeometry::new(file.dimension).map_err(|e| field_error("dimension", e))?;
    let family = match file.levy_measure.family {
        FamilyFile::None => DensityFamily::None,
        FamilyFile::Uniform { c } => DensityFamily::Uniform { c },
        FamilyFile::Power { c, beta } => DensityFamily::Power { c, beta },
    };
    let nu = LevyMeasureSpec::atoms(file.levy_measure.atoms.iter().map(|a| (a.theta, a.mass)))
        .with_family(family);
    let model = LevyModel::new(geom, file.diffusion, nu).map_err(|e| match e {
        Error::Domain(msg) => Error::Parse(msg),
        other => other,
    })?;
    let psi = match &file.subordinator {
        None => None,
        Some(SubordinatorFile::Identity) => Some(BernsteinFunction::identity()),
        Some(SubordinatorFile::Stable { alpha }) => Some(
            BernsteinFunction::stable(*alpha).map_err(|e| field_error("subordinator.alpha", e))?,
        ),
        Some(SubordinatorFile::DriftCp { b, tau_atoms }) => Some(
            BernsteinFunction::drift_cp(*b, tau_atoms.iter().map(|a| (a.y, a.mass)).collect())
                .map_err(|e| field_error("subordinator", e))?,
        ),
    };
    let n = &file.numerics;
    if n.quadrature_order < 2 {
        return Err(Error::Parse("numerics.quadrature_order: must be at least 2".into()));
    }
    if !(n.eps > 0.0 && n.eps < 1.0) {
        return Err(Error::Parse("numerics.eps: must lie in (0, 1)".into()));
    }
    if n.theta_grid < 2 {
        return Err(Error::Parse("numerics.theta_grid: must be at least 2".into()));
    }
    Ok(LoadedModel { file, model, psi })
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

/// Shortest round-trip decimal, switching to exponent form for very large or small magnitudes.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("t = {t} must be positive")))
    }
}

/// Result of one command: what to print and how to exit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CmdOutput {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl CmdOutput {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            stderr: String::new(),
            code: exit::OK,
        }
    }

    fn from_error(err: &Error) -> Self {
        Self {
            stdout: String::new(),
            stderr: format!("error: {err}\n"),
            code: exit_code(err),
        }
    }
}

pub fn cmd_spectrum(model: &Path, n_max: usize, t: f64) -> Result<String> {
    check_time(t)?;
    let m = load_model(model)?;
    let table = build_table(&m.model, n_max)?;
    let geom = m.model.geom();
    let mut out = String::from("n,d_n,kappa_n,chi_n,coeff\n");
    for e in &table.entries {
        let eff = m.psi.as_ref().map_or(e.chi, |p| p.eval(e.chi));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.n,
            spherical_dim(e.n, geom),
            fmt_num(e.kappa),
            fmt_num(e.chi),
            fmt_num(e.dim * (-t * eff).exp())
        );
    }
    Ok(out)
}

pub fn cmd_kernel(model: &Path, t: f64, angles: usize, volume_normalized: bool) -> Result<String> {
    check_time(t)?;
    if angles < 2 {
        return Err(Error::domain("at least two angles are required"));
    }
    let m = load_model(model)?;
    let series = KernelSeries::build(&m.model, m.psi.as_ref(), t, m.file.numerics.eps)?;
    let geom = m.model.geom();
    let rule = quadrature(geom, m.file.numerics.quadrature_order)?;
    let mass = rule.integrate_alpha(geom, |s| series.eval(s));
    let scale = if volume_normalized { 1.0 / geom.volume() } else { 1.0 };
    let thetas: Vec<f64> = (0..angles)
        .map(|j| std::f64::consts::PI * j as f64 / (angles - 1) as f64)
        .collect();
    let mut out = String::from("theta,cos_theta,density\n");
    for th in thetas {
        let s = th.cos();
        let _ = writeln!(out, "{},{},{}", fmt_num(th), fmt_num(s), fmt_num(scale * series.eval(s)));
    }
    let _ = writeln!(out, "# mass={}", fmt_num(mass));
    Ok(out)
}

pub fn cmd_trace(model: &Path, t_grid: &[f64]) -> Result<String> {
    let m = load_model(model)?;
    let mut out = String::from("t,trace,trace_K,diagonal,asym,ratio\n");
    for &t in t_grid {
        check_time(t)?;
        let series = KernelSeries::build(&m.model, m.psi.as_ref(), t, m.file.numerics.eps)?;
        let rep = TraceReport::from_series(&series);
        let asym = model_prediction(&m.model, m.psi.as_ref(), t).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(t),
            fmt_num(rep.trace),
            fmt_num(rep.trace_k),
            fmt_num(rep.diagonal),
            fmt_num(asym),
            fmt_num(rep.diagonal / asym)
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub model_hash: String,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub ks: f64,
    pub ks_band: f64,
    pub moments: Vec<MomentCheck>,
    pub pass: bool,
}

/// Runs the simulation; returns the JSON summary, the histogram CSV and the pass flag.
pub fn cmd_simulate(
    model: &Path,
    t: f64,
    samples: usize,
    bins: usize,
    seed: u64,
    workers: usize,
) -> Result<(String, String, bool)> {
    check_time(t)?;
    let m = load_model(model)?;
    let config = SimulationConfig {
        samples,
        bins,
        seed,
        workers,
        theta_grid: m.file.numerics.theta_grid,
        eps: m.file.numerics.eps.min(1e-12),
    };
    let est = estimate_return_density(&m.model, m.psi.as_ref(), t, &config)?;
    let pass = est.pass();
    let summary = SimulationSummary {
        model_hash: m.hash(),
        t,
        samples,
        seed,
        ks: est.ks,
        ks_band: est.ks_band,
        moments: est.moments,
        pass,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numerical(format!("serializing summary: {e}")))?;
    let mut csv = String::from("theta_lo,theta_hi,count\n");
    let h = &est.histogram;
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", fmt_num(h.edges[i]), fmt_num(h.edges[i + 1]), c);
    }
    Ok((json + "\n", csv, pass))
}

pub fn cmd_testbed(m: usize, trials: usize, seed: u64) -> Result<(String, Option<String>)> {
    let report = run_testbed(m, trials, seed)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Numerical(format!("serializing report: {e}")))?;
    Ok((json + "\n", report.first_failure))
}

/// Reads `(cos_theta, value)` pairs from a CSV with a header naming a `cos_theta` column and a
/// `value` or `density` column. Lines starting with `#` are ignored.
pub fn read_kernel_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty kernel CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |names: &[&str]| header.iter().position(|h| names.contains(h));
    let s_col = col(&["cos_theta"])
        .ok_or_else(|| Error::Parse("kernel CSV header lacks a cos_theta column".into()))?;
    let v_col = col(&["value", "density"])
        .ok_or_else(|| Error::Parse("kernel CSV header lacks a value or density column".into()))?;
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {c}", i + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))
        };
        points.push((get(s_col)?, get(v_col)?));
    }
    if points.len() < 2 {
        return Err(Error::Parse("kernel CSV needs at least two rows".into()));
    }
    Ok(points)
}

pub fn cmd_funk_hecke(csv: &Path, n_max: usize, dimension: usize, order: usize) -> Result<String> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| Error::Parse(format!("{}: {e}", csv.display())))?;
    let kernel = TabulatedKernel::new(read_kernel_csv(&text)?).map_err(|e| match e {
        Error::Domain(msg) => Error::Parse(msg),
        other => other,
    })?;
    let geom = SphereGeometry::new(dimension)?;
    let lambdas = funk_hecke_all(|s| kernel.eval(s), n_max, &geom, order)?;
    let mut out = String::from("n,lambda_n\n");
    for (n, l) in lambdas.iter().enumerate() {
        let _ = writeln!(out, "{n},{}", fmt_num(*l));
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "isokernel", version, about = "Spectral kernels and simulation for isotropic Lévy processes on spheres")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum table: n, d_n, κ_n, χ_n and d_n e^{−tχ'_n}.
    Spectrum {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Transition density on an equally spaced colatitude grid.
    Kernel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 181)]
        angles: usize,
        /// Report density with respect to Riemannian volume instead of normalized measure.
        #[arg(long)]
        volume_normalized: bool,
    },
    /// Trace, zonal trace, diagonal and short-time prediction on a grid of times.
    Trace {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// Monte-Carlo endpoints compared with the series law.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        #[arg(long, env = "ISOKERNEL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Where to write the histogram CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Exact checks on the dihedral Gelfand pair (D_m, {e, s}).
    Testbed {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, env = "ISOKERNEL_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Funk–Hecke eigenvalues of a tabulated zonal kernel.
    FunkHecke {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        dimension: usize,
        #[arg(long, default_value_t = 256)]
        order: usize,
    },
}

pub fn run(cli: Cli) -> CmdOutput {
    let wrap = |r: Result<String>| match r {
        Ok(s) => CmdOutput::ok(s),
        Err(e) => CmdOutput::from_error(&e),
    };
    match cli.command {
        Command::Spectrum { model, n_max, t } => wrap(cmd_spectrum(&model, n_max, t)),
        Command::Kernel {
            model,
            t,
            angles,
            volume_normalized,
        } => wrap(cmd_kernel(&model, t, angles, volume_normalized)),
        Command::Trace { model, t } => wrap(cmd_trace(&model, &t)),
        Command::Simulate {
            model,
            t,
            samples,
            bins,
            seed,
            workers,
            histogram,
        } => match cmd_simulate(&model, t, samples, bins, seed, workers) {
            Ok((json, csv, pass)) => {
                let mut out = CmdOutput::ok(json);
                if let Some(path) = histogram {
                    if let Err(e) = std::fs::write(&path, csv) {
                        out.stderr = format!("error: writing {}: {e}\n", path.display());
                        out.code = exit::OTHER;
                        return out;
                    }
                }
                if !pass {
                    out.stderr = "statistical check failed\n".into();
                    out.code = exit::STATISTICAL;
                }
                out
            }
            Err(e) => CmdOutput::from_error(&e),
        },
        Command::Testbed { m, trials, seed } => match cmd_testbed(m, trials, seed) {
            Ok((json, None)) => CmdOutput::ok(json),
            Ok((json, Some(failure))) => CmdOutput {
                stdout: json,
                stderr: format!("first failing clause: {failure}\n"),
                code: exit::TESTBED,
            },
            Err(e) => CmdOutput::from_error(&e),
        },
        Command::FunkHecke {
            csv,
            n_max,
            dimension,
            order,
        } => wrap(cmd_funk_hecke(&csv, n_max, dimension, order)),
    }
}
