//! Acceptance criteria. Run with `cargo test --test acceptance -- --nocapture` to see one
//! PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use isokernel::cli::load_model;
use isokernel::gelfand::run_testbed;
use isokernel::kernel::{ck_residual, funk_hecke_all, trace, CkPath, KernelSeries};
use isokernel::simulate::{estimate_return_density, sample_subordinator, RngStream, SimulationConfig};
use isokernel::special_fn::{spherical_dim_f64, spherical_fn, spherical_fn_all, SphereGeometry};
use isokernel::spectrum::{density_class, BernsteinFunction, DensityClass, DensityFamily, LevyMeasureSpec, LevyModel};
use isokernel::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn heat(d: usize) -> LevyModel {
    LevyModel::heat(SphereGeometry::new(d).unwrap(), 1.0).unwrap()
}

fn heat_trace_asymptotic() -> Outcome {
    let model = heat(3);
    let a = 0.01 * trace(&model, None, 0.01, 1e-14).unwrap().trace;
    let b = 0.001 * trace(&model, None, 0.001, 1e-14).unwrap().trace;
    let pass = (0.999..=1.005).contains(&a) && (0.999..=1.0005).contains(&b);
    outcome(pass, format!("t=0.01: {a:.6}, t=0.001: {b:.6}"))
}

fn subordinated_asymptotic() -> Outcome {
    let psi = BernsteinFunction::stable(0.5).unwrap();
    let t: f64 = 0.01;
    let v = trace(&heat(3), Some(&psi), t, 1e-14).unwrap().trace * t * t / 2.0;
    outcome((0.98..=1.02).contains(&v), format!("{v:.6}"))
}

fn trace_diagonal() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut failures = Vec::new();
    for path in &paths {
        let m = load_model(path).unwrap();
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        for t in [0.1, 0.5, 1.0] {
            match trace(&m.model, m.psi.as_ref(), t, 1e-10) {
                Ok(rep) => {
                    let gap = (rep.trace - rep.diagonal).abs();
                    // An uncertified cut has no bound; only rounding is allowed then.
                    let allowed = 2.0 * rep.tail_bound.unwrap_or(0.0) + 4.0 * f64::EPSILON * rep.trace;
                    worst = worst.max(gap / allowed);
                    checked += 1;
                    if gap > allowed {
                        failures.push(format!("{name} t={t}: gap {gap:e} > {allowed:e}"));
                    }
                }
                Err(Error::Divergence { .. }) => {}
                Err(e) => failures.push(format!("{name} t={t}: {e}")),
            }
        }
    }
    let heat = trace(&heat(3), None, 0.5, 1e-10).unwrap();
    let oracle: f64 = (0..200).map(|n| (2 * n + 1) as f64 * (-0.5 * (n * (n + 1)) as f64).exp()).sum();
    for (what, v) in [("trace", heat.trace), ("diagonal", heat.diagonal), ("oracle", oracle)] {
        if (v - 2.370337).abs() > 1e-5 {
            failures.push(format!("heat S² {what} {v}"));
        }
    }
    let detail = format!(
        "{checked} cases, worst gap/allowed {worst:.3}, heat S² {:.7}{}",
        heat.diagonal,
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    outcome(failures.is_empty(), detail)
}

fn funk_hecke_round_trip() -> Outcome {
    let mut worst = 0.0f64;
    for d in [3, 4, 5] {
        let g = SphereGeometry::new(d).unwrap();
        let models = [heat(d), LevyModel::new(g, 0.4, LevyMeasureSpec::atoms([(1.1, 1.5)])).unwrap()];
        for model in &models {
            let series = KernelSeries::build(model, None, 0.5, 1e-13).unwrap();
            let lambdas = funk_hecke_all(|s| series.eval(s), 8, &g, 256).unwrap();
            for (n, l) in lambdas.iter().enumerate() {
                worst = worst.max((l - (-0.5 * series.exponents[n]).exp()).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("max error {worst:.2e}"))
}

fn chapman_kolmogorov() -> Outcome {
    let angles: Vec<f64> = (0..11).map(|i| PI * i as f64 / 10.0).collect();
    let r = ck_residual(&heat(3), None, 0.25, 0.25, &angles, CkPath::Direct { order: 128 }).unwrap();
    outcome(r <= 1e-6, format!("residual {r:.2e}"))
}

fn classification() -> Outcome {
    let g = SphereGeometry::new(3).unwrap();
    let cp = LevyModel::new(g, 0.0, LevyMeasureSpec::atoms([(1.0, 2.0)])).unwrap();
    let power = LevyModel::new(
        g,
        0.0,
        LevyMeasureSpec::zero().with_family(DensityFamily::Power { c: 1.0, beta: 1.5 }),
    )
    .unwrap();
    let mut pass = true;
    let mut seen = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let a = density_class(&cp, None, t).unwrap();
        let b = density_class(&heat(3), None, t).unwrap();
        let c = density_class(&power, None, t).unwrap();
        pass &= a == DensityClass::NoSquareIntegrableDensity;
        pass &= b == DensityClass::Continuous;
        pass &= matches!(c, DensityClass::Continuous | DensityClass::NumericallyConvergent(_));
        if t == 0.5 {
            seen = vec![format!("{a:?}"), format!("{b:?}"), format!("{c:?}")];
        }
    }
    outcome(pass, format!("compound Poisson {}, heat {}, power {}", seen[0], seen[1], seen[2]))
}

fn monte_carlo() -> Outcome {
    let config = SimulationConfig { samples: 100_000, seed: 2024, workers: 1, ..Default::default() };
    let psi = BernsteinFunction::stable(0.5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, p) in [("heat", None), ("stable(0.5)", Some(&psi))] {
        let est = estimate_return_density(&heat(3), p, 0.5, &config).unwrap();
        let z: Vec<String> = est.moments.iter().map(|m| format!("{:.2}", m.z_score)).collect();
        pass &= est.ks <= 0.012 && est.moments.len() == 3 && est.moments.iter().all(|m| m.z_score.abs() <= 4.0);
        parts.push(format!("{label}: KS {:.4}, z [{}]", est.ks, z.join(", ")));
    }
    outcome(pass, parts.join("; "))
}

fn laplace_property() -> Outcome {
    let subs = [
        ("stable(0.5)", BernsteinFunction::stable(0.5).unwrap()),
        ("drift_cp", BernsteinFunction::drift_cp(0.5, vec![(0.2, 3.0), (1.0, 1.0)]).unwrap()),
    ];
    let t = 1.0;
    let mut worst = 0.0f64;
    for (i, (_, psi)) in subs.iter().enumerate() {
        let mut rng = RngStream::new(7, i as u64).rng();
        let draws: Vec<f64> = (0..100_000).map(|_| sample_subordinator(psi, t, &mut rng)).collect();
        for u in [0.5, 1.0, 2.0] {
            let emp = draws.iter().map(|s| (-u * s).exp()).sum::<f64>() / draws.len() as f64;
            worst = worst.max((emp - (-t * psi.eval(u)).exp()).abs());
        }
    }
    outcome(worst <= 0.005, format!("max deviation {worst:.4}"))
}

fn gelfand_testbed() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [6, 8] {
        let rep = run_testbed(m, 100, 99).unwrap();
        let checks: u64 = rep.clauses.values().map(|c| c.pass + c.fail).sum();
        pass &= rep.pass() && rep.clauses.values().all(|c| c.fail == 0);
        parts.push(match &rep.first_failure {
            None => format!("D{m}: {checks} checks"),
            Some(f) => format!("D{m}: {f}"),
        });
    }
    outcome(pass, parts.join("; "))
}

/// `P_n(cos θ) = Σ_k a_k a_{n−k} cos((n − 2k)θ)` with `a_k = C(2k, k)/4^k`.
fn legendre(n: usize, theta: f64) -> f64 {
    let a: Vec<f64> = (0..=n)
        .map(|k| (0..k).fold(1.0, |acc, i| acc * (2 * k - i) as f64 / (i + 1) as f64) / 4f64.powi(k as i32))
        .collect();
    (0..=n).map(|k| a[k] * a[n - k] * ((n as f64 - 2.0 * k as f64) * theta).cos()).sum()
}

fn special_functions() -> Outcome {
    let g3 = SphereGeometry::new(3).unwrap();
    let mut legendre_err = 0.0f64;
    for n in 0..=20 {
        for j in 0..=200 {
            let theta = PI * j as f64 / 200.0;
            legendre_err = legendre_err.max((spherical_fn(n, &g3, theta.cos()).unwrap() - legendre(n, theta)).abs());
        }
    }
    let mut pole = true;
    let mut orth_err = 0.0f64;
    for d in [3, 4, 5] {
        let g = SphereGeometry::new(d).unwrap();
        pole &= (0..=20).all(|n| spherical_fn(n, &g, 1.0).unwrap() == 1.0);
        let steps = 20_000;
        let h = PI / steps as f64;
        let mut gram = vec![vec![0.0; 21]; 21];
        for i in 0..=steps {
            let theta = i as f64 * h;
            let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let w = w * h / 3.0 * theta.sin().powi(d as i32 - 2) * g.weight_const();
            let p = spherical_fn_all(&g, theta.cos(), 20);
            for n in 0..=20 {
                for m in 0..=20 {
                    gram[n][m] += w * p[n] * p[m];
                }
            }
        }
        for n in 0..=20 {
            for m in 0..=20 {
                let want = if n == m { 1.0 / spherical_dim_f64(n, &g) } else { 0.0 };
                orth_err = orth_err.max((gram[n][m] - want).abs());
            }
        }
    }
    let pass = legendre_err <= 1e-12 && pole && orth_err <= 1e-10;
    outcome(
        pass,
        format!("Legendre {legendre_err:.1e}, p(1)=1 {pole}, orthogonality {orth_err:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("heat trace asymptotic", heat_trace_asymptotic, Some(Duration::from_secs(1))),
        ("subordinated asymptotic", subordinated_asymptotic, Some(Duration::from_secs(1))),
        ("trace equals diagonal", trace_diagonal, None),
        ("Funk-Hecke round trip", funk_hecke_round_trip, Some(Duration::from_secs(5))),
        ("Chapman-Kolmogorov", chapman_kolmogorov, Some(Duration::from_secs(10))),
        ("density classification", classification, None),
        ("Monte Carlo law", monte_carlo, Some(Duration::from_secs(60))),
        ("subordinator Laplace transform", laplace_property, None),
        ("finite Gelfand pair", gelfand_testbed, Some(Duration::from_secs(10))),
        ("special functions", special_functions, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = out.pass && in_time;
        let budget = limit.map(|l| format!(" / {} s", l.as_secs())).unwrap_or_default();
        println!(
            "{} {:>2} {name}: {} [{:.3} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
