use std::f64::consts::PI;
use std::path::PathBuf;

use isokernel::asymptotics::{asym_ratio_curve, heat_asym};
use isokernel::cli::load_model;
use isokernel::kernel::*;
use isokernel::special_fn::{quadrature, SphereGeometry};
use isokernel::spectrum::{BernsteinFunction, DensityFamily, LevyMeasureSpec, LevyModel};
use isokernel::Error;
use proptest::prelude::*;

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn heat(d: usize, a: f64) -> LevyModel {
    LevyModel::heat(SphereGeometry::new(d).unwrap(), a).unwrap()
}

#[test]
fn heat_two_sphere_partial_sum_oracle() {
    let oracle: f64 = (0..200)
        .map(|n| (2 * n + 1) as f64 * (-0.5 * (n * (n + 1)) as f64).exp())
        .sum();
    let rep = trace(&heat(3, 1.0), None, 0.5, 1e-12).unwrap();
    assert!((rep.trace - oracle).abs() < 1e-13);
    assert!((rep.diagonal - oracle).abs() < 1e-13);
    assert!((rep.diagonal - 2.370337).abs() < 1e-5);
}

#[test]
fn trace_equals_diagonal_for_shipped_models() {
    let mut checked = 0;
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let m = load_model(&entry.unwrap().path()).unwrap();
        for t in [0.1, 0.5, 1.0] {
            match trace(&m.model, m.psi.as_ref(), t, 1e-10) {
                Ok(rep) => {
                    let allowed = match rep.tail_bound {
                        Some(b) => 2.0 * b + 1e-12 * rep.trace,
                        None => 1e-12 * rep.trace,
                    };
                    assert!((rep.trace - rep.diagonal).abs() <= allowed, "{rep:?}");
                    checked += 1;
                }
                Err(Error::Divergence { verdict }) => assert_eq!(verdict, "NoSquareIntegrableDensity"),
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(checked >= 18);
}

#[test]
fn certified_bound_dominates_true_tail() {
    let psi = BernsteinFunction::stable(0.7).unwrap();
    let model = heat(4, 0.6);
    for t in [0.05, 0.3] {
        let cut = truncation_level(&model, Some(&psi), t, 1e-9).unwrap();
        let far = KernelSeries::with_truncation(
            &model,
            Some(&psi),
            t,
            Truncation { n_max: cut.n_max + 2000, tail_bound: None },
        )
        .unwrap();
        let tail: f64 = far.coeffs[cut.n_max + 1..].iter().sum();
        let bound = cut.tail_bound.unwrap();
        assert!(tail <= bound && bound <= 1e-9, "tail {tail}, bound {bound}");
    }
}

#[test]
fn funk_hecke_recovers_coefficients() {
    for d in [3, 4, 5] {
        let g = SphereGeometry::new(d).unwrap();
        let models = [
            heat(d, 1.0),
            LevyModel::new(g, 0.4, LevyMeasureSpec::atoms([(1.1, 1.5)])).unwrap(),
        ];
        for model in &models {
            for t in [0.1, 0.5] {
                let series = KernelSeries::build(model, None, t, 1e-13).unwrap();
                let lambdas = funk_hecke_all(|s| series.eval(s), 8, &g, 256).unwrap();
                for (n, l) in lambdas.iter().enumerate() {
                    let want = (-t * series.exponents[n]).exp();
                    assert!((l - want).abs() < 1e-9, "d={d} t={t} n={n}: {l} vs {want}");
                }
            }
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    let angles: Vec<f64> = (0..11).map(|i| PI * i as f64 / 10.0).collect();
    let model = heat(3, 1.0);
    let direct = ck_residual(&model, None, 0.25, 0.25, &angles, CkPath::Direct { order: 128 }).unwrap();
    assert!(direct <= 1e-6, "{direct}");
    let psi = BernsteinFunction::stable(0.5).unwrap();
    for d in [3, 5] {
        let spectral = ck_residual(&heat(d, 1.0), Some(&psi), 0.2, 0.3, &angles, CkPath::Spectral).unwrap();
        assert!(spectral <= 1e-10);
    }
    assert!(ck_residual(&heat(4, 1.0), None, 0.25, 0.25, &angles, CkPath::Direct { order: 64 }).is_err());
}

#[test]
fn infeasible_certified_cut_fails_fast() {
    // e^{−t χ^{0.1}} with t = 10^{-3} needs far more than the term cap.
    let psi = BernsteinFunction::stable(0.1).unwrap();
    let start = std::time::Instant::now();
    let err = truncation_level(&heat(6, 1.0), Some(&psi), 1e-3, 1e-10).unwrap_err();
    assert!(matches!(err, Error::Numerical(_)), "{err}");
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let cut = truncation_level(&heat(3, 1.0), None, 0.5, 1e-10).unwrap();
    let slack = truncation_level(&heat(3, 1.0), None, 0.5, 1e-10 * 1.0001).unwrap();
    assert!(slack.n_max <= cut.n_max && cut.n_max <= 12);
}

#[test]
fn kernel_is_a_probability_density() {
    let g = SphereGeometry::new(4).unwrap();
    let rule = quadrature(&g, 256).unwrap();
    let nu = LevyMeasureSpec::atoms([(0.7, 1.0)]).with_family(DensityFamily::Power { c: 0.3, beta: 1.2 });
    let model = LevyModel::new(g, 0.5, nu).unwrap();
    let psi = BernsteinFunction::drift_cp(0.2, vec![(0.5, 2.0)]).unwrap();
    for (p, t) in [(None, 0.2), (Some(&psi), 0.4)] {
        let series = KernelSeries::build(&model, p, t, 1e-12).unwrap();
        let mass = rule.integrate_alpha(&g, |s| series.eval(s));
        assert!((mass - 1.0).abs() < 1e-8);
        for j in 0..=50 {
            assert!(series.eval((PI * j as f64 / 50.0).cos()) > -1e-10);
        }
    }
}

#[test]
fn long_time_kernel_is_flat() {
    let series = KernelSeries::build(&heat(3, 1.0), None, 30.0, 1e-10).unwrap();
    assert_eq!(series.n_max, 0);
    for s in [-1.0, 0.0, 0.3, 1.0] {
        assert!((series.eval(s) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn volume_normalization() {
    let g = SphereGeometry::new(3).unwrap();
    let series = KernelSeries::build(&heat(3, 1.0), None, 0.5, 1e-12).unwrap();
    for s in [-0.5, 0.2, 1.0] {
        assert!((series.eval_volume_normalized(s) * g.volume() - series.eval(s)).abs() < 1e-14);
    }
}

#[test]
fn colatitude_cdf_integrates_density() {
    for d in [3, 4, 6] {
        let series = KernelSeries::build(&heat(d, 0.7), None, 0.15, 1e-13).unwrap();
        assert!(series.colatitude_cdf(0.0).abs() < 1e-14);
        assert!((series.colatitude_cdf(PI) - 1.0).abs() < 1e-12);
        let h = 1e-5;
        for j in 1..20 {
            let th = PI * j as f64 / 20.0;
            let fd = (series.colatitude_cdf(th + h) - series.colatitude_cdf(th - h)) / (2.0 * h);
            assert!((fd - series.colatitude_density(th)).abs() < 1e-6, "d={d} θ={th}");
        }
    }
}

#[test]
fn identity_subordinator_is_heat() {
    let model = heat(5, 0.9);
    let id = BernsteinFunction::identity();
    let a = KernelSeries::build(&model, None, 0.3, 1e-12).unwrap();
    let b = KernelSeries::build(&model, Some(&id), 0.3, 1e-12).unwrap();
    for s in [-1.0, -0.3, 0.4, 1.0] {
        assert!((a.eval(s) - b.eval(s)).abs() < 1e-13);
    }
}

#[test]
fn tabulated_kernel_round_trip() {
    let series = KernelSeries::build(&heat(3, 1.0), None, 0.5, 1e-12).unwrap();
    let pts: Vec<(f64, f64)> = (0..=200)
        .map(|j| {
            let s = (PI * j as f64 / 200.0).cos();
            (s, series.eval(s))
        })
        .collect();
    let tab = TabulatedKernel::new(pts).unwrap();
    let g = SphereGeometry::new(3).unwrap();
    let lambdas = funk_hecke_all(|s| tab.eval(s), 6, &g, 256).unwrap();
    for (n, l) in lambdas.iter().enumerate() {
        assert!((l - (-0.5 * (n * (n + 1)) as f64).exp()).abs() < 1e-6);
    }
}

#[test]
fn short_time_ratios_approach_one() {
    let model = heat(3, 1.0);
    let rows = asym_ratio_curve(&model, None, &[0.1, 0.01, 0.001]).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(gaps[2] < 5e-4);
    // Diffusion rescales time.
    let slow = asym_ratio_curve(&heat(4, 0.5), None, &[0.004]).unwrap();
    assert!((slow[0].prediction - heat_asym(&SphereGeometry::new(4).unwrap(), 0.002)).abs() < 1e-9);
    assert!((slow[0].ratio - 1.0).abs() < 0.01);
    let psi = BernsteinFunction::stable(0.5).unwrap();
    let st = asym_ratio_curve(&model, Some(&psi), &[0.01]).unwrap();
    assert!((st[0].ratio - 1.0).abs() < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_one_for_random_jump_diffusions(
        d in 3usize..7,
        a in 0.05f64..2.0,
        theta in 0.1f64..3.0,
        mass in 0.0f64..3.0,
        t in 0.05f64..2.0,
    ) {
        let g = SphereGeometry::new(d).unwrap();
        let nu = if mass > 0.0 { LevyMeasureSpec::atoms([(theta, mass)]) } else { LevyMeasureSpec::zero() };
        let model = LevyModel::new(g, a, nu).unwrap();
        let series = KernelSeries::build(&model, None, t, 1e-11).unwrap();
        let rule = quadrature(&g, 256).unwrap();
        prop_assert!((rule.integrate_alpha(&g, |s| series.eval(s)) - 1.0).abs() < 1e-8);
        let rep = TraceReport::from_series(&series);
        prop_assert!(rep.trace >= rep.trace_k && rep.trace_k >= 1.0);
    }

    #[test]
    fn semigroup_in_time(d in 3usize..7, s in 0.05f64..1.0, t in 0.05f64..1.0, alpha in 0.4f64..1.0) {
        let psi = BernsteinFunction::stable(alpha).unwrap();
        let model = heat(d, 1.0);
        let r = ck_residual(&model, Some(&psi), s, t, &[0.0, 1.0], CkPath::Spectral).unwrap();
        prop_assert!(r <= 1e-9);
    }
}
