mod common;

use simes::dependence::equicorrelated;
use simes::dist::normal_cdf;
use simes::orderstats::noncrossing_probability;
use simes::samplers::Family;
use simes::verify::{
    explore_generalized_t, verify, verify_inequality, verify_theorem31, BoundaryMode, CheckKind,
    Correlation, ExperimentConfig, Side, VerificationReport,
};
use simes::Error;

fn config(family: Family, n: usize, rho: f64, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(family, n, 0.05, seed);
    c.correlation = Correlation::Equicorrelated { rho };
    c
}

fn within(r: &VerificationReport, target: f64, ses: f64) -> bool {
    let se = (target * (1.0 - target) / r.config.reps as f64).sqrt();
    (r.estimate - target).abs() <= ses * se
}

#[test]
fn independence_matches_exact_value() {
    for n in [1, 4, 12] {
        let r = verify_inequality(&config(Family::Normal, n, 0.0, 3)).unwrap();
        assert!(r.pass);
        assert!((r.bound - 0.95).abs() < 1e-12);
        let exact = r.independent_exact.unwrap();
        assert!((exact - 0.95).abs() < 1e-9);
        assert!(within(&r, exact, 3.0), "n={n}: {}", r.estimate);
        assert_eq!(r.accepted as f64 / r.config.reps as f64, r.estimate);
        assert!((r.std_error - (r.estimate * (1.0 - r.estimate) / 1e5).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn positive_dependence_passes() {
    let r = verify_inequality(&config(Family::Normal, 10, 0.5, 11)).unwrap();
    assert!(r.pass);
    assert!(r.independent_exact.is_none());
    let z = r.z_margin.unwrap();
    assert!((z - (r.estimate - r.bound) / r.std_error).abs() < 1e-12);
}

#[test]
fn upper_and_absolute_sides() {
    let mut c = config(Family::Normal, 6, 0.0, 5);
    c.side = Side::UpperTailB;
    let r = verify_inequality(&c).unwrap();
    assert!((r.bound - 0.95).abs() < 1e-10);
    assert!((r.independent_exact.unwrap() - 0.95).abs() < 1e-9);
    assert!(r.pass && within(&r, 0.95, 3.0));
    assert!(r.thresholds.iter().all(|&b| b > 0.0));

    let mut c = config(Family::AbsNormal, 6, 0.6, 5);
    c.side = Side::Absolute;
    let r = verify_inequality(&c).unwrap();
    assert!((r.bound - 0.95).abs() < 1e-10);
    assert!(r.pass);

    let mut c = config(Family::Normal, 6, 0.6, 5);
    c.side = Side::Absolute;
    assert!(verify_inequality(&c).is_err());
}

#[test]
fn generalized_bound_is_one_minus_alpha() {
    for k in [2, 3] {
        let mut c = config(Family::Normal, 8, 0.4, 9);
        c.k = k;
        c.mode = BoundaryMode::Generalized;
        c.reps = 40_000;
        let r = verify_inequality(&c).unwrap();
        assert!((r.bound - 0.95).abs() < 1e-8);
        assert_eq!(r.thresholds.len(), 8 - k + 1);
        assert!(r.pass);
    }
}

#[test]
fn single_variable() {
    let mut c = config(Family::Normal, 1, 0.0, 1);
    c.mode = BoundaryMode::Custom;
    c.boundary = Some(vec![-0.5]);
    let r = verify_inequality(&c).unwrap();
    let exact = 1.0 - normal_cdf(-0.5);
    assert!((r.bound - exact).abs() < 1e-12);
    assert!(within(&r, exact, 3.0));
}

#[test]
fn multivariate_t_case_i() {
    let mut c = config(Family::T, 8, 0.4, 21);
    c.nu = Some(5);
    let r = verify_theorem31(&c).unwrap();
    assert_eq!(r.check, CheckKind::Theorem31T);
    assert!(r.pass);
    assert!(r.thresholds.iter().all(|&a| a <= 0.0));
}

#[test]
fn sign_balance_failure_stops_before_sampling() {
    let mut c = config(Family::AbsT, 3, -0.3, 1);
    c.nu = Some(5);
    c.side = Side::Absolute;
    match verify_theorem31(&c) {
        Err(Error::Precondition(m)) => assert!(m.contains("signature"), "{m}"),
        other => panic!("expected a precondition error, got {other:?}"),
    }
    let mut c = config(Family::T, 3, -0.3, 1);
    c.nu = Some(5);
    assert!(matches!(verify_theorem31(&c), Err(Error::Precondition(_))));
}

#[test]
fn t_hypothesis_is_enforced() {
    let mut c = config(Family::T, 3, 0.2, 1);
    c.nu = Some(5);
    c.mode = BoundaryMode::Custom;
    c.boundary = Some(vec![-1.0, -0.5, 0.3]);
    assert!(verify(&c).is_err());
    c.boundary = Some(vec![-3.0, -2.0, -1.5]);
    assert!(verify(&c).is_ok());
}

#[test]
fn large_nu_tracks_the_normal_model() {
    let normal = verify_inequality(&config(Family::Normal, 8, 0.4, 33)).unwrap();
    let mut c = config(Family::T, 8, 0.4, 33);
    c.nu = Some(10_000);
    let t = verify_theorem31(&c).unwrap();
    assert!((t.estimate - normal.estimate).abs() <= 3.0 * normal.std_error);
}

/// `E_Z[P_iid(a·Z)]` with `Z ~ χ_ν/√ν`, by adaptive quadrature over `Z`.
fn studentized_iid_value(lower: &[f64], k: usize, n: usize, nu: u32) -> f64 {
    let nuf = nu as f64;
    let ln_c = std::f64::consts::LN_2 + 0.5 * nuf * (0.5 * nuf).ln()
        - statrs::function::gamma::ln_gamma(0.5 * nuf);
    let density = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        (ln_c + (nuf - 1.0) * z.ln() - 0.5 * nuf * z * z).exp()
    };
    let f = |z: f64| {
        let mut c = vec![0.0; n];
        for (j, a) in lower.iter().enumerate() {
            c[k - 1 + j] = normal_cdf(a * z);
        }
        density(z) * noncrossing_probability(&c).unwrap()
    };
    common::adaptive_simpson(&f, 0.0, 8.0, 1e-12)
}

#[test]
fn exploratory_generalized_t() {
    let mut c = config(Family::T, 6, 0.0, 8);
    c.nu = Some(5);
    c.k = 2;
    c.mode = BoundaryMode::Generalized;
    let r = explore_generalized_t(&c).unwrap();
    assert!(r.exploratory);
    assert_eq!(r.check, CheckKind::GeneralizedT);
    let oracle = studentized_iid_value(&r.thresholds, 2, 6, 5);
    assert!((r.independent_exact.unwrap() - oracle).abs() < 1e-7);
    assert!(within(&r, oracle, 3.0), "{} vs {oracle}", r.estimate);

    c.correlation = Correlation::Equicorrelated { rho: 0.5 };
    let r = verify(&c).unwrap();
    assert!(r.exploratory);

    c.k = 1;
    c.mode = BoundaryMode::Simes;
    assert!(explore_generalized_t(&c).is_err());
    assert_eq!(verify(&c).unwrap().check, CheckKind::Theorem31T);
}

#[test]
fn independent_runs_are_consistent() {
    let mut inside = 0;
    for seed in 0..100 {
        let mut c = config(Family::Normal, 5, 0.0, 1000 + seed);
        c.reps = 4000;
        let r = verify_inequality(&c).unwrap();
        if within(&r, r.independent_exact.unwrap(), 4.0) {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside}");
}

#[test]
fn reports_are_reproducible_across_worker_counts() {
    let mut c = config(Family::AbsT, 7, 0.3, 77);
    c.nu = Some(4);
    c.side = Side::Absolute;
    c.reps = 30_000;
    let mut bits = Vec::new();
    for workers in [None, Some(1), Some(3), Some(8)] {
        c.workers = workers;
        bits.push(verify(&c).unwrap().estimate.to_bits());
    }
    assert!(bits.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn json_report_echoes_config() {
    let mut c = config(Family::T, 5, 0.0, 4);
    c.nu = Some(3);
    c.correlation = Correlation::Matrix {
        path: None,
        rows: equicorrelated(5, 0.25).unwrap().rows(),
    };
    c.reps = 5000;
    let r = verify(&c).unwrap();
    let back: VerificationReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back.config, c);
    assert_eq!(back.estimate.to_bits(), r.estimate.to_bits());
    assert_eq!(back, r);
}

#[test]
fn invalid_configs() {
    let mut c = config(Family::Normal, 5, 0.0, 1);
    c.k = 2;
    assert!(c.validate().is_err());
    c.mode = BoundaryMode::Generalized;
    assert!(c.validate().is_ok());
    c.k = 6;
    assert!(c.validate().is_err());
    let mut c = config(Family::Normal, 5, 0.0, 1);
    c.alpha = 1.0;
    assert!(c.validate().is_err());
    let mut c = config(Family::T, 5, 0.0, 1);
    assert!(c.validate().is_err());
    c.nu = Some(2);
    c.correlation = Correlation::Matrix {
        path: None,
        rows: equicorrelated(4, 0.1).unwrap().rows(),
    };
    assert!(c.validate().is_err());
}
