mod common;

use proptest::prelude::*;
use rand::Rng;
use simes::orderstats::{
    acceptance_event, check_decomposition_identity, check_factorial_identity, compute_rn,
    noncrossing_probability, tail_event_probability_iid, Boundary,
};
use simes::samplers::{replication_rng, Lane};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn three_point_boundary_matches_simplex_integral() {
    let oracle = common::noncrossing_oracle(&[0.1, 0.2, 0.3]);
    assert!((oracle - 0.7).abs() < 1e-15);
    let p = noncrossing_probability(&[0.1, 0.2, 0.3]).unwrap();
    assert!((p - oracle).abs() < 1e-12, "{p} vs {oracle}");
}

#[test]
fn tail_event_with_two_constraints() {
    let b = Boundary::new(3, 2, vec![0.2, 0.4]).unwrap();
    let p = tail_event_probability_iid(&b, |x| x.clamp(0.0, 1.0)).unwrap();
    let oracle = common::noncrossing_oracle(&[0.0, 0.2, 0.4]);
    assert!((oracle - 0.864).abs() < 1e-15);
    assert!((p - oracle).abs() < 1e-12);
}

#[test]
fn single_constraint_is_max_cdf_power() {
    for n in 1..8 {
        let b = Boundary::new(n, n, vec![0.7]).unwrap();
        let p = tail_event_probability_iid(&b, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((p - (1.0 - 0.7f64.powi(n as i32))).abs() < 1e-13);
    }
}

#[test]
fn agrees_with_rational_oracle_on_random_boundaries() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=25);
        let c = sorted((0..n).map(|_| rng.random::<f64>()).collect());
        let exact = common::noncrossing_oracle(&c);
        let p = noncrossing_probability(&c).unwrap();
        assert!((p - exact).abs() < 1e-10, "n={n}: {p} vs {exact}");
    }
}

#[test]
fn agrees_with_monte_carlo() {
    let mut rng = common::rng(5);
    let reps = 200_000u64;
    let mut failures = 0;
    for b in 0..50u64 {
        let n = rng.random_range(2..=10);
        let c = sorted((0..n).map(|_| rng.random::<f64>() * 0.6).collect());
        let p = noncrossing_probability(&c).unwrap();
        let mut u = vec![0.0; n];
        let mut hits = 0u64;
        for r in 0..reps {
            let mut g = replication_rng(1000 + b, r, Lane::Aux);
            u.iter_mut().for_each(|v| *v = g.random());
            u.sort_by(f64::total_cmp);
            if u.iter().zip(&c).all(|(x, ci)| x >= ci) {
                hits += 1;
            }
        }
        let est = hits as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt().max(1e-12);
        if (est - p).abs() > 4.0 * se {
            failures += 1;
        }
    }
    assert!(failures <= 1, "{failures} boundaries outside 4 SE");
}

#[test]
fn rn_examples() {
    let a = Boundary::full(vec![0.0167, 0.0333, 0.05]).unwrap();
    assert_eq!(compute_rn(&[0.01, 0.02, 0.5], &a).unwrap().value(), 2);
    assert_eq!(compute_rn(&[0.04, 0.9, 0.01], &a).unwrap().value(), 1);
    assert_eq!(compute_rn(&[0.2, 0.3, 0.4], &a).unwrap().value(), 0);
    assert!(check_factorial_identity(&[0.01, 0.02, 0.5], &a, 1).unwrap());
}

#[test]
fn simple_decomposition_cases() {
    let mut rng = common::rng(3);
    for _ in 0..200 {
        let x: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let a = Boundary::full(sorted((0..2).map(|_| rng.random()).collect())).unwrap();
        assert!(check_decomposition_identity(&x, &a, 1).unwrap());
    }
}

fn realization() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..1.0, n),
            proptest::collection::vec(0.0f64..1.0, n),
            1usize..=3.min(n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn duality_and_identities((x, a, k) in realization()) {
        let n = x.len();
        let full = Boundary::full(sorted(a.clone())).unwrap();
        let tail = Boundary::new(n, k, full.constants()[k - 1..].to_vec()).unwrap();
        let rn = compute_rn(&x, &tail).unwrap().value();
        prop_assert_eq!(rn >= k, !acceptance_event(&x, &tail).unwrap());
        let r = compute_rn(&x, &full).unwrap().value();
        if r >= k {
            prop_assert!(check_factorial_identity(&x, &full, k).unwrap());
        } else {
            prop_assert!(check_factorial_identity(&x, &full, k).is_err());
        }
        prop_assert!(check_decomposition_identity(&x, &full, k).unwrap());
    }

    #[test]
    fn noncrossing_is_monotone(c in proptest::collection::vec(0.0f64..1.0, 1..12), i in 0usize..12, bump in 0.0f64..0.3) {
        let c = sorted(c);
        let i = i % c.len();
        let mut d = c.clone();
        d[i] = (d[i] + bump).min(1.0);
        let di = d[i];
        for v in d[i + 1..].iter_mut() {
            *v = v.max(di);
        }
        let p = noncrossing_probability(&c).unwrap();
        let q = noncrossing_probability(&d).unwrap();
        prop_assert!(q <= p + 1e-12);
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn noncrossing_endpoints() {
    for n in 1..30 {
        assert!((noncrossing_probability(&vec![0.0; n]).unwrap() - 1.0).abs() < 1e-12);
        let c = vec![1.0; n];
        assert_eq!(noncrossing_probability(&c).unwrap(), 0.0);
    }
}

#[test]
fn invalid_boundaries_are_rejected() {
    assert!(noncrossing_probability(&[0.3, 0.2]).is_err());
    assert!(noncrossing_probability(&[-0.1, 0.2]).is_err());
    assert!(noncrossing_probability(&[0.1, 1.2]).is_err());
    assert!(compute_rn(&[0.1, 0.2], &Boundary::full(vec![0.1, 0.2, 0.3]).unwrap()).is_err());
}
