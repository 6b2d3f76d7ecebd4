mod common;

use simes::dependence::{equicorrelated, CorrelationMatrix};
use simes::dist::Marginal;
use simes::samplers::{
    chi_over_sqrt_nu, prob_transform, replication_rng, sample, Family, Lane, ModelSpec, SampleBatch,
};

fn column(b: &SampleBatch, j: usize) -> Vec<f64> {
    b.rows().map(|r| r[j]).collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, s)
}

#[test]
fn normal_moments() {
    let model = ModelSpec::new(Family::Normal, CorrelationMatrix::identity(2), None).unwrap();
    let b = sample(&model, 100_000, 1).unwrap();
    for j in 0..2 {
        let (m, v) = mean_var(&column(&b, j));
        assert!(m.abs() < 4.0 / (1e5f64).sqrt(), "mean {m}");
        assert!((v - 1.0).abs() < 0.05, "var {v}");
    }
}

#[test]
fn t_variance() {
    let model = ModelSpec::new(Family::T, CorrelationMatrix::identity(2), Some(5)).unwrap();
    let b = sample(&model, 100_000, 2).unwrap();
    for j in 0..2 {
        let (_, v) = mean_var(&column(&b, j));
        assert!((v - 5.0 / 3.0).abs() < 0.1, "var {v}");
    }
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let c = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() as f64 - 1.0);
    c / (vx * vy).sqrt()
}

#[test]
fn folded_normals_stay_positively_correlated() {
    let model = ModelSpec::new(Family::AbsNormal, equicorrelated(2, 0.5).unwrap(), None).unwrap();
    let reference = sample(&model, 1_000_000, 1234).unwrap();
    let r_ref = correlation(&column(&reference, 0), &column(&reference, 1));
    let b = sample(&model, 100_000, 3).unwrap();
    let r = correlation(&column(&b, 0), &column(&b, 1));
    assert!(r > 0.05, "{r}");
    assert!((r - r_ref).abs() < 0.02, "{r} vs {r_ref}");
    // corr(|X₁|, |X₂|) = (ρ·asin ρ + √(1−ρ²) − 1) / (π/2 − 1).
    let rho: f64 = 0.5;
    let exact =
        (rho * rho.asin() + (1.0 - rho * rho).sqrt() - 1.0) / (std::f64::consts::FRAC_PI_2 - 1.0);
    assert!((r_ref - exact).abs() < 0.005, "{r_ref} vs {exact}");
}

#[test]
fn chi_scale_moments() {
    for nu in [1u32, 2, 5, 40] {
        let reps = 100_000u64;
        let z2: Vec<f64> = (0..reps)
            .map(|r| {
                let mut g = replication_rng(77, r, Lane::Chi);
                chi_over_sqrt_nu(nu, &mut g).powi(2)
            })
            .collect();
        let (m, v) = mean_var(&z2);
        let se = (v / reps as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "nu={nu}: {m} ± {se}");
    }
}

#[test]
fn chi_one_is_folded_normal() {
    // For ν = 1, P(Z ≤ 1) = 2Φ(1) − 1.
    let reps = 100_000u64;
    let hits = (0..reps)
        .filter(|&r| {
            let mut g = replication_rng(5, r, Lane::Chi);
            chi_over_sqrt_nu(1, &mut g) <= 1.0
        })
        .count() as f64
        / reps as f64;
    let p = 2.0 * common::phi_oracle(1.0) - 1.0;
    assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / reps as f64).sqrt());
}

#[test]
fn t_rows_are_normal_rows_over_chi_stream() {
    let sigma = equicorrelated(4, 0.3).unwrap();
    let normal = sample(
        &ModelSpec::new(Family::Normal, sigma.clone(), None).unwrap(),
        500,
        9,
    )
    .unwrap();
    let t = sample(
        &ModelSpec::new(Family::T, sigma.clone(), Some(7)).unwrap(),
        500,
        9,
    )
    .unwrap();
    let abs_t = sample(
        &ModelSpec::new(Family::AbsT, sigma, Some(7)).unwrap(),
        500,
        9,
    )
    .unwrap();
    for (r, ((nr, tr), ar)) in normal.rows().zip(t.rows()).zip(abs_t.rows()).enumerate() {
        let mut g = replication_rng(9, r as u64, Lane::Chi);
        let z = chi_over_sqrt_nu(7, &mut g);
        for ((x, y), a) in nr.iter().zip(tr).zip(ar) {
            assert_eq!((x / z).to_bits(), y.to_bits());
            assert_eq!(y.abs().to_bits(), a.to_bits());
        }
    }
}

#[test]
fn batches_are_reproducible_and_round_trip() {
    let model = ModelSpec::new(Family::T, equicorrelated(3, 0.2).unwrap(), Some(4)).unwrap();
    let a = sample(&model, 300, 42).unwrap();
    let b = sample(&model, 300, 42).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample(&model, 300, 43).unwrap());
    assert_eq!(SampleBatch::parse_text(&a.to_text()).unwrap(), a);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.txt");
    a.write(&path).unwrap();
    assert_eq!(SampleBatch::read(&path).unwrap(), a);
}

#[test]
fn marginal_quantiles_have_nominal_coverage() {
    let reps = 100_000;
    let sigma = equicorrelated(3, 0.4).unwrap();
    for (family, nu) in [
        (Family::Normal, None),
        (Family::T, Some(3)),
        (Family::AbsNormal, None),
        (Family::AbsT, Some(6)),
    ] {
        let model = ModelSpec::new(family, sigma.clone(), nu).unwrap();
        let marginal = model.marginal();
        let b = sample(&model, reps, 17).unwrap();
        for p in [0.05, 0.5, 0.95] {
            let q = marginal.quantile(p).unwrap();
            for j in 0..3 {
                let frac = column(&b, j).iter().filter(|&&v| v <= q).count() as f64 / reps as f64;
                assert!(
                    (frac - p).abs() < 4.0 * (0.25 / reps as f64).sqrt(),
                    "{family:?} p={p}: {frac}"
                );
            }
        }
    }
}

#[test]
fn probability_transform_examples() {
    assert_eq!(prob_transform(&[0.0], Marginal::Normal), vec![0.5]);
    assert_eq!(prob_transform(&[0.0], Marginal::AbsNormal), vec![0.0]);
    assert_eq!(
        prob_transform(&[0.0], Marginal::StudentT { nu: 5 }),
        vec![0.5]
    );
}

#[test]
fn transformed_iid_sample_is_uniform() {
    let reps = 20_000;
    for (family, nu) in [(Family::Normal, None), (Family::AbsT, Some(3))] {
        let model = ModelSpec::new(family, CorrelationMatrix::identity(1), nu).unwrap();
        let b = sample(&model, reps, 8).unwrap();
        let mut u = prob_transform(b.values(), model.marginal());
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                ((i + 1) as f64 / reps as f64 - v)
                    .abs()
                    .max((v - i as f64 / reps as f64).abs())
            })
            .fold(0.0, f64::max);
        // 1.63/√n is the 1% Kolmogorov critical value.
        assert!(d < 1.63 / (reps as f64).sqrt(), "{family:?}: D = {d}");
    }
}

#[test]
fn t_family_requires_nu() {
    assert!(ModelSpec::new(Family::T, CorrelationMatrix::identity(2), None).is_err());
    assert!(ModelSpec::new(Family::AbsT, CorrelationMatrix::identity(2), Some(0)).is_err());
}
