//! Simes, generalized Simes, Hochberg and Benjamini–Hochberg procedures and
//! the critical-value solvers built on the constancy conditions
//! `F(a_j)/j = α/n` and `F_k(a_j)/C(j,k) = α/C(n,k)`.

use serde::{Deserialize, Serialize};

use crate::dist::Marginal;
use crate::orderstats::{check_level, check_nondecreasing, compute_rn, Boundary};
use crate::quadrature::{
    equi_abs_normal_max_cdf, equi_abs_normal_min_cdf, equi_normal_max_cdf, equi_normal_min_cdf,
    studentize,
};
use crate::{Error, Result};

pub use crate::dist::{student_t_cdf, student_t_quantile};

/// Initial root bracket for critical values.
pub const ROOT_BRACKET: (f64, f64) = (-10.0, 10.0);
/// Bisection stops when the bracket is narrower than this.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector(Vec<f64>);

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::range("n", 0.0, "[1, inf)"));
        }
        if let Some((i, &p)) = values
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::range(
                "p",
                p,
                format!("[0, 1] (hypothesis {})", i + 1),
            ));
        }
        Ok(PValueVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Indices sorted by ascending p-value (stable).
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[a].total_cmp(&self.0[b]));
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Simes,
    GeneralizedSimes,
    Hochberg,
    BenjaminiHochberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub procedure: Procedure,
    /// α (or q for Benjamini–Hochberg); absent when the test was driven by
    /// a precomputed boundary.
    pub level: Option<f64>,
    pub n: usize,
    pub reject_global: bool,
    /// 1-based hypothesis indices, ascending; empty for global-only tests.
    pub rejected: Vec<usize>,
    /// Thresholds for the ordered statistics, `thresholds[i]` applying to
    /// the (i+1)-th smallest value.
    pub thresholds: Vec<f64>,
}

/// Global Simes test: reject iff `p_(i) ≤ iα/n` for some `i`.
pub fn simes_test(p: &PValueVector, alpha: f64) -> Result<TestOutcome> {
    check_level("alpha", alpha)?;
    let n = p.len();
    let thresholds: Vec<f64> = (1..=n).map(|i| i as f64 * alpha / n as f64).collect();
    let order = p.order();
    let reject = order
        .iter()
        .zip(&thresholds)
        .any(|(&i, &t)| p.values()[i] <= t);
    Ok(TestOutcome {
        procedure: Procedure::Simes,
        level: Some(alpha),
        n,
        reject_global: reject,
        rejected: Vec::new(),
        thresholds,
    })
}

/// Generalized Simes test on the statistic scale: reject iff `R_n ≥ k`,
/// i.e. `X_{j:n} ≤ a_j` for some `j ∈ {k, …, n}`.
pub fn generalized_simes_test(x: &[f64], boundary: &Boundary) -> Result<TestOutcome> {
    let r = compute_rn(x, boundary)?;
    Ok(TestOutcome {
        procedure: Procedure::GeneralizedSimes,
        level: None,
        n: boundary.n(),
        reject_global: r.value() >= boundary.start(),
        rejected: Vec::new(),
        thresholds: (1..=boundary.n()).map(|j| boundary.a(j)).collect(),
    })
}

fn step_up(
    p: &PValueVector,
    procedure: Procedure,
    level: f64,
    thresholds: Vec<f64>,
) -> TestOutcome {
    let order = p.order();
    let cut = (1..=p.len())
        .rev()
        .find(|&i| p.values()[order[i - 1]] <= thresholds[i - 1])
        .unwrap_or(0);
    let mut rejected: Vec<usize> = order[..cut].iter().map(|&i| i + 1).collect();
    rejected.sort_unstable();
    TestOutcome {
        procedure,
        level: Some(level),
        n: p.len(),
        reject_global: cut > 0,
        rejected,
        thresholds,
    }
}

/// Hochberg step-up: largest `i` with `p_(i) ≤ α/(n−i+1)`; reject the `i`
/// smallest.
pub fn hochberg(p: &PValueVector, alpha: f64) -> Result<TestOutcome> {
    check_level("alpha", alpha)?;
    let n = p.len();
    let t = (1..=n).map(|i| alpha / (n - i + 1) as f64).collect();
    Ok(step_up(p, Procedure::Hochberg, alpha, t))
}

/// Benjamini–Hochberg step-up with thresholds `iq/n`.
pub fn benjamini_hochberg(p: &PValueVector, q: f64) -> Result<TestOutcome> {
    check_level("q", q)?;
    let n = p.len();
    let t = (1..=n).map(|i| i as f64 * q / n as f64).collect();
    Ok(step_up(p, Procedure::BenjaminiHochberg, q, t))
}

/// `a_j = F⁻¹(jα/n)`, `j = 1..n`.
pub fn simes_critical_values(n: usize, alpha: f64, marginal: Marginal) -> Result<Boundary> {
    check_level("alpha", alpha)?;
    if n == 0 {
        return Err(Error::range("n", 0.0, "[1, inf)"));
    }
    let a = (1..=n)
        .map(|j| marginal.quantile(j as f64 * alpha / n as f64))
        .collect::<Result<Vec<_>>>()?;
    Boundary::full(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    Max,
    Min,
}

/// Source of the common CDF of the maximum (or minimum) of any `k`
/// coordinates of an exchangeable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ExchangeableModel {
    EquicorrelatedNormal {
        rho: f64,
    },
    EquicorrelatedAbsNormal {
        rho: f64,
    },
    EquicorrelatedT {
        rho: f64,
        nu: u32,
    },
    EquicorrelatedAbsT {
        rho: f64,
        nu: u32,
    },
    /// User-supplied curve: strictly increasing `x`, nondecreasing values in
    /// `[0, 1]`, linearly interpolated and held constant outside the range.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

/// `F_k` (kind max) or `G_k` (kind min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinCdf {
    k: u32,
    kind: Extreme,
    model: ExchangeableModel,
}

impl MaxMinCdf {
    pub fn new(k: u32, kind: Extreme, model: ExchangeableModel) -> Result<Self> {
        if k == 0 {
            return Err(Error::range("k", 0.0, "[1, inf)"));
        }
        match &model {
            ExchangeableModel::EquicorrelatedNormal { rho }
            | ExchangeableModel::EquicorrelatedAbsNormal { rho } => check_rho(*rho)?,
            ExchangeableModel::EquicorrelatedT { rho, nu }
            | ExchangeableModel::EquicorrelatedAbsT { rho, nu } => {
                check_rho(*rho)?;
                if *nu == 0 {
                    return Err(Error::range("nu", 0.0, "[1, inf)"));
                }
            }
            ExchangeableModel::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidModel(
                        "tabulated curve needs two points".into(),
                    ));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidModel(
                        "tabulated x values must be strictly increasing".into(),
                    ));
                }
                let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
                check_nondecreasing(&ys)?;
                if ys.iter().any(|y| !(0.0..=1.0).contains(y)) {
                    return Err(Error::InvalidModel(
                        "tabulated values must lie in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(MaxMinCdf { k, kind, model })
    }

    pub fn max_normal(k: u32, rho: f64) -> Result<Self> {
        Self::new(
            k,
            Extreme::Max,
            ExchangeableModel::EquicorrelatedNormal { rho },
        )
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kind(&self) -> Extreme {
        self.kind
    }

    pub fn model(&self) -> &ExchangeableModel {
        &self.model
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.k;
        use ExchangeableModel as M;
        match (&self.model, self.kind) {
            (M::EquicorrelatedNormal { rho }, Extreme::Max) => equi_normal_max_cdf(k, *rho, x),
            (M::EquicorrelatedNormal { rho }, Extreme::Min) => equi_normal_min_cdf(k, *rho, x),
            (M::EquicorrelatedAbsNormal { rho }, Extreme::Max) => {
                equi_abs_normal_max_cdf(k, *rho, x)
            }
            (M::EquicorrelatedAbsNormal { rho }, Extreme::Min) => {
                equi_abs_normal_min_cdf(k, *rho, x)
            }
            (M::EquicorrelatedT { rho, nu }, Extreme::Max) => {
                studentize(*nu, x, |y| equi_normal_max_cdf(k, *rho, y))
            }
            (M::EquicorrelatedT { rho, nu }, Extreme::Min) => {
                studentize(*nu, x, |y| equi_normal_min_cdf(k, *rho, y))
            }
            (M::EquicorrelatedAbsT { rho, nu }, Extreme::Max) => {
                studentize(*nu, x, |y| equi_abs_normal_max_cdf(k, *rho, y))
            }
            (M::EquicorrelatedAbsT { rho, nu }, Extreme::Min) => {
                studentize(*nu, x, |y| equi_abs_normal_min_cdf(k, *rho, y))
            }
            (M::Tabulated { points }, _) => interpolate(points, x),
        }
    }

    /// Smallest `x` (to within 1e-10) with `eval(x) ≥ target`, found by
    /// doubling the bracket from `[−10, 10]` and bisecting.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        invert_monotone(|x| self.eval(x), target)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::range("rho", rho, "[0, 1)"))
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub(crate) fn invert_monotone(f: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = ROOT_BRACKET;
    let mut expansions = 0;
    while f(lo) >= target || f(hi) < target {
        if expansions >= 10 {
            return Err(Error::Bracketing { target, lo, hi });
        }
        if f(lo) >= target {
            lo *= 2.0;
        }
        if f(hi) < target {
            hi *= 2.0;
        }
        expansions += 1;
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `a_j = F_k⁻¹(C(j,k)/C(n,k) · α)` for `j = k..n`.
pub fn generalized_critical_values(
    n: usize,
    k: usize,
    alpha: f64,
    fk: &MaxMinCdf,
) -> Result<Boundary> {
    check_level("alpha", alpha)?;
    if k == 0 || k > n {
        return Err(Error::range("k", k as f64, format!("[1, {n}]")));
    }
    if fk.kind != Extreme::Max {
        return Err(Error::InvalidModel(
            "lower-tail critical values need the CDF of the maximum".into(),
        ));
    }
    if fk.k as usize != k {
        return Err(Error::InvalidModel(format!(
            "F_k was built for k = {}, requested k = {k}",
            fk.k
        )));
    }
    let total = binom(n, k);
    let a = (k..=n)
        .map(|j| fk.inverse(binom(j, k) / total * alpha))
        .collect::<Result<Vec<_>>>()?;
    Boundary::new(n, k, monotone_envelope(a))
}

/// Upper-tail constants `b_1 ≤ … ≤ b_{n−k+1}` with
/// `1 − G_k(b_{n−j+1}) = C(j,k)/C(n,k) · α` for `j = k..n`.
pub fn generalized_upper_critical_values(
    n: usize,
    k: usize,
    alpha: f64,
    gk: &MaxMinCdf,
) -> Result<Vec<f64>> {
    check_level("alpha", alpha)?;
    if k == 0 || k > n {
        return Err(Error::range("k", k as f64, format!("[1, {n}]")));
    }
    if gk.kind != Extreme::Min || gk.k as usize != k {
        return Err(Error::InvalidModel(format!(
            "upper-tail critical values need the CDF of the minimum of k = {k}"
        )));
    }
    let total = binom(n, k);
    let mut b = vec![0.0; n - k + 1];
    for j in k..=n {
        b[n - j] = gk.inverse(1.0 - binom(j, k) / total * alpha)?;
    }
    Ok(monotone_envelope(b))
}

/// Bisection noise can leave adjacent constants out of order by ~1e-10 when
/// two targets coincide; clamp to the running maximum.
fn monotone_envelope(mut v: Vec<f64>) -> Vec<f64> {
    for i in 1..v.len() {
        if v[i] < v[i - 1] {
            v[i] = v[i - 1];
        }
    }
    v
}

/// `F_k(x) = ∫ φ(z) Φ((x − √ρ z)/√(1−ρ))^k dz`.
pub fn max_k_cdf_equicorrelated(k: u32, rho: f64, x: f64) -> Result<f64> {
    Ok(MaxMinCdf::new(
        k,
        Extreme::Max,
        ExchangeableModel::EquicorrelatedNormal { rho },
    )?
    .eval(x))
}

/// `G_k(x) = 1 − ∫ φ(z) (1 − Φ((x − √ρ z)/√(1−ρ)))^k dz`.
pub fn min_k_cdf_equicorrelated(k: u32, rho: f64, x: f64) -> Result<f64> {
    Ok(MaxMinCdf::new(
        k,
        Extreme::Min,
        ExchangeableModel::EquicorrelatedNormal { rho },
    )?
    .eval(x))
}
