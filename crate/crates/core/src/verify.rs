//! Seeded Monte Carlo checks of Simes-type inequalities.
//!
//! Every probability reported here is acceptance-side: the estimate is the
//! fraction of replications in which no order statistic crosses its boundary
//! constant, and it is compared against a lower bound. The rejection rate is
//! reported alongside as `1 − estimate`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dependence::{equicorrelated, sign_balance_check, CorrelationMatrix};
use crate::dist::Marginal;
use crate::orderstats::{
    acceptance_event, check_level, compute_rn, noncrossing_probability, tail_event_probability_iid,
    Boundary,
};
use crate::procedures::{
    binom, generalized_critical_values, generalized_upper_critical_values, simes_critical_values,
    ExchangeableModel, Extreme, MaxMinCdf,
};
use crate::quadrature::chi_scale_rule;
use crate::samplers::{Family, ModelSpec, Sampler};
use crate::{Error, Result};

pub const DEFAULT_REPS: u64 = 100_000;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Width of the pass band in standard errors.
pub const PASS_SE: f64 = 3.0;
/// Tolerance of [`equality_check_independence`].
pub const EQUALITY_TOL: f64 = 1e-9;
/// Replications handled by one parallel task. Fixed so that the partition
/// never depends on the worker count.
const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `P{X_{j:n} ≥ a_j, j = k..n}`.
    #[default]
    LowerTailA,
    /// `P{X_{i:n} ≤ b_i, i = 1..n−k+1}`.
    UpperTailB,
    /// The upper-tail form on absolute values; requires an abs family.
    Absolute,
}

impl Side {
    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "lower_tail_a" => Ok(Side::LowerTailA),
            "upper_tail_b" => Ok(Side::UpperTailB),
            "absolute" => Ok(Side::Absolute),
            other => Err(Error::Parse(format!(
                "unknown side '{other}' (expected lower_tail_a|upper_tail_b|absolute)"
            ))),
        }
    }

    pub fn is_upper(self) -> bool {
        !matches!(self, Side::LowerTailA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Marginal quantiles at `jα/n`; `k` must be 1.
    #[default]
    Simes,
    /// Exchangeable critical values built from `F_k` (or `G_k`).
    Generalized,
    /// Constants supplied in the config.
    Custom,
}

impl BoundaryMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simes" => Ok(BoundaryMode::Simes),
            "generalized" => Ok(BoundaryMode::Generalized),
            "custom" => Ok(BoundaryMode::Custom),
            other => Err(Error::Parse(format!(
                "unknown mode '{other}' (expected simes|generalized|custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correlation {
    Equicorrelated {
        rho: f64,
    },
    Matrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        rows: Vec<Vec<f64>>,
    },
}

impl Default for Correlation {
    fn default() -> Self {
        Correlation::Equicorrelated { rho: 0.0 }
    }
}

fn default_k() -> usize {
    1
}

fn default_reps() -> u64 {
    DEFAULT_REPS
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub alpha: f64,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<u32>,
    #[serde(default = "default_reps")]
    pub reps: u64,
    pub seed: u64,
    #[serde(default)]
    pub side: Side,
    #[serde(default)]
    pub mode: BoundaryMode,
    /// Constants for `mode = custom`: `a_k..a_n`, or `b_1..b_{n−k+1}` on the
    /// upper sides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<f64>>,
    /// Zero tolerance for the matrix sign conditions.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Fixed worker count; `None` uses the global pool. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Independence model with every optional field at its default.
    pub fn new(family: Family, n: usize, alpha: f64, seed: u64) -> Self {
        ExperimentConfig {
            family,
            n,
            k: 1,
            alpha,
            correlation: Correlation::default(),
            nu: None,
            reps: DEFAULT_REPS,
            seed,
            side: Side::default(),
            mode: BoundaryMode::default(),
            boundary: None,
            tol: DEFAULT_TOL,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        Ok(())
    }

    /// Checks every field invariant and builds the sampling model.
    pub fn model(&self) -> Result<ModelSpec> {
        if self.n == 0 {
            return Err(Error::range("n", 0.0, "[1, inf)"));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::range("k", self.k as f64, format!("[1, {}]", self.n)));
        }
        check_level("alpha", self.alpha)?;
        if self.reps == 0 {
            return Err(Error::range("reps", 0.0, "[1, inf)"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::range("tol", self.tol, "[0, inf)"));
        }
        if self.workers == Some(0) {
            return Err(Error::range("workers", 0.0, "[1, inf)"));
        }
        if self.mode == BoundaryMode::Simes && self.k != 1 {
            return Err(Error::InvalidModel(
                "mode = simes needs k = 1; use mode = generalized for k ≥ 2".into(),
            ));
        }
        match (&self.boundary, self.mode) {
            (None, BoundaryMode::Custom) => {
                return Err(Error::InvalidModel(
                    "mode = custom needs boundary constants".into(),
                ))
            }
            (Some(b), BoundaryMode::Custom) if b.len() != self.n - self.k + 1 => {
                return Err(Error::LengthMismatch {
                    expected: self.n - self.k + 1,
                    actual: b.len(),
                })
            }
            (Some(_), mode) if mode != BoundaryMode::Custom => {
                return Err(Error::InvalidModel(
                    "boundary constants are only used with mode = custom".into(),
                ))
            }
            _ => {}
        }
        if self.side == Side::Absolute && !self.family.is_abs() {
            return Err(Error::InvalidModel(format!(
                "side = absolute needs an abs family, got '{}'",
                self.family.name()
            )));
        }
        let sigma = match &self.correlation {
            Correlation::Equicorrelated { rho } => equicorrelated(self.n, *rho)?,
            Correlation::Matrix { rows, .. } => {
                let s = CorrelationMatrix::from_rows(rows)?;
                if s.dim() != self.n {
                    return Err(Error::LengthMismatch {
                        expected: self.n,
                        actual: s.dim(),
                    });
                }
                s
            }
        };
        ModelSpec::new(self.family, sigma, self.nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Inequality,
    /// Multivariate t with nonnegative correlations.
    Theorem31T,
    /// Absolute multivariate t with a sign-balanced precision matrix.
    Theorem31AbsT,
    GeneralizedT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: CheckKind,
    pub exploratory: bool,
    pub estimate: f64,
    pub bound: f64,
    pub std_error: f64,
    /// `(estimate − bound)/std_error`; absent when the standard error is 0.
    pub z_margin: Option<f64>,
    pub pass: bool,
    pub rejection_rate: f64,
    pub accepted: u64,
    /// Boundary constants used: `a_k..a_n`, or `b_1..b_{n−k+1}`.
    pub thresholds: Vec<f64>,
    /// Exact acceptance probability when the correlation matrix is the
    /// identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent_exact: Option<f64>,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Boundary in lower-tail form plus the bound it carries.
struct Plan {
    lower: Boundary,
    negate: bool,
    thresholds: Vec<f64>,
    bound: f64,
}

type Curve = Box<dyn Fn(f64) -> f64 + Send + Sync>;

fn exchangeable(model: &ModelSpec) -> Result<ExchangeableModel> {
    let rho = match model.sigma.common_correlation() {
        Some(r) if r >= 0.0 => r,
        _ => {
            return Err(Error::Precondition(
                "k ≥ 2 needs an equicorrelated correlation matrix with rho ≥ 0".into(),
            ))
        }
    };
    Ok(match (model.family, model.nu) {
        (Family::Normal, _) => ExchangeableModel::EquicorrelatedNormal { rho },
        (Family::AbsNormal, _) => ExchangeableModel::EquicorrelatedAbsNormal { rho },
        (Family::T, Some(nu)) => ExchangeableModel::EquicorrelatedT { rho, nu },
        (Family::AbsT, Some(nu)) => ExchangeableModel::EquicorrelatedAbsT { rho, nu },
        (_, None) => unreachable!("validated model"),
    })
}

/// CDF of the max (or min) of any `k` coordinates.
fn extreme_cdf(model: &ModelSpec, k: usize, kind: Extreme) -> Result<Curve> {
    if k == 1 {
        let m = model.marginal();
        return Ok(Box::new(move |x| m.cdf(x)));
    }
    let f = MaxMinCdf::new(k as u32, kind, exchangeable(model)?)?;
    Ok(Box::new(move |x| f.eval(x)))
}

fn check_constancy_condition(values: &[f64], k: usize) -> Result<()> {
    let scaled: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v / binom(k + i, k))
        .collect();
    for (i, w) in scaled.windows(2).enumerate() {
        if w[1] < w[0] - 1e-9 * w[0].abs().max(1e-300) {
            return Err(Error::Precondition(format!(
                "custom boundary violates the monotone ratio condition at j = {} ({} > {})",
                k + i + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

fn plan(config: &ExperimentConfig, model: &ModelSpec) -> Result<Plan> {
    let (n, k, alpha) = (config.n, config.k, config.alpha);
    let marginal = model.marginal();
    if !config.side.is_upper() {
        let a = match config.mode {
            BoundaryMode::Simes => simes_critical_values(n, alpha, marginal)?,
            BoundaryMode::Generalized if k == 1 => simes_critical_values(n, alpha, marginal)?,
            BoundaryMode::Generalized => {
                let fk = MaxMinCdf::new(k as u32, Extreme::Max, exchangeable(model)?)?;
                generalized_critical_values(n, k, alpha, &fk)?
            }
            BoundaryMode::Custom => {
                let a = Boundary::new(n, k, config.boundary.clone().unwrap_or_default())?;
                let fk = extreme_cdf(model, k, Extreme::Max)?;
                let v: Vec<f64> = a.constants().iter().map(|&x| fk(x)).collect();
                check_constancy_condition(&v, k)?;
                a
            }
        };
        let fk = extreme_cdf(model, k, Extreme::Max)?;
        let bound = 1.0 - fk(a.last());
        return Ok(Plan {
            thresholds: a.constants().to_vec(),
            lower: a,
            negate: false,
            bound,
        });
    }
    let b = match config.mode {
        BoundaryMode::Simes | BoundaryMode::Generalized if k == 1 => (1..=n)
            .map(|i| marginal.quantile(1.0 - (n - i + 1) as f64 * alpha / n as f64))
            .collect::<Result<Vec<_>>>()?,
        BoundaryMode::Simes | BoundaryMode::Generalized => {
            let gk = MaxMinCdf::new(k as u32, Extreme::Min, exchangeable(model)?)?;
            generalized_upper_critical_values(n, k, alpha, &gk)?
        }
        BoundaryMode::Custom => {
            let b = config.boundary.clone().unwrap_or_default();
            let gk = extreme_cdf(model, k, Extreme::Min)?;
            let v: Vec<f64> = (k..=n).map(|j| 1.0 - gk(b[n - j])).collect();
            check_constancy_condition(&v, k)?;
            b
        }
    };
    let lower = Boundary::from_upper(n, k, &b)?;
    let gk = extreme_cdf(model, k, Extreme::Min)?;
    let bound = gk(b[0]);
    Ok(Plan {
        lower,
        negate: true,
        thresholds: b,
        bound,
    })
}

fn check_t_hypothesis(config: &ExperimentConfig, plan: &Plan) -> Result<()> {
    if config.family != Family::T {
        return Ok(());
    }
    if !config.side.is_upper() && plan.lower.last() > 0.0 {
        return Err(Error::Precondition(format!(
            "t family with side = lower_tail_a needs a_n ≤ 0, got a_n = {}",
            plan.lower.last()
        )));
    }
    if config.side.is_upper() && plan.thresholds[0] < 0.0 {
        return Err(Error::Precondition(format!(
            "t family with side = upper_tail_b needs b_1 ≥ 0, got b_1 = {}",
            plan.thresholds[0]
        )));
    }
    Ok(())
}

/// Exact acceptance probability for an identity correlation matrix. Under
/// the t families the coordinates share the chi divisor, so the iid result
/// is averaged over it.
fn independent_exact(model: &ModelSpec, plan: &Plan) -> Result<Option<f64>> {
    if model.sigma.common_correlation() != Some(0.0) {
        return Ok(None);
    }
    let base = if model.family.is_abs() {
        Marginal::AbsNormal
    } else {
        Marginal::Normal
    };
    let negate = plan.negate;
    let cond = |x: f64, z: f64| {
        if negate {
            1.0 - base.cdf(-x * z)
        } else {
            base.cdf(x * z)
        }
    };
    let p = match model.nu {
        None => tail_event_probability_iid(&plan.lower, |x| cond(x, 1.0))?,
        Some(nu) => {
            let rule = chi_scale_rule(nu);
            let mut p = 0.0;
            for (&z, &w) in rule.scales.iter().zip(&rule.weights) {
                p += w * tail_event_probability_iid(&plan.lower, |x| cond(x, z))?;
            }
            p
        }
    };
    Ok(Some(p))
}

fn count_accepts(sampler: &Sampler, plan: &Plan, reps: u64, seed: u64) -> Result<u64> {
    let n = plan.lower.n();
    let k = plan.lower.start();
    (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut x = vec![0.0; n];
            let mut scratch = vec![0.0; n];
            let mut count = 0u64;
            for rep in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                sampler.draw(seed, rep, &mut x, &mut scratch);
                if plan.negate {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
                let accept = compute_rn(&x, &plan.lower)?.value() < k;
                debug_assert_eq!(accept, acceptance_event(&x, &plan.lower)?);
                count += accept as u64;
            }
            Ok(count)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

fn run(
    config: &ExperimentConfig,
    model: &ModelSpec,
    plan: Plan,
    check: CheckKind,
    exploratory: bool,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let sampler = Sampler::new(model)?;
    let accepted = match config.workers {
        None => count_accepts(&sampler, &plan, config.reps, config.seed)?,
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start {w} workers: {e}")))?
            .install(|| count_accepts(&sampler, &plan, config.reps, config.seed))?,
    };
    let estimate = accepted as f64 / config.reps as f64;
    let std_error = (estimate * (1.0 - estimate) / config.reps as f64).sqrt();
    let z_margin = (std_error > 0.0).then(|| (estimate - plan.bound) / std_error);
    let pass = estimate >= plan.bound - PASS_SE * std_error;
    let independent_exact = independent_exact(model, &plan)?;
    Ok(VerificationReport {
        check,
        exploratory,
        estimate,
        bound: plan.bound,
        std_error,
        z_margin,
        pass,
        rejection_rate: 1.0 - estimate,
        accepted,
        thresholds: plan.thresholds,
        independent_exact,
        config: config.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Estimates the acceptance probability of the configured boundary and
/// compares it with `1 − F_k(a_n)` (lower side) or `G_k(b_1)` (upper sides).
pub fn verify_inequality(config: &ExperimentConfig) -> Result<VerificationReport> {
    let model = config.model()?;
    let plan = plan(config, &model)?;
    check_t_hypothesis(config, &plan)?;
    run(config, &model, plan, CheckKind::Inequality, false)
}

/// Simes inequality for multivariate t (family `t`: nonnegative
/// correlations and `a_n ≤ 0` or `b_1 ≥ 0`) and absolute multivariate t
/// (family `abs_t`: sign-balanced precision matrix).
pub fn verify_theorem31(config: &ExperimentConfig) -> Result<VerificationReport> {
    let model = config.model()?;
    if config.k != 1 {
        return Err(Error::Precondition(format!(
            "k = {} is not a Simes configuration; use explore_generalized_t",
            config.k
        )));
    }
    let check = match config.family {
        Family::T => {
            let m = model.sigma.min_off_diagonal();
            if model.dim() > 1 && m < -config.tol {
                return Err(Error::Precondition(format!(
                    "correlation matrix has a negative off-diagonal entry ({m})"
                )));
            }
            CheckKind::Theorem31T
        }
        Family::AbsT => {
            if sign_balance_check(&model.sigma, config.tol)?.is_none() {
                return Err(Error::Precondition(
                    "no signature matrix makes the off-diagonals of -DΣ⁻¹D nonnegative".into(),
                ));
            }
            CheckKind::Theorem31AbsT
        }
        other => {
            return Err(Error::InvalidModel(format!(
                "family '{}' is not a t family",
                other.name()
            )))
        }
    };
    let plan = plan(config, &model)?;
    check_t_hypothesis(config, &plan)?;
    run(config, &model, plan, check, false)
}

/// The generalized inequality under t models. No result is claimed there,
/// so the report is flagged exploratory and a failure is a finding.
pub fn explore_generalized_t(config: &ExperimentConfig) -> Result<VerificationReport> {
    if !config.family.is_t() {
        return Err(Error::InvalidModel(format!(
            "family '{}' is not a t family",
            config.family.name()
        )));
    }
    if config.k < 2 {
        return Err(Error::Precondition(
            "k = 1 is the Simes case; use verify_theorem31".into(),
        ));
    }
    let model = config.model()?;
    let plan = plan(config, &model)?;
    check_t_hypothesis(config, &plan)?;
    run(config, &model, plan, CheckKind::GeneralizedT, true)
}

/// Normal families go to [`verify_inequality`]; t families to
/// [`verify_theorem31`] when `k = 1` and [`explore_generalized_t`] otherwise.
pub fn verify(config: &ExperimentConfig) -> Result<VerificationReport> {
    match (config.family.is_t(), config.k) {
        (false, _) => verify_inequality(config),
        (true, 1) => verify_theorem31(config),
        (true, _) => explore_generalized_t(config),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityReport {
    pub n: usize,
    pub alpha: f64,
    pub probability: f64,
    pub expected: f64,
    pub abs_error: f64,
    pub pass: bool,
}

/// Exact non-crossing probability of the Simes boundary for iid uniforms,
/// which must equal `1 − α`.
pub fn equality_check_independence(n: usize, alpha: f64) -> Result<EqualityReport> {
    let boundary = Boundary::simes(n, alpha)?;
    let probability = noncrossing_probability(boundary.constants())?;
    let expected = 1.0 - alpha;
    let abs_error = (probability - expected).abs();
    Ok(EqualityReport {
        n,
        alpha,
        probability,
        expected,
        abs_error,
        pass: abs_error <= EQUALITY_TOL,
    })
}
