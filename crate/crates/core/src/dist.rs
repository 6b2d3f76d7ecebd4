//! Univariate marginals: standard normal, Student-t, and their absolute-value
//! folds, plus the uniform scale.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail, `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley step against the
/// erfc-based CDF, which brings the absolute error to the 1e-15 level.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (-p).ln_1p()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement; work in the smaller tail to keep the residual exact.
    let e = if x < 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_sf(x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Student-t CDF with `nu` degrees of freedom via the regularized incomplete
/// beta function.
pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == 0.0 {
        return 0.5;
    }
    let t = nu / (nu + x * x);
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, t);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t upper tail `P(T > x)`.
pub fn student_t_sf(x: f64, nu: f64) -> f64 {
    student_t_cdf(-x, nu)
}

/// Inverse Student-t CDF by bracketing and bisection to 1e-10 (tightened to
/// machine resolution when cheap).
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::range("p", p, "(0, 1)"));
    }
    if !(nu >= 1.0) {
        return Err(Error::range("nu", nu, "[1, inf)"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve in the lower tail and reflect.
    let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let mut lo = -1.0;
    let mut hi = 0.0;
    while student_t_cdf(lo, nu) > target {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return Err(Error::Bracketing { target: p, lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi || hi - lo <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
        if student_t_cdf(mid, nu) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(sign * -(0.5 * (lo + hi)))
}

/// The univariate marginal attached to a statistic scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "marginal", rename_all = "snake_case")]
pub enum Marginal {
    Uniform,
    Normal,
    StudentT { nu: u32 },
    AbsNormal,
    AbsStudentT { nu: u32 },
}

impl Marginal {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform => x.clamp(0.0, 1.0),
            Marginal::Normal => normal_cdf(x),
            Marginal::StudentT { nu } => student_t_cdf(x, nu as f64),
            Marginal::AbsNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - 2.0 * normal_sf(x)
                }
            }
            Marginal::AbsStudentT { nu } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - 2.0 * student_t_sf(x, nu as f64)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        let open = !(p > 0.0 && p < 1.0);
        match *self {
            Marginal::Uniform => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::range("p", p, "[0, 1]"));
                }
                Ok(p)
            }
            Marginal::Normal => {
                if open {
                    return Err(Error::range("p", p, "(0, 1)"));
                }
                Ok(normal_quantile(p))
            }
            Marginal::StudentT { nu } => student_t_quantile(p, nu as f64),
            Marginal::AbsNormal => {
                if open {
                    return Err(Error::range("p", p, "(0, 1)"));
                }
                // 1 - 2·sf(x) = p  ⇔  sf(x) = (1 - p)/2
                Ok(-normal_quantile(0.5 * (1.0 - p)))
            }
            Marginal::AbsStudentT { nu } => {
                if open {
                    return Err(Error::range("p", p, "(0, 1)"));
                }
                Ok(-student_t_quantile(0.5 * (1.0 - p), nu as f64)?)
            }
        }
    }

    pub fn nu(&self) -> Option<u32> {
        match *self {
            Marginal::StudentT { nu } | Marginal::AbsStudentT { nu } => Some(nu),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Marginal::Uniform => "uniform",
            Marginal::Normal => "normal",
            Marginal::StudentT { .. } => "t",
            Marginal::AbsNormal => "abs-normal",
            Marginal::AbsStudentT { .. } => "abs-t",
        }
    }

    /// Parse a marginal name (`uniform`, `normal`, `t`, `abs-normal`, `abs-t`,
    /// underscores accepted); `nu` is required for the t variants.
    pub fn parse(name: &str, nu: Option<u32>) -> Result<Self> {
        let need_nu = |nu: Option<u32>| -> Result<u32> {
            match nu {
                Some(v) if v >= 1 => Ok(v),
                Some(v) => Err(Error::range("nu", v as f64, "[1, inf)")),
                None => Err(Error::InvalidModel(format!(
                    "marginal '{name}' requires nu"
                ))),
            }
        };
        match name.replace('_', "-").as_str() {
            "uniform" => Ok(Marginal::Uniform),
            "normal" => Ok(Marginal::Normal),
            "t" => Ok(Marginal::StudentT { nu: need_nu(nu)? }),
            "abs-normal" => Ok(Marginal::AbsNormal),
            "abs-t" => Ok(Marginal::AbsStudentT { nu: need_nu(nu)? }),
            other => Err(Error::InvalidModel(format!(
                "unknown marginal '{other}' (expected uniform|normal|t|abs-normal|abs-t)"
            ))),
        }
    }
}

/// Density of a Student-t variable; used by quadrature cross-checks.
pub fn student_t_pdf(x: f64, nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
    (ln_c - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp()
}
