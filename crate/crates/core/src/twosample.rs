//! Distribution-free two-sample test based on
//! `T_n = max{i : X_{i:n} ≤ Y_{i:n}}` (0 when no index qualifies).
//!
//! Under `F = G` every interleaving of the pooled sample is equally likely.
//! `X_{i:n} ≤ Y_{i:n}` holds exactly when the i-th x precedes the i-th y in
//! the pooled order, so the null distribution is a lattice-path count.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::orderstats::check_level;
use crate::{Error, Result};

/// Largest `n` accepted by [`tn_null_distribution`].
pub const MAX_NULL_N: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TwoSampleData {
    /// Equal lengths ≥ 1, no NaN, no value shared between `x` and `y`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::range("n", 0.0, "[1, inf)"));
        }
        if let Some(v) = x.iter().chain(&y).find(|v| v.is_nan()) {
            return Err(Error::Parse(format!("sample value {v}")));
        }
        let mut xs = x.clone();
        let mut ys = y.clone();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            if xs[i] == ys[j] {
                return Err(Error::CrossPoolTie { value: xs[i] });
            }
            if xs[i] < ys[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(TwoSampleData { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn swapped(&self) -> Self {
        TwoSampleData {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

/// Indices `i` (1-based) with `X_{i:n} ≤ Y_{i:n}`.
pub fn satisfied_indices(data: &TwoSampleData) -> Vec<usize> {
    let mut xs = data.x.clone();
    let mut ys = data.y.clone();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    (1..=xs.len()).filter(|&i| xs[i - 1] <= ys[i - 1]).collect()
}

pub fn tn_statistic(data: &TwoSampleData) -> usize {
    satisfied_indices(data).last().copied().unwrap_or(0)
}

/// Exact null law of `T_n` as interleaving counts over `C(2n, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    n: usize,
    counts: Vec<BigUint>,
    total: BigUint,
}

impl NullDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of interleavings with `T_n = t`, `t = 0..=n`.
    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// `C(2n, n)`.
    pub fn total(&self) -> &BigUint {
        &self.total
    }

    pub fn exact_pmf(&self) -> Vec<BigRational> {
        self.counts
            .iter()
            .map(|c| BigRational::new(c.clone().into(), self.total.clone().into()))
            .collect()
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.exact_pmf().iter().map(ratio_to_f64).collect()
    }

    /// `P₀(T_n ≥ t)` in exact arithmetic.
    pub fn exact_upper_tail(&self, t: usize) -> BigRational {
        if t > self.n {
            return BigRational::zero();
        }
        let num: BigUint = self.counts[t..].iter().sum();
        BigRational::new(num.into(), self.total.clone().into())
    }

    pub fn upper_tail(&self, t: usize) -> f64 {
        ratio_to_f64(&self.exact_upper_tail(t))
    }

    /// Every attainable p-value `P₀(T_n ≥ t)`, `t = 0..=n`.
    pub fn attainable_p_values(&self) -> Vec<f64> {
        (0..=self.n).map(|t| self.upper_tail(t)).collect()
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 0..k {
        r *= n - i;
        r /= i + 1;
    }
    r
}

/// Exact null distribution of `T_n` for `1 ≤ n ≤ 200`.
///
/// `T_n = t ≥ 1` means the t-th x is placed while fewer than `t` y's have
/// been seen, and afterwards every x placed at height `a` finds at least `a`
/// y's already placed. Writing `g(a, b)` for the number of completions from
/// `a` x's and `b` y's that satisfy the second condition,
/// `#{T_n = t} = Σ_{b<t} C(t−1+b, b) · g(t, b)` and `#{T_n = 0} = g(0, 0)`.
pub fn tn_null_distribution(n: usize) -> Result<NullDistribution> {
    if n == 0 || n > MAX_NULL_N {
        return Err(Error::range("n", n as f64, format!("[1, {MAX_NULL_N}]")));
    }
    let w = n + 1;
    let mut g = vec![BigUint::zero(); w * w];
    g[n * w + n] = BigUint::one();
    for a in (0..=n).rev() {
        for b in (0..=n).rev() {
            if a == n && b == n {
                continue;
            }
            let mut v = BigUint::zero();
            if a < n && b > a {
                v += &g[(a + 1) * w + b];
            }
            if b < n {
                v += &g[a * w + b + 1];
            }
            g[a * w + b] = v;
        }
    }
    let mut counts = Vec::with_capacity(w);
    counts.push(g[0].clone());
    for t in 1..=n {
        let mut c = BigUint::zero();
        for b in 0..t {
            c += binomial(t - 1 + b, b) * &g[t * w + b];
        }
        counts.push(c);
    }
    let total = binomial(2 * n, n);
    debug_assert_eq!(counts.iter().sum::<BigUint>(), total);
    Ok(NullDistribution { n, counts, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleOutcome {
    pub n: usize,
    pub statistic: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_pmf: Option<Vec<f64>>,
}

/// One-sided test of `F = G` against `G` stochastically larger than `F`;
/// large `T_n` is evidence for the alternative.
pub fn tn_test(data: &TwoSampleData, alpha: f64) -> Result<TwoSampleOutcome> {
    check_level("alpha", alpha)?;
    let null = tn_null_distribution(data.n())?;
    Ok(tn_test_with(data, alpha, &null))
}

/// As [`tn_test`] with a precomputed null distribution for the same `n`.
pub fn tn_test_with(data: &TwoSampleData, alpha: f64, null: &NullDistribution) -> TwoSampleOutcome {
    assert_eq!(
        null.n(),
        data.n(),
        "null distribution built for a different n"
    );
    let statistic = tn_statistic(data);
    let p_value = null.upper_tail(statistic);
    TwoSampleOutcome {
        n: data.n(),
        statistic,
        p_value,
        alpha,
        reject: p_value <= alpha,
        null_pmf: None,
    }
}
