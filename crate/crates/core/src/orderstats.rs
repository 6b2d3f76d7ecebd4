//! Order-statistic machinery: the `R_n` statistic, exact boundary
//! non-crossing probabilities for iid uniforms, and the pointwise indicator
//! identities that underlie the generalized Simes decomposition.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nondecreasing critical constants `a_k ≤ … ≤ a_n` for the order
/// statistics `X_{k:n}, …, X_{n:n}`. Indices below `k` are unconstrained
/// (equivalently `a_j = −∞`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    n: usize,
    start: usize,
    constants: Vec<f64>,
}

impl Boundary {
    pub fn new(n: usize, start: usize, constants: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::range("n", 0.0, "[1, inf)"));
        }
        if start == 0 || start > n {
            return Err(Error::range("k", start as f64, format!("[1, {n}]")));
        }
        if constants.len() != n - start + 1 {
            return Err(Error::LengthMismatch {
                expected: n - start + 1,
                actual: constants.len(),
            });
        }
        if let Some(v) = constants.iter().find(|v| v.is_nan()) {
            return Err(Error::Parse(format!("boundary constant {v}")));
        }
        check_nondecreasing(&constants)?;
        Ok(Boundary {
            n,
            start,
            constants,
        })
    }

    /// Full boundary `a_1, …, a_n`.
    pub fn full(constants: Vec<f64>) -> Result<Self> {
        Self::new(constants.len(), 1, constants)
    }

    /// Uniform-scale Simes boundary `a_j = jα/n`.
    pub fn simes(n: usize, alpha: f64) -> Result<Self> {
        check_level("alpha", alpha)?;
        Self::full((1..=n).map(|j| j as f64 * alpha / n as f64).collect())
    }

    /// Lower boundary on the negated scale equivalent to the upper-tail
    /// event `{X_{1:n} ≤ b_1, …, X_{n−k+1:n} ≤ b_{n−k+1}}`.
    ///
    /// With `Y = −X`, `Y_{j:n} = −X_{n−j+1:n}`, so the event becomes
    /// `{Y_{j:n} ≥ −b_{n−j+1}, j = k, …, n}`.
    pub fn from_upper(n: usize, k: usize, b: &[f64]) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::range("k", k as f64, format!("[1, {n}]")));
        }
        if b.len() != n - k + 1 {
            return Err(Error::LengthMismatch {
                expected: n - k + 1,
                actual: b.len(),
            });
        }
        check_nondecreasing(b)?;
        let a = (k..=n).map(|j| -b[n - j]).collect();
        Self::new(n, k, a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// First constrained index `k` (1-based).
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// `a_j` for 1-based `j`; `−∞` below the start index.
    pub fn a(&self, j: usize) -> f64 {
        if j < self.start {
            f64::NEG_INFINITY
        } else {
            self.constants[j - self.start]
        }
    }

    pub fn last(&self) -> f64 {
        *self.constants.last().expect("boundary is non-empty")
    }

    /// Text format: header `n k`, then one constant per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.start);
        for c in &self.constants {
            let _ = writeln!(s, "{c:e}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty boundary file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!(
                "boundary header must be 'n k', got '{header}'"
            )));
        }
        let n: usize = parts[0]
            .parse()
            .map_err(|e| Error::Parse(format!("boundary n: {e}")))?;
        let k: usize = parts[1]
            .parse()
            .map_err(|e| Error::Parse(format!("boundary k: {e}")))?;
        let constants = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("boundary constant '{l}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, constants)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}

pub(crate) fn check_nondecreasing(values: &[f64]) -> Result<()> {
    for (i, w) in values.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::NonMonotone {
                index: i + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

pub(crate) fn check_level(name: &'static str, level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::range(name, level, "(0, 1)"))
    }
}

/// Value of `R_n`, in `0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RnValue(pub usize);

impl RnValue {
    pub fn value(self) -> usize {
        self.0
    }
}

fn sorted_checked(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| v.is_nan()) {
        return Err(Error::Parse(format!("statistic value {v}")));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn rn_sorted(sorted: &[f64], boundary: &Boundary) -> usize {
    (boundary.start..=boundary.n)
        .rev()
        .find(|&i| sorted[i - 1] <= boundary.a(i))
        .unwrap_or(0)
}

/// `R_n = max{i : X_{i:n} ≤ a_i}`, or 0 when no index qualifies. Indices
/// below the boundary's start never qualify.
pub fn compute_rn(x: &[f64], boundary: &Boundary) -> Result<RnValue> {
    if x.len() != boundary.n {
        return Err(Error::LengthMismatch {
            expected: boundary.n,
            actual: x.len(),
        });
    }
    let s = sorted_checked(x)?;
    Ok(RnValue(rn_sorted(&s, boundary)))
}

/// Direct evaluation of `{X_{j:n} ≥ a_j for all j ≥ k}`.
pub fn acceptance_event(x: &[f64], boundary: &Boundary) -> Result<bool> {
    if x.len() != boundary.n {
        return Err(Error::LengthMismatch {
            expected: boundary.n,
            actual: x.len(),
        });
    }
    let s = sorted_checked(x)?;
    Ok((boundary.start..=boundary.n).all(|j| s[j - 1] >= boundary.a(j)))
}

/// Neumaier-compensated sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn new(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        v.push(0.0);
        for i in 1..=n {
            v.push(v[i - 1] + (i as f64).ln());
        }
        LnFactorials(v)
    }

    fn binom_pmf(&self, trials: usize, k: usize, p: f64) -> f64 {
        if k > trials {
            return 0.0;
        }
        if p <= 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if p >= 1.0 {
            return if k == trials { 1.0 } else { 0.0 };
        }
        let ln_c = self.0[trials] - self.0[k] - self.0[trials - k];
        (ln_c + k as f64 * p.ln() + (trials - k) as f64 * (-p).ln_1p()).exp()
    }
}

/// Exact `P{U_{i:n} ≥ c_i, i = 1, …, n}` for n iid uniforms.
///
/// Forward recursion over the number `m` of uniforms below each level: given
/// `l` points below `c_{i−1}`, the remaining `n − l` are iid uniform on
/// `(c_{i−1}, 1)`, so the count falling in `(c_{i−1}, c_i]` is binomial. The
/// event requires `m ≤ i − 1` below `c_i`. Every term is a non-negative
/// probability, so no cancellation occurs.
pub fn noncrossing_probability(c: &[f64]) -> Result<f64> {
    let n = c.len();
    if n == 0 {
        return Ok(1.0);
    }
    if let Some((i, &v)) = c
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::range("c_i", v, format!("[0, 1] (index {})", i + 1)));
    }
    check_nondecreasing(c)?;

    let lnf = LnFactorials::new(n);
    let mut state = vec![0.0; n + 1];
    let mut next = vec![0.0; n + 1];
    state[0] = 1.0;
    let mut prev_level = 0.0;
    for (idx, &level) in c.iter().enumerate() {
        let i = idx + 1;
        let remaining = 1.0 - prev_level;
        let p = if remaining > 0.0 {
            ((level - prev_level) / remaining).min(1.0)
        } else {
            1.0
        };
        for m in 0..=n {
            next[m] = 0.0;
        }
        // States reachable before this level: m ≤ i − 2 (or m = 0 at i = 1).
        for m in 0..i {
            let mut acc = CompensatedSum::default();
            for l in 0..=m {
                if state[l] != 0.0 {
                    acc.add(state[l] * lnf.binom_pmf(n - l, m - l, p));
                }
            }
            next[m] = acc.value();
        }
        std::mem::swap(&mut state, &mut next);
        prev_level = level;
    }
    let mut total = CompensatedSum::default();
    for &v in &state {
        total.add(v);
    }
    let p = total.value();
    debug_assert!(
        (-1e-12..=1.0 + 1e-12).contains(&p),
        "non-crossing probability {p} outside [0, 1]"
    );
    Ok(p.clamp(0.0, 1.0))
}

/// Exact `P{X_{k:n} ≥ a_k, …, X_{n:n} ≥ a_n}` for iid draws with marginal
/// CDF `cdf`, via the uniform transform with `c_1 = … = c_{k−1} = 0`.
pub fn tail_event_probability_iid(boundary: &Boundary, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let c: Vec<f64> = (1..=boundary.n)
        .map(|j| {
            if j < boundary.start {
                0.0
            } else {
                cdf(boundary.a(j))
            }
        })
        .collect();
    noncrossing_probability(&c)
}

fn binom_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn require_full(boundary: &Boundary, x: &[f64], k: usize) -> Result<()> {
    if boundary.start != 1 {
        return Err(Error::Precondition(format!(
            "identity checks need a boundary covering 1..n (start is {})",
            boundary.start
        )));
    }
    if x.len() != boundary.n {
        return Err(Error::LengthMismatch {
            expected: boundary.n,
            actual: x.len(),
        });
    }
    if k == 0 || k > boundary.n {
        return Err(Error::range("k", k as f64, format!("[1, {}]", boundary.n)));
    }
    Ok(())
}

/// Falling-factorial identity: with `r = R_n ≥ k`,
/// `r(r−1)⋯(r−k+1) = k! · #{size-k subsets S : max_S X ≤ a_r}`.
pub fn check_factorial_identity(x: &[f64], boundary: &Boundary, k: usize) -> Result<bool> {
    require_full(boundary, x, k)?;
    let r = compute_rn(x, boundary)?.0;
    if r < k {
        return Err(Error::Precondition(format!("R_n = {r} is below k = {k}")));
    }
    let falling: u128 = (0..k).map(|i| (r - i) as u128).product();
    let a_r = boundary.a(r);
    let below = x.iter().filter(|&&v| v <= a_r).count();
    let k_fact: u128 = (1..=k as u128).product();
    Ok(falling == k_fact * binom_u128(below, k))
}

/// Pointwise decomposition of `I(R_n ≥ k)` into size-`k` subset terms and
/// the leave-subset-out statistics `R_{n−k}^{−S}` computed against the
/// shifted boundary `a_{k+1}, …, a_n`. Evaluated in exact integer
/// arithmetic scaled by `lcm{C(r,k) : k ≤ r ≤ n}`; cost is
/// `O(C(n,k) · n log n)`.
pub fn check_decomposition_identity(x: &[f64], boundary: &Boundary, k: usize) -> Result<bool> {
    require_full(boundary, x, k)?;
    let n = boundary.n;
    let sorted = sorted_checked(x)?;
    let lhs_indicator = rn_sorted(&sorted, boundary) >= k;

    let binoms: Vec<u128> = (0..=n).map(|r| binom_u128(r, k)).collect();
    let mut scale: u128 = 1;
    for r in k..=n {
        let b = binoms[r];
        scale = (scale / gcd(scale, b))
            .checked_mul(b)
            .ok_or_else(|| Error::Precondition(format!("n = {n} too large for exact check")))?;
    }
    let w = |r: usize| -> i128 { (scale / binoms[r]) as i128 };

    let mut rhs: i128 = 0;
    let mut rest = Vec::with_capacity(n - k);
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let max_s = subset
            .iter()
            .map(|&i| x[i])
            .fold(f64::NEG_INFINITY, f64::max);
        rest.clear();
        let mut si = 0;
        for (i, &v) in x.iter().enumerate() {
            if si < k && subset[si] == i {
                si += 1;
            } else {
                rest.push(v);
            }
        }
        rest.sort_by(f64::total_cmp);
        let r_rest = (1..=n - k)
            .rev()
            .find(|&i| rest[i - 1] <= boundary.a(k + i))
            .unwrap_or(0);

        if max_s <= boundary.a(k) {
            rhs += scale as i128;
        }
        for r in k + 1..=n {
            if r_rest >= r - k {
                let hi = if max_s <= boundary.a(r - 1) {
                    w(r - 1)
                } else {
                    0
                };
                let lo = if max_s <= boundary.a(r) { w(r) } else { 0 };
                rhs -= hi - lo;
            }
        }

        if !next_combination(&mut subset, n) {
            break;
        }
    }
    let lhs = if lhs_indicator { scale as i128 } else { 0 };
    Ok(lhs == rhs)
}

/// Advances a sorted k-subset of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b3() -> Boundary {
        Boundary::full(vec![0.0167, 0.0333, 0.05]).unwrap()
    }

    #[test]
    fn rn_examples() {
        assert_eq!(compute_rn(&[0.01, 0.02, 0.5], &b3()).unwrap(), RnValue(2));
        assert_eq!(compute_rn(&[0.9, 0.8, 0.7], &b3()).unwrap(), RnValue(0));
        assert_eq!(compute_rn(&[0.04, 0.9, 0.01], &b3()).unwrap(), RnValue(1));
    }

    #[test]
    fn rn_length_mismatch() {
        assert!(matches!(
            compute_rn(&[0.1, 0.2], &b3()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_uniform() {
        assert!((noncrossing_probability(&[0.05]).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn simes_equality_n10() {
        let b = Boundary::simes(10, 0.05).unwrap();
        let p = noncrossing_probability(b.constants()).unwrap();
        assert!((p - 0.95).abs() < 1e-10, "{p}");
    }

    #[test]
    fn extreme_boundaries() {
        assert_eq!(noncrossing_probability(&[0.0; 6]).unwrap(), 1.0);
        assert_eq!(noncrossing_probability(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_boundaries() {
        assert!(matches!(
            noncrossing_probability(&[0.2, 0.1]),
            Err(Error::NonMonotone { .. })
        ));
        assert!(matches!(
            noncrossing_probability(&[0.2, 1.1]),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn single_constraint_is_max_event() {
        // k = n: P{X_{n:n} ≥ a} = 1 − F(a)^n
        let b = Boundary::new(4, 4, vec![0.7]).unwrap();
        let p = tail_event_probability_iid(&b, |x| x).unwrap();
        assert!((p - (1.0 - 0.7f64.powi(4))).abs() < 1e-14);
    }

    #[test]
    fn factorial_identity_example() {
        assert!(check_factorial_identity(&[0.01, 0.02, 0.5], &b3(), 1).unwrap());
        assert!(check_factorial_identity(&[0.01, 0.02, 0.5], &b3(), 2).unwrap());
        assert!(matches!(
            check_factorial_identity(&[0.01, 0.02, 0.5], &b3(), 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decomposition_smallest_case() {
        let b = Boundary::full(vec![0.3, 0.6]).unwrap();
        for x in [[0.1, 0.9], [0.5, 0.4], [0.7, 0.8], [0.2, 0.25]] {
            assert!(check_decomposition_identity(&x, &b, 1).unwrap());
        }
    }

    #[test]
    fn decomposition_k_equals_n() {
        let b = Boundary::full(vec![0.2, 0.4, 0.6]).unwrap();
        for x in [[0.1, 0.5, 0.55], [0.1, 0.5, 0.65], [0.7, 0.1, 0.2]] {
            assert!(check_decomposition_identity(&x, &b, 3).unwrap());
        }
    }

    #[test]
    fn upper_boundary_reflection() {
        let b = Boundary::from_upper(4, 2, &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(b.start(), 2);
        assert_eq!(b.constants(), &[-0.9, -0.5, -0.1]);
    }

    #[test]
    fn boundary_text_round_trip() {
        let b = Boundary::new(5, 2, vec![0.1, 0.2, 0.2, 1.0 / 3.0]).unwrap();
        assert_eq!(Boundary::parse_text(&b.to_text()).unwrap(), b);
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }
}
