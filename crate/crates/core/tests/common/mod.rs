//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical routines.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Random correlation matrix `D^{-1/2} (B Bᵀ + εI) D^{-1/2}`.
pub fn random_correlation(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] =
                (0..n).map(|t| b[i][t] * b[j][t]).sum::<f64>() + if i == j { 0.2 } else { 0.0 };
        }
    }
    let d: Vec<f64> = (0..n).map(|i| s[i][i].sqrt()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = if i == j { 1.0 } else { s[i][j] / (d[i] * d[j]) };
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[i][j] = out[j][i];
        }
    }
    out
}

/// Random correlation matrix with every entry nonnegative.
pub fn random_nonnegative_correlation(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] =
                (0..n).map(|t| b[i][t] * b[j][t]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    let d: Vec<f64> = (0..n).map(|i| s[i][i].sqrt()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = if i == j { 1.0 } else { s[i][j] / (d[i] * d[j]) };
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[i][j] = out[j][i];
        }
    }
    out
}

/// All signatures `d` with `d_0 = +1` satisfying `d_i d_j p_ij ≤ tol`.
pub fn brute_force_signatures(p: &[Vec<f64>], tol: f64) -> Vec<Vec<i8>> {
    let n = p.len();
    let mut found = Vec::new();
    for mask in 0..(1u32 << n.saturating_sub(1)) {
        let d: Vec<i8> = (0..n)
            .map(|i| {
                if i > 0 && mask & (1 << (i - 1)) != 0 {
                    -1
                } else {
                    1
                }
            })
            .collect();
        let ok = (0..n)
            .all(|i| (0..n).all(|j| i == j || (d[i] as f64) * (d[j] as f64) * p[i][j] <= tol));
        if ok {
            found.push(d);
        }
    }
    found
}

type Poly = Vec<BigRational>;

fn eval(p: &Poly, t: &BigRational) -> BigRational {
    p.iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * t + c)
}

fn antiderivative(p: &Poly) -> Poly {
    let mut q = vec![BigRational::zero()];
    for (i, c) in p.iter().enumerate() {
        q.push(c / BigRational::from_integer(BigInt::from(i + 1)));
    }
    q
}

/// Exact `P{U_(i) ≥ c_i ∀ i}` for iid uniforms by integrating over the
/// ordered simplex: `V_m(t) = ∫_{c_m}^t V_{m−1}(s) ds` on `[c_m, 1]`, which is
/// a single polynomial because `c` is nondecreasing; the answer is `n!·V_n(1)`.
pub fn noncrossing_rational(c: &[BigRational]) -> BigRational {
    let one = BigRational::one();
    let mut v: Poly = vec![one.clone()];
    for cm in c {
        if *cm >= one {
            return BigRational::zero();
        }
        let g = antiderivative(&v);
        let shift = eval(&g, cm);
        v = g;
        v[0] -= shift;
    }
    let fact: BigInt = (1..=c.len()).map(BigInt::from).product();
    eval(&v, &one) * BigRational::from_integer(fact)
}

pub fn noncrossing_oracle(c: &[f64]) -> f64 {
    let r: Vec<BigRational> = c
        .iter()
        .map(|&x| BigRational::from_float(x).expect("finite"))
        .collect();
    noncrossing_rational(&r).to_f64().unwrap()
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Standard normal CDF by integrating the density from −12 (or to +12).
pub fn phi_oracle(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x <= 0.0 {
        adaptive_simpson(&pdf, -14.0, x, 1e-15)
    } else {
        1.0 - adaptive_simpson(&pdf, x, 14.0, 1e-15)
    }
}

/// `P(X₁ ≤ x, X₂ ≤ x)` for a standard bivariate normal with correlation
/// `rho`, via `∂Φ₂/∂ρ = φ₂`: `Φ(x)² + ∫₀^ρ exp(−x²/(1+r)) / (2π√(1−r²)) dr`.
pub fn bivariate_max_cdf_oracle(rho: f64, x: f64) -> f64 {
    let p = phi_oracle(x);
    let dens =
        |r: f64| (-x * x / (1.0 + r)).exp() / (2.0 * std::f64::consts::PI * (1.0 - r * r).sqrt());
    p * p + adaptive_simpson(&dens, 0.0, rho, 1e-14)
}

fn ln_gamma_oracle(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Student-t CDF for `x ≤ 0` by integrating the density after the
/// substitution `t = x − s/(1−s)` onto `(0, 1)`.
pub fn t_cdf_oracle(x: f64, nu: f64) -> f64 {
    let c = (ln_gamma_oracle(0.5 * (nu + 1.0)) - ln_gamma_oracle(0.5 * nu)).exp()
        / (nu * std::f64::consts::PI).sqrt();
    let dens = |t: f64| c * (1.0 + t * t / nu).powf(-0.5 * (nu + 1.0));
    if x > 0.0 {
        return 1.0 - t_cdf_oracle(-x, nu);
    }
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let t = x - s / (1.0 - s);
        dens(t) / ((1.0 - s) * (1.0 - s))
    };
    adaptive_simpson(&g, 0.0, 1.0 - 1e-12, 1e-15)
}

/// Bisection on [`t_cdf_oracle`].
pub fn t_quantile_oracle(p: f64, nu: f64) -> f64 {
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if t_cdf_oracle(m, nu) < p {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Counts of `T_n = t` over all `C(2n, n)` placements of the x's among the
/// pooled ranks.
pub fn tn_counts_by_enumeration(n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n + 1];
    for mask in 0u32..(1 << (2 * n)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let xs: Vec<usize> = (0..2 * n).filter(|r| mask & (1 << r) != 0).collect();
        let ys: Vec<usize> = (0..2 * n).filter(|r| mask & (1 << r) == 0).collect();
        let t = (1..=n)
            .filter(|&i| xs[i - 1] <= ys[i - 1])
            .max()
            .unwrap_or(0);
        counts[t] += 1;
    }
    counts
}
