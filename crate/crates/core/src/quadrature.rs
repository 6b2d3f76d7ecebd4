//! Quadrature for the one-factor equicorrelated normal model and its
//! studentized mixture.
//!
//! An equicorrelated `N(0, Σ)` vector with common correlation `ρ ≥ 0` can be
//! written `X_i = √ρ·Z₀ + √(1−ρ)·E_i` with `Z₀, E_i` iid standard normal, so
//! joint events of the `X_i` reduce to one-dimensional integrals over `Z₀`.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::dist::{normal_cdf, normal_sf};

/// Starting Gauss–Hermite node count.
pub const GH_START: usize = 64;
/// Largest node count tried; the orthonormal recurrence overflows beyond
/// about 700 nodes.
pub const GH_MAX: usize = 512;
/// Two successive node counts must agree to this absolute tolerance.
pub const GH_AGREEMENT: f64 = 1e-9;

/// Nodes and weights for `∫ e^{−x²} f(x) dx`.
#[derive(Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch eigenvalues of the Jacobi matrix seed the nodes; each is
    /// then polished by Newton steps on the orthonormal Hermite recurrence,
    /// which also yields the weight `2/ψ'_n(x)²`.
    fn compute(n: usize) -> Self {
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut seeds: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        seeds.sort_by(|a, b| b.total_cmp(a));
        let nf = n as f64;
        let recurrence = |z: f64| {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            (p1, (2.0 * nf).sqrt() * p2)
        };
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = seeds[i];
            let mut pp = recurrence(z).1;
            for _ in 0..20 {
                let (p1, d) = recurrence(z);
                pp = d;
                let z1 = z;
                z = z1 - p1 / d;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    pp = recurrence(z).1;
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        GaussHermite {
            nodes: x,
            weights: w,
        }
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2;
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if w > 0.0 {
                acc += w * f(scale * x);
            }
        }
        acc / std::f64::consts::PI.sqrt()
    }
}

/// Memoized rule with `n` nodes; `n` must be one of 64, 128, 256, 512.
pub fn gauss_hermite(n: usize) -> &'static GaussHermite {
    static RULES: [OnceLock<GaussHermite>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let slot = match n {
        64 => 0,
        128 => 1,
        256 => 2,
        512 => 3,
        _ => panic!("unsupported Gauss-Hermite node count {n}"),
    };
    RULES[slot].get_or_init(|| GaussHermite::compute(n))
}

/// `E[f(Z)]`, `Z ~ N(0,1)`, starting at 64 nodes and doubling until two
/// successive evaluations agree to 1e-9 (or 512 nodes are reached).
pub fn expect_standard_normal(f: impl Fn(f64) -> f64) -> f64 {
    let mut n = GH_START;
    let mut prev = gauss_hermite(n).expect(&f);
    while n < GH_MAX {
        n *= 2;
        let cur = gauss_hermite(n).expect(&f);
        if (cur - prev).abs() <= GH_AGREEMENT {
            return cur;
        }
        prev = cur;
    }
    prev
}

fn factor_scales(rho: f64) -> (f64, f64) {
    (rho.sqrt(), (1.0 - rho).sqrt())
}

/// `P(max of k equicorrelated standard normals ≤ x)`.
pub fn equi_normal_max_cdf(k: u32, rho: f64, x: f64) -> f64 {
    let (a, s) = factor_scales(rho);
    expect_standard_normal(|z| normal_cdf((x - a * z) / s).powi(k as i32)).clamp(0.0, 1.0)
}

/// `P(min of k equicorrelated standard normals ≤ x)`.
pub fn equi_normal_min_cdf(k: u32, rho: f64, x: f64) -> f64 {
    let (a, s) = factor_scales(rho);
    (1.0 - expect_standard_normal(|z| normal_sf((x - a * z) / s).powi(k as i32))).clamp(0.0, 1.0)
}

/// Conditional probabilities `P(|X| ≤ x | Z₀ = z)` and its complement.
fn abs_inside(a: f64, s: f64, x: f64, z: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let hi = (x - a * z) / s;
    let lo = (-x - a * z) / s;
    let outside = normal_sf(hi) + normal_cdf(lo);
    let inside = if hi > 0.0 && lo < 0.0 {
        1.0 - outside
    } else if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    };
    (inside.max(0.0), outside.min(1.0))
}

/// `P(max of k equicorrelated |normals| ≤ x)`.
pub fn equi_abs_normal_max_cdf(k: u32, rho: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (a, s) = factor_scales(rho);
    expect_standard_normal(|z| abs_inside(a, s, x, z).0.powi(k as i32)).clamp(0.0, 1.0)
}

/// `P(min of k equicorrelated |normals| ≤ x)`.
pub fn equi_abs_normal_min_cdf(k: u32, rho: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (a, s) = factor_scales(rho);
    (1.0 - expect_standard_normal(|z| abs_inside(a, s, x, z).1.powi(k as i32))).clamp(0.0, 1.0)
}

/// Trapezoid rule in `s = ln z` for `Z = √(χ²_ν/ν)`.
#[derive(Debug)]
pub struct ChiScaleRule {
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ChiScaleRule {
    /// Log density of `S = ln Z` is `c + νs − νe^{2s}/2`: analytic with
    /// doubly-exponential decay to the right and exponential to the left, so
    /// the trapezoid rule converges geometrically in the step size.
    pub fn new(nu: u32, step_scale: f64) -> Self {
        let nu_f = nu as f64;
        let c = std::f64::consts::LN_2 + 0.5 * nu_f * (0.5 * nu_f).ln() - ln_gamma(0.5 * nu_f);
        let log_density = |s: f64| c + nu_f * s - 0.5 * nu_f * (2.0 * s).exp();
        let peak = log_density(0.0);
        let cutoff = peak - 60.0;
        let h = step_scale * (0.25 / nu_f.sqrt()).min(0.1);
        let mut lo = 0.0;
        while log_density(lo) > cutoff {
            lo -= h;
        }
        let mut hi = 0.0;
        while log_density(hi) > cutoff {
            hi += h;
        }
        let count = ((hi - lo) / h).round() as usize + 1;
        let mut scales = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for i in 0..count {
            let s = lo + i as f64 * h;
            scales.push(s.exp());
            weights.push((log_density(s) - peak).exp());
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        ChiScaleRule { scales, weights }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.scales
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Memoized default rule per degrees of freedom.
pub fn chi_scale_rule(nu: u32) -> std::sync::Arc<ChiScaleRule> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex};
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<ChiScaleRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("chi rule cache poisoned");
    guard
        .entry(nu)
        .or_insert_with(|| Arc::new(ChiScaleRule::new(nu, 1.0)))
        .clone()
}

/// `E[g(x·Z)]` with `Z = √(χ²_ν/ν)`: turns a normal-model CDF `g` into the
/// CDF of the studentized model, since `T ≤ x ⇔ X ≤ xZ`.
pub fn studentize(nu: u32, x: f64, g: impl Fn(f64) -> f64) -> f64 {
    chi_scale_rule(nu).expect(|z| g(x * z)).clamp(0.0, 1.0)
}
