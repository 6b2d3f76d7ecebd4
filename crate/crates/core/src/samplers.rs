//! Seeded draws from multivariate normal and multivariate t models.
//!
//! Stream rule: replication `r` of a run with seed `s` draws its Gaussian
//! vector from ChaCha8 keyed by `(s, Lane::Gaussian)` on stream `r`, and its
//! chi variate from ChaCha8 keyed by `(s, Lane::Chi)` on stream `r`. Output
//! therefore depends only on `(model, seed, r)`, never on how replications
//! are partitioned across workers.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dependence::{cholesky_factor, CholeskyFactor, CorrelationMatrix};
use crate::dist::Marginal;
use crate::{Error, Result};

/// Chi-square draws use a sum of squared normals up to this many degrees of
/// freedom and gamma rejection sampling above.
pub const CHI_SUM_LIMIT: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    T,
    AbsNormal,
    AbsT,
}

impl Family {
    pub fn is_t(self) -> bool {
        matches!(self, Family::T | Family::AbsT)
    }

    pub fn is_abs(self) -> bool {
        matches!(self, Family::AbsNormal | Family::AbsT)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::T => "t",
            Family::AbsNormal => "abs_normal",
            Family::AbsT => "abs_t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "normal" => Ok(Family::Normal),
            "t" => Ok(Family::T),
            "abs_normal" => Ok(Family::AbsNormal),
            "abs_t" => Ok(Family::AbsT),
            other => Err(Error::InvalidModel(format!(
                "unknown family '{other}' (expected normal|t|abs_normal|abs_t)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub sigma: CorrelationMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<u32>,
}

impl ModelSpec {
    pub fn new(family: Family, sigma: CorrelationMatrix, nu: Option<u32>) -> Result<Self> {
        let m = ModelSpec { family, sigma, nu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.family.is_t(), self.nu) {
            (true, None) => Err(Error::InvalidModel(format!(
                "family '{}' requires nu",
                self.family.name()
            ))),
            (true, Some(0)) => Err(Error::range("nu", 0.0, "[1, inf)")),
            (false, Some(_)) => Err(Error::InvalidModel(format!(
                "family '{}' does not take nu",
                self.family.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// Common univariate marginal of every coordinate.
    pub fn marginal(&self) -> Marginal {
        match (self.family, self.nu) {
            (Family::Normal, _) => Marginal::Normal,
            (Family::AbsNormal, _) => Marginal::AbsNormal,
            (Family::T, Some(nu)) => Marginal::StudentT { nu },
            (Family::AbsT, Some(nu)) => Marginal::AbsStudentT { nu },
            (_, None) => unreachable!("validated model"),
        }
    }
}

/// Independent RNG lanes per replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Gaussian,
    Chi,
    /// Free-form draws (e.g. two-sample null simulation).
    Aux,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(seed, lane)` positioned on stream `rep`.
pub fn replication_rng(seed: u64, rep: u64, lane: Lane) -> ChaCha8Rng {
    let tag: u64 = match lane {
        Lane::Gaussian => 0x6761_7573,
        Lane::Chi => 0x0063_6869,
        Lane::Aux => 0x0061_7578,
    };
    let mut state = seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(rep);
    rng
}

/// One draw of `√(χ²_ν / ν)`.
pub fn chi_over_sqrt_nu<R: Rng + ?Sized>(nu: u32, rng: &mut R) -> f64 {
    assert!(nu >= 1, "nu must be positive");
    let chi2 = if nu <= CHI_SUM_LIMIT {
        (0..nu)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                g * g
            })
            .sum::<f64>()
    } else {
        let gamma = Gamma::new(0.5 * nu as f64, 2.0).expect("valid gamma parameters");
        rng.sample(gamma)
    };
    (chi2 / nu as f64).sqrt()
}

/// Per-model sampling state; holds the Cholesky factor.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: ModelSpec,
    chol: CholeskyFactor,
}

impl Sampler {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let chol = cholesky_factor(&model.sigma)?;
        Ok(Sampler {
            model: model.clone(),
            chol,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Draws replication `rep` into `out` (length n); `scratch` must also
    /// have length n.
    pub fn draw(&self, seed: u64, rep: u64, out: &mut [f64], scratch: &mut [f64]) {
        let mut g_rng = replication_rng(seed, rep, Lane::Gaussian);
        for g in scratch.iter_mut() {
            *g = g_rng.sample(StandardNormal);
        }
        self.chol.mul_vec(scratch, out);
        if let Some(nu) = self.model.nu {
            let mut c_rng = replication_rng(seed, rep, Lane::Chi);
            let z = chi_over_sqrt_nu(nu, &mut c_rng);
            out.iter_mut().for_each(|v| *v /= z);
        }
        if self.model.family.is_abs() {
            out.iter_mut().for_each(|v| *v = v.abs());
        }
    }
}

/// `reps × n` draws with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub model: ModelSpec,
    pub seed: u64,
    pub reps: usize,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.dim();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Text format: a `#batch` header holding the JSON model descriptor,
    /// then one whitespace-separated row per replication.
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            model: &'a ModelSpec,
            seed: u64,
            reps: usize,
        }
        let header = serde_json::to_string(&Header {
            model: &self.model,
            seed: self.seed,
            reps: self.reps,
        })
        .expect("batch header serializes");
        let mut s = format!("#batch {header}\n");
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            model: ModelSpec,
            seed: u64,
            reps: usize,
        }
        let mut lines = text.lines();
        let first = lines
            .next()
            .and_then(|l| l.strip_prefix("#batch "))
            .ok_or_else(|| Error::Parse("missing '#batch' header".into()))?;
        let h: Header =
            serde_json::from_str(first).map_err(|e| Error::Parse(format!("batch header: {e}")))?;
        let n = h.model.dim();
        let mut values = Vec::with_capacity(h.reps * n);
        let mut rows = 0;
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let before = values.len();
            for t in line.split_whitespace() {
                values.push(
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("batch row {}: {e}", i + 1)))?,
                );
            }
            if values.len() - before != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: values.len() - before,
                });
            }
            rows += 1;
        }
        if rows != h.reps {
            return Err(Error::LengthMismatch {
                expected: h.reps,
                actual: rows,
            });
        }
        Ok(SampleBatch {
            model: h.model,
            seed: h.seed,
            reps: h.reps,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}

/// Draws `reps` replications; rows are computed in parallel but each row
/// depends only on `(model, seed, row index)`.
pub fn sample(model: &ModelSpec, reps: usize, seed: u64) -> Result<SampleBatch> {
    if reps == 0 {
        return Err(Error::range("reps", 0.0, "[1, inf)"));
    }
    let sampler = Sampler::new(model)?;
    let n = model.dim();
    let mut values = vec![0.0; reps * n];
    values.par_chunks_mut(n).enumerate().for_each_init(
        || vec![0.0; n],
        |scratch, (r, row)| sampler.draw(seed, r as u64, row, scratch),
    );
    Ok(SampleBatch {
        model: model.clone(),
        seed,
        reps,
        values,
    })
}

/// Entrywise marginal CDF, mapping statistics to the uniform scale.
pub fn prob_transform(values: &[f64], marginal: Marginal) -> Vec<f64> {
    values.iter().map(|&v| marginal.cdf(v)).collect()
}
