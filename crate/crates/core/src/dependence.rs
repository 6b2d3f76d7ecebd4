//! Correlation structures and the Gaussian sufficient conditions for MTP₂.
//!
//! For `N(0, Σ)` the density is MTP₂ exactly when every off-diagonal entry of
//! `Σ⁻¹` is non-positive; `|N(0, Σ)|` is MTP₂ when some ±1 signature `D`
//! makes every off-diagonal of `DΣ⁻¹D` non-positive. The second question is
//! balance of the signed graph on the precision matrix and is answered with a
//! parity union-find.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest eigenvalue admitted when storing a correlation matrix.
pub const PSD_FLOOR: f64 = -1e-10;
/// Pivot floor below which the Cholesky factorization reports singularity.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Default zero threshold for precision-matrix sign decisions.
pub const DEFAULT_SIGN_TOL: f64 = 1e-10;

/// Dense row-major square matrix used for factors and inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor(Matrix);

impl CholeskyFactor {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    /// Writes `L·g` into `out`.
    pub fn mul_vec(&self, g: &[f64], out: &mut [f64]) {
        let n = self.0.n;
        for i in 0..n {
            let row = self.0.row(i);
            let mut acc = 0.0;
            for j in 0..=i {
                acc += row[j] * g[j];
            }
            out[i] = acc;
        }
    }

    /// Solves `L·y = b` in place.
    fn forward_solve(&self, b: &mut [f64]) {
        let n = self.0.n;
        for i in 0..n {
            let row = self.0.row(i);
            let mut acc = b[i];
            for j in 0..i {
                acc -= row[j] * b[j];
            }
            b[i] = acc / row[i];
        }
    }
}

/// Symmetric, unit-diagonal, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry (exact), unit diagonal (exact) and PSD (smallest
    /// eigenvalue ≥ −1e-10). `entries` is row-major `n×n`.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {v}")));
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry ({i},{i}) is {} instead of 1",
                    entries[i * n + i]
                )));
            }
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidMatrix(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        let m = DMatrix::from_row_slice(n, n, &entries);
        let min_eig = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_FLOOR {
            return Err(Error::InvalidMatrix(format!(
                "not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(CorrelationMatrix { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        equicorrelated(n, 0.0).expect("identity is a valid correlation matrix")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn as_matrix(&self) -> Matrix {
        Matrix {
            n: self.n,
            data: self.entries.clone(),
        }
    }

    /// `Some(rho)` when every off-diagonal entry equals the same value.
    pub fn common_correlation(&self) -> Option<f64> {
        if self.n == 1 {
            return Some(0.0);
        }
        let rho = self.get(0, 1);
        (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j)))
            .all(|(i, j)| self.get(i, j) == rho)
            .then_some(rho)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.min(self.get(i, j));
                }
            }
        }
        m
    }

    /// Reads the text format: first line `n`, then `n` lines of `n`
    /// whitespace-separated decimals.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("matrix dimension: {e}")))?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing matrix row {}", i + 1)))?;
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: '{t}': {e}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if lines.next().is_some() {
            return Err(Error::Parse(format!("trailing data after {n} rows")));
        }
        Self::from_rows(&rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    /// Writes the text format with 17 significant digits so that parsing the
    /// output reproduces every entry exactly.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for row in self.entries.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        CorrelationMatrix::from_rows(&rows)
    }
}

impl From<CorrelationMatrix> for Vec<Vec<f64>> {
    fn from(m: CorrelationMatrix) -> Self {
        m.rows()
    }
}

/// ±1 diagonal signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    signs: Vec<i8>,
}

impl SignatureMatrix {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidMatrix(format!(
                "signature entry {s} is not ±1"
            )));
        }
        Ok(SignatureMatrix { signs })
    }

    pub fn all_plus(n: usize) -> Self {
        SignatureMatrix { signs: vec![1; n] }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `max_{i≠j} d_i d_j P[i][j]`, i.e. the worst violation of the
    /// non-positivity requirement on `DPD`.
    pub fn max_signed_off_diagonal(&self, precision: &Matrix) -> f64 {
        let n = self.signs.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let s = (self.signs[i] * self.signs[j]) as f64;
                    worst = worst.max(s * precision[(i, j)]);
                }
            }
        }
        worst
    }
}

/// Equicorrelated matrix: 1 on the diagonal, `rho` elsewhere.
pub fn equicorrelated(n: usize, rho: f64) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::InvalidMatrix("dimension must be positive".into()));
    }
    if n == 1 {
        return Ok(CorrelationMatrix {
            n,
            entries: vec![1.0],
        });
    }
    let lo = -1.0 / (n as f64 - 1.0);
    if !(rho >= lo && rho <= 1.0) {
        return Err(Error::range("rho", rho, format!("[{lo}, 1]")));
    }
    let mut entries = vec![rho; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
    }
    Ok(CorrelationMatrix { n, entries })
}

/// Cholesky factorization; fails with [`Error::Singular`] when a pivot
/// drops below 1e-12.
pub fn cholesky_factor(sigma: &CorrelationMatrix) -> Result<CholeskyFactor> {
    let n = sigma.n;
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = sigma.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d >= PIVOT_FLOOR) {
            return Err(Error::Singular { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = sigma.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor(l))
}

/// `Σ⁻¹` via the Cholesky factor: `Σ⁻¹ = L⁻ᵀL⁻¹`. The result is exactly
/// symmetric.
pub fn precision_matrix(sigma: &CorrelationMatrix) -> Result<Matrix> {
    let l = cholesky_factor(sigma)?;
    let n = sigma.n;
    // Columns of L⁻¹.
    let mut linv = Matrix::zeros(n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        l.forward_solve(&mut col);
        for i in 0..n {
            linv[(i, j)] = col[i];
        }
    }
    let mut p = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in i.max(j)..n {
                acc += linv[(k, i)] * linv[(k, j)];
            }
            p[(i, j)] = acc;
            p[(j, i)] = acc;
        }
    }
    Ok(p)
}

/// True iff every off-diagonal entry of `Σ⁻¹` is ≤ `tol`.
pub fn mtp2_normal_check(sigma: &CorrelationMatrix, tol: f64) -> Result<bool> {
    let p = precision_matrix(sigma)?;
    Ok(precision_off_diagonals_nonpositive(&p, tol))
}

pub(crate) fn precision_off_diagonals_nonpositive(p: &Matrix, tol: f64) -> bool {
    let n = p.dim();
    (0..n).all(|i| (0..n).all(|j| i == j || p[(i, j)] <= tol))
}

/// Finds a signature `D` with `d_i d_j (Σ⁻¹)[i][j] ≤ tol` for all `i ≠ j`,
/// or `None` when the sign graph of the precision matrix is unbalanced.
pub fn sign_balance_check(sigma: &CorrelationMatrix, tol: f64) -> Result<Option<SignatureMatrix>> {
    let p = precision_matrix(sigma)?;
    Ok(balance_signature(&p, tol))
}

/// Two-colouring with parity constraints on the graph whose edges are the
/// precision entries with `|p_ij| > tol`. A positive entry forces opposite
/// signs, a negative entry equal signs. Component roots are `+1`.
pub fn balance_signature(p: &Matrix, tol: f64) -> Option<SignatureMatrix> {
    let n = p.dim();
    let mut uf = ParityUnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = p[(i, j)];
            if v.abs() > tol && !uf.union(i, j, v > 0.0) {
                return None;
            }
        }
    }
    let signs = (0..n).map(|i| if uf.find(i).1 { -1 } else { 1 }).collect();
    Some(SignatureMatrix { signs })
}

/// Union-find where every node carries its parity relative to its parent.
struct ParityUnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    parity: Vec<bool>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
            parity: vec![false; n],
        }
    }

    /// Root of `x` and the parity of `x` relative to it.
    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (root, par) = self.find(p);
        self.parity[x] ^= par;
        self.parent[x] = root;
        (root, self.parity[x])
    }

    /// Records `parity(a) ^ parity(b) == differ`; false on contradiction.
    fn union(&mut self, a: usize, b: usize, differ: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa ^ pb) == differ;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo] = hi;
        self.parity[lo] = pa ^ pb ^ differ;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        true
    }
}
