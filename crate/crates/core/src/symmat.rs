//! Dense symmetric matrices and the positive-definite kernels the solvers
//! are built on: Cholesky with log-determinant, inversion, rank-2 inverse
//! updates for a single row/column replacement, and inverses of principal
//! submatrices with one index deleted.

use std::fmt;
use std::ops::Index;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative pivot threshold: a Cholesky pivot at or below this fraction of
/// the largest diagonal entry is treated as a loss of definiteness.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Capacitance determinants below this value make a rank-2 update singular.
const SWM_DET_TOL: f64 = 1e-14;

/// Dense symmetric matrix with full storage. Every write goes to both
/// `(i, j)` and `(j, i)`, so the stored entries are exactly symmetric.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMatrix requires n >= 1");
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "SymMatrix requires n >= 1");
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                m.data[(i, j)] = v;
                m.data[(j, i)] = v;
            }
        }
        m
    }

    /// Builds from rows, rejecting anything not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Averages a square matrix with its transpose.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Column `j` as a contiguous slice (equal to row `j`).
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.dim();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.data[(i, j)]).collect())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn frobenius_dist(&self, other: &Self) -> f64 {
        (&self.data - &other.data).norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.data.dot(&other.data)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            data: &self.data * a,
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled_inplace(a, other);
        out
    }

    pub fn add_scaled_inplace(&mut self, a: f64, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * y;
        }
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        Self {
            data: self.data.component_mul(&other.data),
        }
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self {
            data: self.data.map(f),
        }
    }

    /// Elementwise combination of two matrices of equal size.
    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self {
            data: self.data.zip_map(&other.data, |a, b| f(a, b)),
        }
    }

    /// `self * p * self`, symmetrized to remove rounding asymmetry.
    pub fn congruence(&self, p: &Self) -> Self {
        let tmp = &self.data * &p.data;
        Self::symmetrize(&(&tmp * &self.data))
    }

    /// Matrix with row and column `i` removed.
    pub fn delete(&self, i: usize) -> Self {
        let n = self.dim();
        assert!(n >= 2 && i < n, "delete needs n >= 2 and i < n");
        Self {
            data: self.data.clone().remove_row(i).remove_column(i),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.data[idx]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", self.to_rows())
    }
}

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }
}

/// Factors `m` and returns the factor with `log det m`.
pub fn cholesky_logdet(m: &SymMatrix) -> Result<(CholeskyFactor, f64)> {
    let n = m.dim();
    let max_diag = m.diagonal().into_iter().fold(0.0_f64, f64::max);
    let floor = PD_PIVOT_TOL * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) || max_diag <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        logdet += 2.0 * ljj.ln();
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok((CholeskyFactor { lower: l }, logdet))
}

fn inverse_from_cholesky(factor: &CholeskyFactor) -> SymMatrix {
    let l = &factor.lower;
    let n = l.nrows();
    // Forward substitution for L⁻¹, one column at a time.
    let mut linv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s / l[(i, i)];
        }
    }
    SymMatrix::symmetrize(&(linv.transpose() * &linv))
}

pub fn invert_pd(m: &SymMatrix) -> Result<SymMatrix> {
    let (factor, _) = cholesky_logdet(m)?;
    Ok(inverse_from_cholesky(&factor))
}

/// Inverse of `U` after replacing row/column `i` of `U`, where
/// `row_delta[j]` is the change of `U(i, j)` (and `row_delta[i]` the change
/// of the diagonal). The replacement is the symmetric rank-2 update
/// `U + e_i dᵀ + d e_iᵀ` with `d = row_delta` except `d_i = row_delta[i] / 2`.
pub fn swm_update_inverse(inv: &SymMatrix, i: usize, row_delta: &[f64]) -> Result<SymMatrix> {
    let n = inv.dim();
    if row_delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row_delta.len(),
        });
    }
    let mut d = row_delta.to_vec();
    d[i] *= 0.5;

    // z = W d, g = (W d)_i, h = dᵀ W d.
    let w = inv.as_matrix();
    let mut z = vec![0.0; n];
    for (k, &dk) in d.iter().enumerate() {
        if dk != 0.0 {
            for (zr, wr) in z.iter_mut().zip(inv.column(k)) {
                *zr += wr * dk;
            }
        }
    }
    let g = z[i];
    let h: f64 = z.iter().zip(&d).map(|(a, b)| a * b).sum();
    let wii = w[(i, i)];
    let det = (1.0 + g) * (1.0 + g) - h * wii;
    if !(det > SWM_DET_TOL) {
        return Err(Error::SingularUpdate { det });
    }

    // W - [w_i, z] K⁻¹ [zᵀ; w_iᵀ] with K = [[1+g, h], [W_ii, 1+g]].
    let wi = inv.column(i);
    let a = (1.0 + g) / det;
    let hh = h / det;
    let ww = wii / det;
    let mut out = inv.clone();
    for c in 0..n {
        for r in 0..=c {
            let corr = a * (wi[r] * z[c] + z[r] * wi[c]) - hh * wi[r] * wi[c] - ww * z[r] * z[c];
            out.set(r, c, w[(r, c)] - corr);
        }
    }
    Ok(out)
}

/// Inverse of `U` with row/column `i` deleted, from `inv = U⁻¹`, via
/// `inv(-i,-i) - inv(-i,i) inv(i,-i) / inv(i,i)`.
pub fn sub_inverse(inv: &SymMatrix, i: usize) -> SymMatrix {
    let n = inv.dim();
    assert!(n >= 2 && i < n, "sub_inverse needs n >= 2 and i < n");
    let col = inv.column(i);
    let wii = col[i];
    let idx: Vec<usize> = (0..n).filter(|&k| k != i).collect();
    SymMatrix::from_fn(n - 1, |a, b| {
        let (ka, kb) = (idx[a], idx[b]);
        inv.get(ka, kb) - col[ka] * col[kb] / wii
    })
}

/// A positive-definite matrix with its cached inverse and log-determinant.
#[derive(Clone, Debug)]
pub struct PdFactor {
    matrix: SymMatrix,
    inverse: SymMatrix,
    logdet: f64,
}

impl PdFactor {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let (factor, logdet) = cholesky_logdet(&matrix)?;
        let inverse = inverse_from_cholesky(&factor);
        Ok(Self {
            matrix,
            inverse,
            logdet,
        })
    }

    /// Assembles a factor from parts maintained elsewhere (e.g. by rank-2
    /// updates). The caller vouches that the parts are consistent.
    pub fn from_parts(matrix: SymMatrix, inverse: SymMatrix, logdet: f64) -> Self {
        Self {
            matrix,
            inverse,
            logdet,
        }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &SymMatrix {
        &self.inverse
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }
}
