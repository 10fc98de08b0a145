//! Small dense/sparse helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GqfiError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Symplectic form `[[0, 1], [-1, 0]]` in (x..., p...) ordering.
pub fn symplectic(m: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        s[(j, m + j)] = 1.0;
        s[(m + j, j)] = -1.0;
    }
    s
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| C64::new(v, 0.0))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_c(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eig(a: &CMatrix) -> f64 {
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `gamma + i sigma / 2`; non-negative for physical states.
pub fn uncertainty_margin(gamma: &DMatrix<f64>) -> f64 {
    let m = gamma.nrows() / 2;
    let s = symplectic(m);
    let a = CMatrix::from_fn(2 * m, 2 * m, |i, j| C64::new(gamma[(i, j)], 0.5 * s[(i, j)]));
    min_hermitian_eig(&a)
}

/// Eigen-decomposition of a general real matrix. Eigenvectors are columns of
/// the returned matrix, each normalized to unit 2-norm.
pub fn general_eigen(a: &DMatrix<f64>) -> Result<(Vec<C64>, CMatrix)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = fa.eigen().map_err(|e| GqfiError::DefectiveDrift {
        reason: format!("eigensolver failed: {e:?}"),
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let mut vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
    }
    Ok((values, vectors))
}

/// Solve `X G + G X^T + Y = 0` through the vectorized Kronecker system.
/// Cost is O(n^6); intended as an independent check for small n.
pub fn lyapunov_kron(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(XG) = (I ⊗ X) vec G and vec(G X^T) = (X ⊗ I) vec G, column-major.
    let op = eye.kronecker(x) + x.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, y.iter().map(|v| -v));
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GqfiError::InvalidInput("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

/// `(exp(z t) - 1) / z`, continuous through `z = 0` where it equals `t`.
pub fn phi1(z: C64, t: f64) -> C64 {
    let x = z * t;
    if x.norm() < 1e-3 {
        let mut term = C64::new(t, 0.0);
        let mut sum = term;
        for k in 2..8 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0) / z
    }
}

/// Compressed sparse row matrix, used for the drift in the integrator hot loop.
#[derive(Debug, Clone)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n_rows: a.nrows(), n_cols: a.ncols(), row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] = acc;
        }
        out
    }

    /// `self * b` for dense `b`.
    pub fn mul_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.n_cols, b.nrows());
        let mut out = DMatrix::zeros(self.n_rows, b.ncols());
        for c in 0..b.ncols() {
            let bc = b.column(c);
            for i in 0..self.n_rows {
                let mut acc = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * bc[self.cols[k]];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }
}
