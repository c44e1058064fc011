//! Dense symmetric-positive-definite factorization.
//!
//! Every block of the sampler needs `C⁻¹`, `|C|` or a precision-mode normal
//! draw, so the Cholesky factor is kept together with its log-determinant.
//! Storage is nalgebra's column-major layout and the inner loops run on
//! contiguous column slices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance: a pivot must exceed this times the largest
/// diagonal entry of the input.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    log_det: f64,
}

/// Factor a symmetric positive-definite matrix. Only the lower triangle of
/// `m` is read.
pub fn spd_factor(m: &DMatrix<f64>) -> Result<SpdFactor> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    let tol = PIVOT_TOLERANCE * max_diag;

    let mut l = m.clone();
    let data = l.as_mut_slice();
    let mut log_det = 0.0;
    for j in 0..n {
        let (done, rest) = data.split_at_mut(j * n);
        let col_j = &mut rest[j..n];
        for k in 0..j {
            let col_k = &done[k * n + j..k * n + n];
            let ljk = col_k[0];
            if ljk != 0.0 {
                for (a, b) in col_j.iter_mut().zip(col_k) {
                    *a -= ljk * b;
                }
            }
        }
        let pivot = col_j[0];
        if !(pivot > tol) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = pivot.sqrt();
        log_det += 2.0 * d.ln();
        col_j[0] = d;
        let inv = 1.0 / d;
        for a in &mut col_j[1..] {
            *a *= inv;
        }
    }
    // Clear the strict upper triangle left over from the copy.
    for j in 1..n {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
    Ok(SpdFactor { l, log_det })
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `log |M|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solve `L x = b` in place.
    pub fn solve_lower_mut(&self, x: &mut [f64]) {
        let n = self.dim();
        let l = self.l.as_slice();
        for j in 0..n {
            let col = &l[j * n..(j + 1) * n];
            let xj = x[j] / col[j];
            x[j] = xj;
            if xj != 0.0 {
                for (xi, lij) in x[j + 1..].iter_mut().zip(&col[j + 1..]) {
                    *xi -= xj * lij;
                }
            }
        }
    }

    /// Solve `Lᵀ x = b` in place.
    pub fn solve_upper_mut(&self, x: &mut [f64]) {
        let n = self.dim();
        let l = self.l.as_slice();
        for j in (0..n).rev() {
            let col = &l[j * n..(j + 1) * n];
            let s: f64 = col[j + 1..].iter().zip(&x[j + 1..]).map(|(a, b)| a * b).sum();
            x[j] = (x[j] - s) / col[j];
        }
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_mut(x.as_mut_slice());
        self.solve_upper_mut(x.as_mut_slice());
        x
    }

    /// `L⁻¹ b`, the whitened vector.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_mut(x.as_mut_slice());
        x
    }

    /// `bᵀ M⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        self.whiten(b).norm_squared()
    }

    /// `M⁻¹`, formed as `L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut linv = DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            let col = &mut linv.as_mut_slice()[j * n..(j + 1) * n];
            self.solve_lower_mut(col);
        }
        linv.tr_mul(&linv)
    }

    /// Reconstruct `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

/// Convenience wrapper: `M⁻¹ b`.
pub fn spd_solve(f: &SpdFactor, b: &DVector<f64>) -> DVector<f64> {
    f.solve(b)
}

/// Convenience wrapper: `log |M|`.
pub fn spd_logdet(f: &SpdFactor) -> f64 {
    f.log_det()
}

/// Infinity norm (max absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Add `c` to every diagonal entry.
pub fn add_diagonal(m: &mut DMatrix<f64>, c: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += c;
    }
}
