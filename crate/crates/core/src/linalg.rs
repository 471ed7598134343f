//! Small dense symmetric positive-definite helpers on top of `nalgebra`.
//!
//! Every inversion in the crate goes through [`Cholesky::factor`], which
//! reports the failing pivot instead of regularizing.

use nalgebra::{DMatrix, DVector};

use crate::error::{CgnError, Result};

/// Pivots at or below this value are treated as a loss of definiteness.
pub const PD_PIVOT_TOL: f64 = 1e-10;

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `a`, failing when a pivot (the squared diagonal of `L`
    /// before the square root) drops to `tol` or below.
    pub fn factor_with_tol(a: &DMatrix<f64>, tol: f64, context: &str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(CgnError::Contract(format!(
                "{context}: expected a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > tol) {
                return Err(CgnError::NotPositiveDefinite {
                    context: context.to_string(),
                    pivot: j,
                    value: d,
                });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    /// Factors `a`; any strictly positive pivot is accepted.
    pub fn factor(a: &DMatrix<f64>, context: &str) -> Result<Self> {
        Self::factor_with_tol(a, 0.0, context)
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `ln |A|`
    pub fn ln_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("cholesky factor has a nonzero diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a nonzero diagonal")
    }

    /// `xᵀ A⁻¹ x`
    pub fn inv_quad(&self, x: &DVector<f64>) -> f64 {
        let y = self
            .l
            .solve_lower_triangular(x)
            .expect("cholesky factor has a nonzero diagonal");
        y.dot(&y)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let linv = self
            .l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("cholesky factor has a nonzero diagonal");
        let inv = linv.transpose() * linv;
        symmetrize(inv)
    }
}

/// Averages `m` with its transpose to remove rounding asymmetry.
pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
