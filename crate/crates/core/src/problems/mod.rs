//! Generalized Lyapunov problems `A X M + M X A = B Bᵀ`, their generators,
//! file ingestion, the factored residual, and a dense reference solver.

mod generate;
mod mtx;
mod oracle;
mod sparse;

pub use generate::{gen_poisson, gen_random_spd};
pub use mtx::{
    load_dense, load_manifest, load_matrix_market, load_spd, write_dense, write_manifest,
    write_symmetric,
};
pub use oracle::{best_low_rank_factor, dense_oracle_solve, DEFAULT_DENSE_LIMIT};
pub use sparse::{ShiftedPattern, SparseSpdFactor, SpdSparseMatrix};

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::FactorPoint;

/// `A X M + M X A = B Bᵀ` with sparse SPD `A`, `M` and a dense `n×s` factor `B`.
#[derive(Clone, Debug)]
pub struct LyapunovProblem {
    a: SpdSparseMatrix,
    m: SpdSparseMatrix,
    b: Mat,
}

impl LyapunovProblem {
    pub fn new(a: SpdSparseMatrix, m: SpdSparseMatrix, b: Mat) -> Result<Self> {
        let n = a.n();
        if m.n() != n {
            return Err(Error::dims("M", (n, n), (m.n(), m.n())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dims("B", (n, b.ncols().max(1)), b.shape()));
        }
        Ok(LyapunovProblem { a, m, b })
    }

    /// Factors a dense symmetric positive semidefinite `C` as `B Bᵀ`, dropping
    /// eigenvalues below `1e-12·λ_max`.
    pub fn with_dense_rhs(a: SpdSparseMatrix, m: SpdSparseMatrix, c: &Mat) -> Result<Self> {
        let n = a.n();
        if c.shape() != (n, n) {
            return Err(Error::dims("C", (n, n), c.shape()));
        }
        let eig = SymmetricEigen::new(crate::linalg::sym(c));
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        let keep: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-12 * lmax)
            .collect();
        if keep.is_empty() {
            return Err(Error::ZeroRightHandSide);
        }
        let mut b = Mat::zeros(n, keep.len());
        for (k, &i) in keep.iter().enumerate() {
            b.set_column(k, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
        }
        Self::new(a, m, b)
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &SpdSparseMatrix {
        &self.a
    }

    pub fn m(&self) -> &SpdSparseMatrix {
        &self.m
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    /// `‖B Bᵀ‖_F`.
    pub fn rhs_norm(&self) -> f64 {
        self.b.tr_mul(&self.b).norm()
    }

    fn check_factor(&self, y: &Mat) -> Result<()> {
        if y.nrows() != self.n() {
            return Err(Error::dims("Y", (self.n(), y.ncols()), y.shape()));
        }
        Ok(())
    }
}

/// `‖A Y Yᵀ M + M Y Yᵀ A − B Bᵀ‖_F` for a valid factor point.
pub fn residual_fro(problem: &LyapunovProblem, point: &FactorPoint) -> Result<f64> {
    residual_fro_raw(problem, point.y())
}

/// Residual norm for an arbitrary (possibly rank-deficient) `n×p` factor.
///
/// With `U = AY`, `V = MY` the residual is `W K Wᵀ` for `W = [U V B]` and a
/// small core `K`, so its norm is `‖R K Rᵀ‖_F` where `W = QR`.
pub fn residual_fro_raw(problem: &LyapunovProblem, y: &Mat) -> Result<f64> {
    problem.check_factor(y)?;
    let (p, s) = (y.ncols(), problem.b.ncols());
    let u = problem.a.mul_dense(y);
    let v = problem.m.mul_dense(y);
    let k = 2 * p + s;
    let mut w = Mat::zeros(problem.n(), k);
    w.columns_mut(0, p).copy_from(&u);
    w.columns_mut(p, p).copy_from(&v);
    w.columns_mut(2 * p, s).copy_from(&problem.b);
    let r = w.qr().r();
    let ru = r.columns(0, p);
    let rv = r.columns(p, p);
    let rb = r.columns(2 * p, s);
    let core = &ru * rv.transpose() + &rv * ru.transpose() - &rb * rb.transpose();
    Ok(core.norm())
}

/// Residual relative to `‖B Bᵀ‖_F`.
pub fn relative_residual(problem: &LyapunovProblem, point: &FactorPoint) -> Result<f64> {
    relative_residual_raw(problem, point.y())
}

pub fn relative_residual_raw(problem: &LyapunovProblem, y: &Mat) -> Result<f64> {
    let denom = problem.rhs_norm();
    if denom == 0.0 {
        return Err(Error::ZeroRightHandSide);
    }
    Ok(residual_fro_raw(problem, y)? / denom)
}
