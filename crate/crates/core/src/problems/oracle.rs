use nalgebra::{Cholesky, SymmetricEigen};

use super::LyapunovProblem;
use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const DEFAULT_DENSE_LIMIT: usize = 2000;

/// Dense direct solve of `A X M + M X A = B Bᵀ` through the generalized
/// eigendecomposition of the pencil `(A, M)`.
pub fn dense_oracle_solve(problem: &LyapunovProblem, dense_limit: usize) -> Result<Mat> {
    let n = problem.n();
    if n > dense_limit {
        return Err(Error::DenseLimitExceeded {
            n,
            limit: dense_limit,
        });
    }
    let m = problem.m().to_dense();
    let l = Cholesky::new(m)
        .ok_or_else(|| Error::NotPositiveDefinite {
            operand: "M".into(),
            detail: "dense Cholesky failed".into(),
        })?
        .l();
    let linv = l
        .solve_lower_triangular(&Mat::identity(n, n))
        .expect("Cholesky factor has a positive diagonal");
    let a = problem.a().to_dense();
    let mut red = &linv * a * linv.transpose();
    red = crate::linalg::sym(&red);
    let eig = SymmetricEigen::new(red);
    // X = T X̃ Tᵀ with T = L⁻ᵀ Q, and C̃ = Tᵀ C T = (Tᵀ B)(Tᵀ B)ᵀ.
    let t = linv.transpose() * &eig.eigenvectors;
    let bt = t.tr_mul(problem.b());
    let mut xt = &bt * bt.transpose();
    let lam = &eig.eigenvalues;
    for i in 0..n {
        for j in 0..n {
            xt[(i, j)] /= lam[i] + lam[j];
        }
    }
    Ok(crate::linalg::sym(&(&t * xt * t.transpose())))
}

/// Rank-`p` factor `Y` with `YYᵀ` the best rank-`p` approximation of a
/// symmetric positive semidefinite `X` (leading eigenpairs).
pub fn best_low_rank_factor(x: &Mat, p: usize) -> Mat {
    let eig = SymmetricEigen::new(crate::linalg::sym(x));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut y = Mat::zeros(x.nrows(), p);
    for (k, &i) in order.iter().take(p).enumerate() {
        let lam = eig.eigenvalues[i].max(0.0);
        y.set_column(k, &(eig.eigenvectors.column(i) * lam.sqrt()));
    }
    y
}
