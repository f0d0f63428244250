//! Small dense helpers shared by the geometry and preconditioner code.
//!
//! Everything here works on `p×p` or tall-skinny `n×p` matrices; no routine
//! forms an `n×n` product.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &Mat, b: &Mat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Frobenius inner product `tr(Aᵀ B)`.
pub fn frob(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn skew(a: &Mat) -> Mat {
    (a - a.transpose()) * 0.5
}

/// Cholesky factorization of a small SPD matrix with left/right solves.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &Mat) -> Option<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return None;
        }
        let chol = Cholesky::new(m.clone())?;
        // nalgebra accepts tiny positive pivots; reject numerically singular Grams.
        let l = chol.l_dirty();
        let (lo, hi) = (0..m.nrows()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let d = l[(i, i)].abs();
            (lo.min(d), hi.max(d))
        });
        if m.nrows() > 0 && (lo <= 0.0 || lo <= hi * 1e-15) {
            return None;
        }
        Some(SpdFactor { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `LLᵀ = M`.
    pub fn l(&self) -> Mat {
        self.chol.l()
    }

    /// `M⁻¹ X`.
    pub fn solve_left(&self, x: &Mat) -> Mat {
        self.chol.solve(x)
    }

    /// `X M⁻¹`.
    pub fn solve_right(&self, x: &Mat) -> Mat {
        self.chol.solve(&x.transpose()).transpose()
    }

    pub fn inverse(&self) -> Mat {
        self.chol.inverse()
    }
}

/// Solve `X G + G X = R` for symmetric positive definite `G` (p×p).
///
/// With `G = W D Wᵀ`, the transformed unknown decouples entrywise.
pub fn sylvester_spd(g: &Mat, rhs: &Mat) -> Mat {
    let eig = SymmetricEigen::new(g.clone());
    let w = &eig.eigenvectors;
    let d = &eig.eigenvalues;
    let mut t = w.transpose() * rhs * w;
    for i in 0..t.nrows() {
        for j in 0..t.ncols() {
            t[(i, j)] /= d[i] + d[j];
        }
    }
    w * t * w.transpose()
}

/// Orthonormal basis of the column space of a full-column-rank tall matrix,
/// together with `G = R⁻¹` so that `Q = X G`.
pub fn orthonormal_columns(x: &Mat) -> Result<(Mat, Mat)> {
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let p = r.nrows();
    for i in 0..p {
        if r[(i, i)].abs() <= f64::EPSILON * r.norm() * p as f64 {
            return Err(Error::RankDeficient);
        }
    }
    let g = r
        .solve_upper_triangular(&Mat::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    Ok((q, g))
}
