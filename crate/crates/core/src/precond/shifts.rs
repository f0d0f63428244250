use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, Mat, SpdFactor};
use crate::problems::{ShiftedPattern, SparseSpdFactor};

/// Factorizations of `A + λᵢ Mp` and the Schur data of the saddle systems
/// `[A + λᵢ Mp, V̂; V̂ᵀ, 0]` for one point.
#[derive(Debug)]
pub struct ShiftSystemCache {
    lambdas: Vec<f64>,
    factors: Vec<SparseSpdFactor>,
    vhat: Mat,
    /// `(A + λᵢ Mp)⁻¹ V̂`.
    w: Vec<Mat>,
    /// `V̂ᵀ (A + λᵢ Mp)⁻¹ V̂`.
    schur: Vec<SpdFactor>,
}

impl ShiftSystemCache {
    /// `mass_y` is `Mp·Y`; its orthonormal basis is the constraint block `V̂`.
    pub fn new(pattern: &ShiftedPattern, lambdas: &[f64], mass_y: &Mat) -> Result<Self> {
        if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0)) {
            return Err(Error::Preconditioner(format!("non-positive shift {bad:e}")));
        }
        let (vhat, _) = orthonormal_columns(mass_y)
            .map_err(|_| Error::Preconditioner("Mp·Y is rank deficient".into()))?;
        let mut factors = Vec::with_capacity(lambdas.len());
        let mut w = Vec::with_capacity(lambdas.len());
        let mut schur = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let f = pattern
                .factor(lam)
                .map_err(|e| Error::Preconditioner(format!("shifted factorization failed: {e}")))?;
            let wi = f.solve(&vhat);
            let si = crate::linalg::sym(&vhat.tr_mul(&wi));
            let si = SpdFactor::new(&si)
                .ok_or_else(|| Error::Preconditioner(format!("singular Schur complement at shift {lam:e}")))?;
            factors.push(f);
            w.push(wi);
            schur.push(si);
        }
        Ok(ShiftSystemCache {
            lambdas: lambdas.to_vec(),
            factors,
            vhat,
            w,
            schur,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn vhat(&self) -> &Mat {
        &self.vhat
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Solves `(A + λᵢ Mp) x + V̂ y = rhs`, `V̂ᵀ x = 0`; returns `(x, y)`.
    pub fn saddle_solve(&self, i: usize, rhs: &Mat) -> (Mat, Mat) {
        let x0 = self.factors[i].solve(rhs);
        let y = self.schur[i].solve_left(&self.vhat.tr_mul(&x0));
        let x = x0 - &self.w[i] * &y;
        (x, y)
    }
}
