use nalgebra::{DVector, LU};

use crate::error::{Error, Result};
use crate::linalg::{frob, Mat};

/// Largest `p` for which the coupled system is assembled and factored densely.
pub const DENSE_COUPLED_MAX_P: usize = 64;

/// The symmetric `p×p` system `Σ_i (K_i s_i) e_iᵀ + transpose = R` with
/// `K_i = 2λ_i I − J_i`, i.e. `(𝒦 + Π𝒦Π) vec(S) = vec(R)` restricted to
/// symmetric `S`.
#[derive(Debug)]
pub struct CoupledSystem {
    blocks: Vec<Mat>,
    dense: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

fn sym_index(p: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(p * (p + 1) / 2);
    for k in 0..p {
        for l in k..p {
            idx.push((k, l));
        }
    }
    idx
}

impl CoupledSystem {
    pub fn new(lambdas: &[f64], j_blocks: Vec<Mat>) -> Result<Self> {
        let p = lambdas.len();
        let blocks: Vec<Mat> = lambdas
            .iter()
            .zip(j_blocks)
            .map(|(&lam, j)| Mat::identity(p, p) * (2.0 * lam) - j)
            .collect();
        let mut sys = CoupledSystem {
            blocks,
            dense: None,
        };
        if p <= DENSE_COUPLED_MAX_P {
            let idx = sym_index(p);
            let m = idx.len();
            let mut mat = Mat::zeros(m, m);
            for (c, &(a, b)) in idx.iter().enumerate() {
                let mut e = Mat::zeros(p, p);
                e[(a, b)] = 1.0;
                e[(b, a)] = 1.0;
                let out = sys.apply(&e);
                for (r, &(k, l)) in idx.iter().enumerate() {
                    mat[(r, c)] = out[(k, l)];
                }
            }
            let lu = mat.lu();
            if !lu.is_invertible() {
                return Err(Error::Preconditioner("coupled system is singular".into()));
            }
            sys.dense = Some(lu);
        }
        Ok(sys)
    }

    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    /// Left-hand side applied to a symmetric `S`.
    pub fn apply(&self, s: &Mat) -> Mat {
        let p = self.p();
        let mut k = Mat::zeros(p, p);
        for (i, block) in self.blocks.iter().enumerate() {
            k.set_column(i, &(block * s.column(i)));
        }
        &k + k.transpose()
    }

    /// The full `p²×p²` matrix `𝒦 + Π𝒦Π` acting on column-major `vec(S)`.
    pub fn assemble_full(&self) -> Mat {
        let p = self.p();
        let mut big = Mat::zeros(p * p, p * p);
        for (i, block) in self.blocks.iter().enumerate() {
            // 𝒦 is block diagonal.
            big.view_mut((i * p, i * p), (p, p)).copy_from(block);
        }
        let mut shuffle = Mat::zeros(p * p, p * p);
        for a in 0..p {
            for b in 0..p {
                shuffle[(a * p + b, b * p + a)] = 1.0;
            }
        }
        &big + &shuffle * &big * &shuffle
    }

    /// Solves for symmetric `S` given symmetric `rhs`.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        let p = self.p();
        match &self.dense {
            Some(lu) => {
                let idx = sym_index(p);
                let b = DVector::from_iterator(idx.len(), idx.iter().map(|&(k, l)| rhs[(k, l)]));
                let c = lu
                    .solve(&b)
                    .ok_or_else(|| Error::Preconditioner("coupled system is singular".into()))?;
                let mut s = Mat::zeros(p, p);
                for (v, &(k, l)) in c.iter().zip(&idx) {
                    s[(k, l)] = *v;
                    s[(l, k)] = *v;
                }
                Ok(s)
            }
            None => self.solve_cg(rhs),
        }
    }

    fn solve_cg(&self, rhs: &Mat) -> Result<Mat> {
        let p = self.p();
        let bnorm = rhs.norm();
        let mut s = Mat::zeros(p, p);
        if bnorm == 0.0 {
            return Ok(s);
        }
        let mut r = rhs.clone();
        let mut d = r.clone();
        let mut rr = frob(&r, &r);
        for _ in 0..(p * (p + 1)).max(10) {
            let q = self.apply(&d);
            let dq = frob(&d, &q);
            if !(dq > 0.0) {
                return Err(Error::Preconditioner("coupled system is not positive definite".into()));
            }
            let alpha = rr / dq;
            s += &d * alpha;
            r -= &q * alpha;
            let rr_next = frob(&r, &r);
            if rr_next.sqrt() <= 1e-14 * bnorm {
                return Ok(s);
            }
            d = &r + &d * (rr_next / rr);
            rr = rr_next;
        }
        Err(Error::Preconditioner("coupled CG did not converge".into()))
    }
}
