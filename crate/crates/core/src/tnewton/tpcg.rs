//! Truncated preconditioned conjugate gradients on a tangent space.

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpcgExit {
    /// `g(d, Hd) ≤ ε δ` was detected.
    NegativeCurvature,
    /// Relative residual fell below the forcing term.
    Residual,
    /// Iteration budget exhausted.
    MaxInner,
}

/// Snapshot of the inner iteration `i`.
#[derive(Clone, Debug)]
pub struct TpcgState {
    pub i: usize,
    pub eta: Mat,
    pub r: Mat,
    pub y: Mat,
    pub d: Mat,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TpcgOptions {
    pub eps_curv: f64,
    pub phi: f64,
    pub max_inner: usize,
    pub record_states: bool,
}

#[derive(Clone, Debug)]
pub struct TpcgResult {
    pub eta: Mat,
    pub exit: TpcgExit,
    /// Completed CG iterations.
    pub iterations: usize,
    pub hess_evals: usize,
    /// `‖r‖ / ‖grad‖` of the recursively updated residual at exit.
    pub residual_ratio: f64,
    pub states: Vec<TpcgState>,
}

fn finite(v: f64, context: &'static str, inner_index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context,
            inner_index,
        })
    }
}

/// Approximately solves `H η = −grad`.
///
/// `inner` is the metric, `hess` applies the Hessian and `precond` applies an
/// approximate inverse Hessian; both map tangent vectors to tangent vectors.
pub fn tpcg<I, H, P>(
    grad: &Mat,
    inner: I,
    mut hess: H,
    mut precond: P,
    opts: TpcgOptions,
) -> Result<TpcgResult>
where
    I: Fn(&Mat, &Mat) -> f64,
    H: FnMut(&Mat) -> Result<Mat>,
    P: FnMut(&Mat) -> Result<Mat>,
{
    let gnorm = finite(inner(grad, grad), "gradient norm", 0)?.max(0.0).sqrt();
    if gnorm == 0.0 {
        return Err(Error::InvalidArgument("tPCG needs a nonzero gradient".into()));
    }
    let mut eta = Mat::zeros(grad.nrows(), grad.ncols());
    let mut r = -grad;
    let mut y = precond(&r)?;
    let mut d = y.clone();
    let mut delta = finite(inner(&y, &y), "preconditioned residual", 0)?;
    let mut ry = finite(inner(&r, &y), "g(r, y)", 0)?;
    let mut states = Vec::new();
    let mut hess_evals = 0;
    let mut i = 0;
    let mut ratio = 1.0;

    loop {
        if opts.record_states {
            states.push(TpcgState {
                i,
                eta: eta.clone(),
                r: r.clone(),
                y: y.clone(),
                d: d.clone(),
                delta,
            });
        }
        if i >= opts.max_inner {
            return Ok(TpcgResult {
                eta,
                exit: TpcgExit::MaxInner,
                iterations: i,
                hess_evals,
                residual_ratio: ratio,
                states,
            });
        }
        let q = hess(&d)?;
        hess_evals += 1;
        let dq = finite(inner(&d, &q), "g(d, Hd)", i)?;
        if dq <= opts.eps_curv * delta {
            let eta = if i == 0 { d } else { eta };
            return Ok(TpcgResult {
                eta,
                exit: TpcgExit::NegativeCurvature,
                iterations: i,
                hess_evals,
                residual_ratio: ratio,
                states,
            });
        }
        let alpha = finite(ry / dq, "step length", i)?;
        eta += &d * alpha;
        r -= &q * alpha;
        y = precond(&r)?;
        let ry_next = finite(inner(&r, &y), "g(r, y)", i + 1)?;
        let beta = finite(ry_next / ry, "conjugation coefficient", i + 1)?;
        ry = ry_next;
        d = &y + &d * beta;
        delta = finite(inner(&y, &y), "preconditioned residual", i + 1)? + beta * beta * delta;
        i += 1;
        ratio = inner(&r, &r).max(0.0).sqrt() / gnorm;
        if ratio <= opts.phi {
            if opts.record_states {
                states.push(TpcgState {
                    i,
                    eta: eta.clone(),
                    r: r.clone(),
                    y: y.clone(),
                    d: d.clone(),
                    delta,
                });
            }
            return Ok(TpcgResult {
                eta,
                exit: TpcgExit::Residual,
                iterations: i,
                hess_evals,
                residual_ratio: ratio,
                states,
            });
        }
    }
}
