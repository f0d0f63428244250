//! Backtracking line search along `t ↦ π(Y + tη)`.
//!
//! The cost restricted to a line is a quartic polynomial whose coefficients
//! follow from small Gram matrices, so every trial step is evaluated exactly
//! and without cancellation against `f(Y)`.

use super::trace::AcceptedBy;
use super::TnewtonConfig;
use crate::error::{Error, Result};
use crate::linalg::{frob, trace_of_product, Mat, SpdFactor};
use crate::manifold::PointData;

/// `t ↦ f(Y + tD) − f(Y)` together with the Gram of `Y + tD`.
#[derive(Clone, Debug)]
pub struct CostAlongLine {
    /// Coefficients of `t, t², t³, t⁴`.
    coeffs: [f64; 4],
    gram: [Mat; 3],
}

impl CostAlongLine {
    pub fn new(data: &PointData<'_>, dir: &Mat) -> Self {
        let problem = data.problem();
        let y = data.point().y();
        let a_dir = problem.a().mul_dense(dir);
        let m_dir = problem.m().mul_dense(dir);
        let ya = y.tr_mul(&a_dir);
        let ym = y.tr_mul(&m_dir);
        let a1 = &ya + ya.transpose();
        let a2 = dir.tr_mul(&a_dir);
        let m1 = &ym + ym.transpose();
        let m2 = dir.tr_mul(&m_dir);
        let (ga, gm) = (data.gram_a(), data.gram_m());
        let bd = problem.b().tr_mul(dir);
        let c1 = trace_of_product(&a1, gm) + trace_of_product(ga, &m1) - 2.0 * frob(data.bty(), &bd);
        let c2 = trace_of_product(&a2, gm) + trace_of_product(&a1, &m1) + trace_of_product(ga, &m2)
            - bd.norm_squared();
        let c3 = trace_of_product(&a1, &m2) + trace_of_product(&a2, &m1);
        let c4 = trace_of_product(&a2, &m2);
        let yd = y.tr_mul(dir);
        CostAlongLine {
            coeffs: [c1, c2, c3, c4],
            gram: [data.point().gram().clone(), &yd + yd.transpose(), dir.tr_mul(dir)],
        }
    }

    /// `f(Y + tD) − f(Y)`.
    pub fn change(&self, t: f64) -> f64 {
        let [c1, c2, c3, c4] = self.coeffs;
        t * (c1 + t * (c2 + t * (c3 + t * c4)))
    }

    /// Derivative at `t = 0`.
    pub fn slope(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coeffs
    }

    /// Whether `Y + tD` keeps full column rank.
    pub fn full_rank_at(&self, t: f64) -> bool {
        let g = &self.gram[0] + &self.gram[1] * t + &self.gram[2] * (t * t);
        SpdFactor::new(&g).is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub f_change: f64,
    pub backtracks: usize,
    pub accepted_by: AcceptedBy,
}

/// Which acceptance conditions a trial satisfies.
pub fn acceptance(change: f64, slope: f64, eta_norm_sq: f64, chi1: f64, chi2: f64) -> Option<AcceptedBy> {
    let curvature = change <= -chi1 * slope * slope / eta_norm_sq;
    let armijo = change <= chi2 * slope;
    match (curvature, armijo) {
        (true, true) => Some(AcceptedBy::Both),
        (true, false) => Some(AcceptedBy::Curvature),
        (false, true) => Some(AcceptedBy::Decrease),
        (false, false) => None,
    }
}

/// Finds a step meeting either sufficient-decrease condition, starting from
/// `α = 1`. Both conditions are independent of `α`, so when the direction
/// overshoots badly no trial may meet them; a backtracked step meeting the
/// `α`-scaled Armijo condition is then accepted instead.
pub fn line_search(
    line: &CostAlongLine,
    slope0: f64,
    eta_norm_sq: f64,
    config: &TnewtonConfig,
) -> Result<LineSearchResult> {
    if !(slope0 < 0.0) {
        return Err(Error::NotDescent { slope: slope0 });
    }
    let mut alpha = 1.0;
    let mut change = f64::NAN;
    for backtracks in 0..=config.ls_max_backtracks {
        let rank_ok = line.full_rank_at(alpha);
        change = if rank_ok { line.change(alpha) } else { f64::NAN };
        if change.is_finite() {
            if let Some(by) = acceptance(change, slope0, eta_norm_sq, config.chi1, config.chi2) {
                return Ok(LineSearchResult {
                    alpha,
                    f_change: change,
                    backtracks,
                    accepted_by: by,
                });
            }
            if change <= config.chi2 * alpha * slope0 {
                return Ok(LineSearchResult {
                    alpha,
                    f_change: change,
                    backtracks,
                    accepted_by: AcceptedBy::ScaledArmijo,
                });
            }
        }
        if backtracks == config.ls_max_backtracks {
            break;
        }
        let next = if change.is_finite() {
            let denom = 2.0 * (change - slope0 * alpha);
            if denom > 0.0 {
                -slope0 * alpha * alpha / denom
            } else {
                0.5 * alpha
            }
        } else {
            0.5 * alpha
        };
        alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
    }
    Err(Error::LineSearchFailed {
        backtracks: config.ls_max_backtracks,
        last_step: alpha,
        slope: slope0,
        last_change: change,
    })
}
