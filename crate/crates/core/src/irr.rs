//! Increasing-rank outer loop: solve at rank `p`, check the relative residual,
//! and warm-start rank `p + p_inc` from the previous factor.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{FactorPoint, MetricChoice, PointData};
use crate::precond::PrecondChoice;
use crate::problems::{relative_residual, LyapunovProblem};
use crate::tnewton::{solve_fixed_rank_with, CostAlongLine, SolveContext, SolveTrace, TnewtonConfig, Termination};

#[derive(Clone, Debug, PartialEq)]
pub struct IrrConfig {
    pub p_min: usize,
    pub p_max: usize,
    pub p_inc: usize,
    /// Target relative residual.
    pub tau: f64,
    /// Upper bound on the per-rank relative gradient tolerance.
    pub inner_tol_floor: f64,
    pub seed: u64,
}

impl Default for IrrConfig {
    fn default() -> Self {
        IrrConfig {
            p_min: 1,
            p_max: 40,
            p_inc: 1,
            tau: 1e-6,
            inner_tol_floor: 1e-6,
            seed: 0,
        }
    }
}

impl IrrConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= p_min <= p_max, got p_min = {}, p_max = {}",
                self.p_min, self.p_max
            )));
        }
        if self.p_max > n {
            return Err(Error::InvalidArgument(format!("p_max = {} exceeds n = {n}", self.p_max)));
        }
        if self.p_inc == 0 {
            return Err(Error::InvalidArgument("p_inc must be at least 1".into()));
        }
        if !(self.tau > 0.0) || !(self.inner_tol_floor > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one rank of the outer loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub p: usize,
    pub initial_rel_res: f64,
    pub rel_res: f64,
    pub inner_tol: f64,
    pub final_cost: f64,
    pub outer_iterations: usize,
    pub stalled: bool,
    pub warm_start_warning: bool,
}

#[derive(Clone, Debug)]
pub struct IrrOutcome {
    pub point: FactorPoint,
    pub trace: SolveTrace,
    pub ranks: Vec<RankSummary>,
    pub converged: bool,
    pub total_ms: f64,
}

impl IrrOutcome {
    pub fn final_rank(&self) -> usize {
        self.point.p()
    }

    pub fn rel_res(&self) -> f64 {
        self.ranks.last().map_or(f64::NAN, |r| r.rel_res)
    }

    pub fn ranks_visited(&self) -> Vec<usize> {
        self.ranks.iter().map(|r| r.p).collect()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            final_rank: self.final_rank(),
            rel_res: self.rel_res(),
            total_nh: self.trace.total_nh(),
            total_ms: self.total_ms,
            ranks_visited: self.ranks_visited(),
        }
    }
}

/// JSON summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_rank: usize,
    pub rel_res: f64,
    #[serde(rename = "total_nH")]
    pub total_nh: usize,
    pub total_ms: f64,
    pub ranks_visited: Vec<usize>,
}

/// Factor with i.i.d. standard normal entries.
pub fn random_factor(n: usize, p: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

pub fn solve_increasing_rank(
    problem: &LyapunovProblem,
    metric: MetricChoice,
    config: &IrrConfig,
    tconfig: &TnewtonConfig,
    precond: PrecondChoice,
) -> Result<IrrOutcome> {
    config.validate(problem.n())?;
    tconfig.validate()?;
    let start = Instant::now();
    let mut trace = SolveTrace::default();
    let mut ranks = Vec::new();
    let mut y = FactorPoint::new(random_factor(problem.n(), config.p_min, config.seed))?;
    let mut warning = false;
    loop {
        let p = y.p();
        let r0 = relative_residual(problem, &y)?;
        let inner_tol = config.inner_tol_floor.min(r0 / 10.0);
        let cfg = TnewtonConfig {
            grad_tol_rel: inner_tol,
            ..tconfig.clone()
        };
        let ctx = SolveContext {
            nh_offset: trace.total_nh(),
            start,
        };
        let out = match solve_fixed_rank_with(problem, metric, y, &cfg, precond, ctx) {
            Ok(out) => out,
            Err(Error::RankSolveFailed {
                rank,
                source,
                partial_trace,
            }) => {
                trace.extend(*partial_trace);
                return Err(Error::RankSolveFailed {
                    rank,
                    source,
                    partial_trace: Box::new(trace),
                });
            }
            Err(e) => {
                return Err(Error::RankSolveFailed {
                    rank: p,
                    source: Box::new(e),
                    partial_trace: Box::new(trace),
                })
            }
        };
        let rel_res = relative_residual(problem, &out.point)?;
        log::info!(
            "rank {p}: rel. residual {rel_res:.3e} after {} iterations ({:?})",
            out.trace.outer_iterations(),
            out.termination
        );
        ranks.push(RankSummary {
            p,
            initial_rel_res: r0,
            rel_res,
            inner_tol,
            final_cost: out.final_cost,
            outer_iterations: out.trace.outer_iterations(),
            stalled: out.termination == Termination::Stalled,
            warm_start_warning: warning,
        });
        trace.extend(out.trace);
        let done = rel_res <= config.tau;
        if done || p + config.p_inc > config.p_max {
            return Ok(IrrOutcome {
                point: out.point,
                trace,
                ranks,
                converged: done,
                total_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        let ws = warm_start(problem, &out.point, config.p_inc)?;
        warning = ws.warning;
        y = ws.point;
    }
}

#[derive(Clone, Debug)]
pub struct WarmStart {
    pub point: FactorPoint,
    /// Set when backtracking failed and the seeded padded factor is returned.
    pub warning: bool,
    /// `f(out) − f(Y_p)`.
    pub cost_change: f64,
}

/// Columns spanning the most negative eigendirections of the residual
/// `E = AYYᵀM + MYYᵀA − BBᵀ`, from a QR of `[AY MY B]`.
pub fn residual_descent_directions(problem: &LyapunovProblem, y: &Mat, count: usize) -> Mat {
    let (n, p, s) = (problem.n(), y.ncols(), problem.b().ncols());
    let u = problem.a().mul_dense(y);
    let v = problem.m().mul_dense(y);
    let mut w = Mat::zeros(n, 2 * p + s);
    w.columns_mut(0, p).copy_from(&u);
    w.columns_mut(p, p).copy_from(&v);
    w.columns_mut(2 * p, s).copy_from(problem.b());
    let qr = w.qr();
    let (q, r) = (qr.q(), qr.r());
    let (ru, rv, rb) = (r.columns(0, p), r.columns(p, p), r.columns(2 * p, s));
    let core = &ru * rv.transpose() + &rv * ru.transpose() - &rb * rb.transpose();
    let eig = SymmetricEigen::new(crate::linalg::sym(&core));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out = Mat::zeros(n, count);
    for (k, &i) in order.iter().take(count).enumerate() {
        out.set_column(k, &(&q * eig.eigenvectors.column(i)));
    }
    out
}

/// Pads `Y_p` with `p_inc` columns and takes one Euclidean steepest-descent
/// step on the cost.
///
/// The zero padding is a fixed point of gradient descent, so the new columns
/// are first seeded with small multiples of residual descent directions.
pub fn warm_start(problem: &LyapunovProblem, y_p: &FactorPoint, p_inc: usize) -> Result<WarmStart> {
    let (n, p) = (y_p.n(), y_p.p());
    if p + p_inc > n {
        return Err(Error::InvalidArgument(format!("rank {} exceeds n = {n}", p + p_inc)));
    }
    let scale = y_p.y().norm();
    let mut padded = Mat::zeros(n, p + p_inc);
    padded.columns_mut(0, p).copy_from(y_p.y());
    let dirs = residual_descent_directions(problem, y_p.y(), p_inc);
    padded.columns_mut(p, p_inc).copy_from(&(dirs * (1e-4 * scale)));
    let mut start = FactorPoint::new(padded.clone());
    if start.is_err() {
        let jitter = random_factor(n, p_inc, (n * 31 + p) as u64) * (1e-8 * scale);
        let mut cols = padded.columns_mut(p, p_inc);
        cols += jitter;
        start = FactorPoint::new(padded.clone());
    }
    let start = start?;
    let f_p = crate::manifold::cost(problem, y_p)?;
    let data = PointData::new(problem, start)?;
    let seed_change = data.cost() - f_p;
    let grad = data.euclidean_gradient();
    let gg = grad.norm_squared();
    if gg == 0.0 {
        return Ok(WarmStart {
            cost_change: seed_change,
            point: data.into_point(),
            warning: false,
        });
    }
    let dir = -&grad;
    let line = CostAlongLine::new(&data, &dir);
    let c2 = line.coefficients()[1];
    let mut alpha = if c2 > 0.0 { gg / (2.0 * c2) } else { 1.0 / gg.sqrt() };
    for _ in 0..50 {
        let change = line.change(alpha);
        if line.full_rank_at(alpha) && change.is_finite() && change <= -1e-4 * alpha * gg {
            let point = FactorPoint::new(data.point().y() + &dir * alpha)?;
            return Ok(WarmStart {
                point,
                warning: false,
                cost_change: seed_change + change,
            });
        }
        alpha *= 0.5;
    }
    log::warn!("warm start at rank {p}: backtracking exhausted, continuing from the seeded factor");
    Ok(WarmStart {
        cost_change: seed_change,
        point: data.into_point(),
        warning: true,
    })
}
