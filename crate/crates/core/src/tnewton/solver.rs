use std::time::Instant;

use super::line_search::{line_search, CostAlongLine};
use super::tpcg::{tpcg, TpcgOptions};
use super::trace::{SolveTrace, TraceRecord};
use super::TnewtonConfig;
use crate::error::{Error, Result};
use crate::linalg::trace_of_product;
use crate::manifold::{retract, FactorPoint, MetricChoice, PointData};
use crate::precond::{PrecondBuilder, PrecondChoice};
use crate::problems::{relative_residual_raw, LyapunovProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Gradient tolerance met (possibly at the starting point).
    Converged,
    MaxOuter,
    /// No decrease resolvable above rounding level of the cost.
    Stalled,
}

/// Bookkeeping carried across consecutive fixed-rank solves.
#[derive(Clone, Copy, Debug)]
pub struct SolveContext {
    pub nh_offset: usize,
    pub start: Instant,
}

impl Default for SolveContext {
    fn default() -> Self {
        SolveContext {
            nh_offset: 0,
            start: Instant::now(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedRankOutcome {
    pub point: FactorPoint,
    pub trace: SolveTrace,
    pub termination: Termination,
    pub initial_gradnorm: f64,
    pub final_gradnorm: f64,
    pub final_cost: f64,
    /// Cumulative Hessian actions including `nh_offset`.
    pub nh: usize,
}

/// Runs truncated Newton at fixed rank from `y0`.
pub fn solve_fixed_rank(
    problem: &LyapunovProblem,
    metric: MetricChoice,
    y0: FactorPoint,
    config: &TnewtonConfig,
    precond: PrecondChoice,
) -> Result<(FactorPoint, SolveTrace)> {
    match solve_fixed_rank_with(problem, metric, y0, config, precond, SolveContext::default()) {
        Ok(out) => Ok((out.point, out.trace)),
        Err(Error::RankSolveFailed { source, .. }) => Err(*source),
        Err(e) => Err(e),
    }
}

/// As [`solve_fixed_rank`], continuing counters from `ctx`. Failures after
/// the start carry the partial trace.
pub fn solve_fixed_rank_with(
    problem: &LyapunovProblem,
    metric: MetricChoice,
    y0: FactorPoint,
    config: &TnewtonConfig,
    precond: PrecondChoice,
    ctx: SolveContext,
) -> Result<FixedRankOutcome> {
    config.validate()?;
    let p = y0.p();
    let builder = PrecondBuilder::new(problem, precond)?;
    let mut trace = SolveTrace::default();
    let mut nh = ctx.nh_offset;
    let fail = |e: Error, trace: SolveTrace| Error::RankSolveFailed {
        rank: p,
        source: Box::new(e),
        partial_trace: Box::new(trace),
    };

    let mut data = PointData::new(problem, y0)?;
    if !data.cost().is_finite() {
        return Err(Error::NonFinite {
            context: "cost",
            inner_index: 0,
        });
    }
    let mut grad = data.gradient(metric);
    let mut gnorm = data.norm(metric, &grad);
    let g0 = gnorm;
    let tol = (config.grad_tol_rel * g0).max(config.grad_tol_abs);
    let max_inner = config.max_inner.unwrap_or_else(|| data.point().horizontal_dim());
    let elapsed = |start: Instant| start.elapsed().as_secs_f64() * 1e3;

    trace.push(TraceRecord {
        k: 0,
        p,
        f: data.cost(),
        gradnorm: gnorm,
        relres: relative_residual_raw(problem, data.point().y()).unwrap_or(f64::NAN),
        inner_iters: 0,
        nh,
        alpha: 0.0,
        ms: elapsed(ctx.start),
        f_change: 0.0,
        slope: 0.0,
        eta_norm_sq: 0.0,
        accepted_by: None,
    });

    let mut k = 0;
    let mut flat_steps = 0;
    let termination = loop {
        if gnorm <= tol || gnorm == 0.0 {
            break Termination::Converged;
        }
        if k >= config.max_outer {
            break Termination::MaxOuter;
        }
        let phi = config.forcing(gnorm);
        let pre = match &builder {
            Some(b) => match b.at(metric, &data) {
                Ok(pc) => Some(pc),
                Err(e) => return Err(fail(e, trace)),
            },
            None => None,
        };
        let inner = tpcg(
            &grad,
            |a, b| data.inner(metric, a, b),
            |d| Ok(data.hessian(metric, d)),
            |r| match &pre {
                Some(pc) => pc.apply(r),
                None => Ok(r.clone()),
            },
            TpcgOptions {
                eps_curv: config.eps_curv,
                phi,
                max_inner,
                record_states: false,
            },
        );
        let inner = match inner {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        nh += inner.hess_evals;
        let eta = inner.eta;
        let slope = data.inner(metric, &grad, &eta);
        let eta_norm_sq = data.inner(metric, &eta, &eta);
        let line = CostAlongLine::new(&data, &eta);
        let scale = trace_of_product(data.gram_a(), data.gram_m()).abs() + data.bty().norm_squared();
        let ls = match line_search(&line, slope, eta_norm_sq, config) {
            Ok(ls) => ls,
            Err(e @ Error::LineSearchFailed { .. }) => {
                if slope.abs() <= 1e4 * f64::EPSILON * scale {
                    log::debug!("rank {p}: line search stalled at |slope| = {:e}", slope.abs());
                    break Termination::Stalled;
                }
                return Err(fail(e, trace));
            }
            Err(e) => return Err(fail(e, trace)),
        };
        let next = match retract(data.point(), &eta, ls.alpha).and_then(|pt| PointData::new(problem, pt)) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, trace)),
        };
        if !next.cost().is_finite() {
            return Err(fail(
                Error::NonFinite {
                    context: "cost",
                    inner_index: inner.iterations,
                },
                trace,
            ));
        }
        data = next;
        grad = data.gradient(metric);
        gnorm = data.norm(metric, &grad);
        k += 1;
        log::debug!(
            "rank {p} it {k}: f = {:.12e}, |grad| = {gnorm:.3e}, inner = {}, alpha = {}",
            data.cost(),
            inner.iterations,
            ls.alpha
        );
        trace.push(TraceRecord {
            k,
            p,
            f: data.cost(),
            gradnorm: gnorm,
            relres: relative_residual_raw(problem, data.point().y()).unwrap_or(f64::NAN),
            inner_iters: inner.iterations,
            nh,
            alpha: ls.alpha,
            ms: elapsed(ctx.start),
            f_change: ls.f_change,
            slope,
            eta_norm_sq,
            accepted_by: Some(ls.accepted_by),
        });
        // Decreases at rounding level of the cost terms carry no information.
        if ls.f_change.abs() <= 1e2 * f64::EPSILON * scale {
            flat_steps += 1;
            if flat_steps >= 3 {
                log::debug!("rank {p}: cost decrease at rounding level, stopping");
                break Termination::Stalled;
            }
        } else {
            flat_steps = 0;
        }
    };

    Ok(FixedRankOutcome {
        final_cost: data.cost(),
        point: data.into_point(),
        trace,
        termination,
        initial_gradnorm: g0,
        final_gradnorm: gnorm,
        nh,
    })
}
