//! Riemannian truncated Newton with a backtracking line search.

mod line_search;
mod solver;
mod tpcg;
mod trace;

pub use line_search::{acceptance, line_search, CostAlongLine, LineSearchResult};
pub use solver::{solve_fixed_rank, solve_fixed_rank_with, FixedRankOutcome, SolveContext, Termination};
pub use tpcg::{tpcg, TpcgExit, TpcgOptions, TpcgResult, TpcgState};
pub use trace::{AcceptedBy, SolveTrace, TraceRecord, CSV_HEADER};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TnewtonConfig {
    pub chi1: f64,
    pub chi2: f64,
    pub eps_curv: f64,
    pub forcing_beta: f64,
    pub forcing_t: f64,
    /// Stop once `‖grad‖ ≤ grad_tol_rel · ‖grad at start‖`.
    pub grad_tol_rel: f64,
    /// Stop once `‖grad‖ ≤ grad_tol_abs`.
    pub grad_tol_abs: f64,
    pub max_outer: usize,
    /// Inner iteration cap; `None` uses the horizontal-space dimension.
    pub max_inner: Option<usize>,
    pub ls_max_backtracks: usize,
}

impl Default for TnewtonConfig {
    fn default() -> Self {
        TnewtonConfig {
            chi1: 1e-4,
            chi2: 1e-4,
            eps_curv: 1e-10,
            forcing_beta: 0.1,
            forcing_t: 1.0,
            grad_tol_rel: 1e-6,
            grad_tol_abs: 0.0,
            max_outer: 500,
            max_inner: None,
            ls_max_backtracks: 50,
        }
    }
}

impl TnewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        let half_open = |v: f64| v > 0.0 && v <= 1.0;
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} out of range: {v}")));
        if !open(self.chi1) {
            return bad("chi1", self.chi1);
        }
        if !open(self.chi2) {
            return bad("chi2", self.chi2);
        }
        if !(self.eps_curv > 0.0) {
            return bad("eps_curv", self.eps_curv);
        }
        if !half_open(self.forcing_beta) {
            return bad("forcing_beta", self.forcing_beta);
        }
        if !half_open(self.forcing_t) {
            return bad("forcing_t", self.forcing_t);
        }
        if !(self.grad_tol_rel > 0.0) {
            return bad("grad_tol_rel", self.grad_tol_rel);
        }
        if !(self.grad_tol_abs >= 0.0) {
            return bad("grad_tol_abs", self.grad_tol_abs);
        }
        if self.max_inner == Some(0) {
            return Err(Error::InvalidArgument("max_inner must be positive".into()));
        }
        Ok(())
    }

    /// Forcing term `min(β, ‖grad‖^t)`.
    pub fn forcing(&self, gradnorm: f64) -> f64 {
        self.forcing_beta.min(gradnorm.powf(self.forcing_t))
    }
}
