//! Low-rank solutions `X ≈ YYᵀ` of generalized Lyapunov equations
//! `A X M + M X A = B Bᵀ` by Riemannian truncated Newton on the quotient
//! manifold of full-rank factors, with a structure-exploiting preconditioner
//! and an increasing-rank outer loop.

pub mod cli;
pub mod error;
pub mod irr;
pub mod linalg;
pub mod manifold;
pub mod precond;
pub mod problems;
pub mod tnewton;

pub use error::{Error, Result};
