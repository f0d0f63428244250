//! Preconditioner approximating the inverse Riemannian Hessian.
//!
//! The Hessian without its residual-dependent term is inverted exactly:
//! after diagonalizing the pencil `(YᵀAY, YᵀMpY)` the unknown splits into a
//! component in `range(Y)` and one orthogonal to `Mp·Y`, which lead to `p`
//! shifted saddle-point systems and one small symmetric coupled system.

mod coupled;
mod shifts;

pub use coupled::{CoupledSystem, DENSE_COUPLED_MAX_P};
pub use shifts::ShiftSystemCache;

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{sym, Mat, SpdFactor};
use crate::manifold::{horizontal_basis, inner_horizontal, FactorPoint, MetricChoice, PointData};
use crate::problems::{LyapunovProblem, ShiftedPattern, SpdSparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrecondChoice {
    None,
    /// Uses the true mass matrix `M`.
    Proposed,
    /// Replaces `M` by the identity inside the Hessian approximation.
    Bart,
}

impl fmt::Display for PrecondChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecondChoice::None => "none",
            PrecondChoice::Proposed => "proposed",
            PrecondChoice::Bart => "bart",
        })
    }
}

impl FromStr for PrecondChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(PrecondChoice::None),
            "proposed" => Ok(PrecondChoice::Proposed),
            "bart" => Ok(PrecondChoice::Bart),
            _ => Err(Error::InvalidArgument(format!("unknown preconditioner `{s}`"))),
        }
    }
}

/// Mass operator used inside the approximated Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mass {
    Problem,
    Identity,
}

/// Point-independent state: the shared sparsity pattern of `A + λ·Mp`.
#[derive(Debug)]
pub struct PrecondBuilder {
    mass: Mass,
    pattern: ShiftedPattern,
}

impl PrecondBuilder {
    pub fn new(problem: &LyapunovProblem, choice: PrecondChoice) -> Result<Option<Self>> {
        let mass = match choice {
            PrecondChoice::None => return Ok(None),
            PrecondChoice::Proposed => Mass::Problem,
            PrecondChoice::Bart => Mass::Identity,
        };
        let pattern = match mass {
            Mass::Problem => ShiftedPattern::new(problem.a(), problem.m())?,
            Mass::Identity => ShiftedPattern::new(problem.a(), &SpdSparseMatrix::identity(problem.n()))?,
        };
        Ok(Some(PrecondBuilder { mass, pattern }))
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    pub fn at(&self, metric: MetricChoice, data: &PointData<'_>) -> Result<Preconditioner> {
        Preconditioner::new(metric, data, self.mass, &self.pattern)
    }
}

/// `Mp·Y`, `YᵀMpY` for the chosen mass.
fn mass_products(data: &PointData<'_>, mass: Mass) -> (Mat, Mat) {
    match mass {
        Mass::Problem => (data.my().clone(), data.gram_m().clone()),
        Mass::Identity => (data.point().y().clone(), data.point().gram().clone()),
    }
}

/// `(A F Mp + Mp F A) Y` for `F = Yξᵀ + ξYᵀ`.
pub fn mass_hessian_times_y(data: &PointData<'_>, mass: Mass, xi: &Mat) -> Mat {
    match mass {
        Mass::Problem => data.lyap_hessian_times_y(xi),
        Mass::Identity => {
            let y = data.point().y();
            let u = data.ay();
            u * xi.tr_mul(y)
                + data.problem().a().mul_dense(xi) * data.point().gram()
                + y * xi.tr_mul(u)
                + xi * data.gram_a()
        }
    }
}

/// Left-hand side of the equation the preconditioner inverts: the Hessian
/// with the residual-dependent terms dropped (and `M` replaced by `Mp`).
pub fn defining_operator(metric: MetricChoice, data: &PointData<'_>, mass: Mass, xi: &Mat) -> Mat {
    let k = mass_hessian_times_y(data, mass, xi);
    let gf = data.point().gram_factor();
    match metric {
        MetricChoice::M1 => {
            let w = gf.solve_right(&k);
            &w - data.point().range_projection(&w) * 0.5
        }
        MetricChoice::M2 => gf.solve_right(&k) * 2.0,
        MetricChoice::M3 => k * 2.0,
    }
}

/// Preconditioner at one point, with all shifted factorizations cached.
#[derive(Debug)]
pub struct Preconditioner {
    metric: MetricChoice,
    point: FactorPoint,
    shifts: ShiftSystemCache,
    /// `T = L⁻ᵀQ` with `Tᵀ(YᵀMpY)T = I`, `Tᵀ(YᵀAY)T = Λ`.
    t: Mat,
    yt: Mat,
    ut: Mat,
    x_blocks: Vec<Mat>,
    coupled: CoupledSystem,
}

impl Preconditioner {
    pub fn new(metric: MetricChoice, data: &PointData<'_>, mass: Mass, pattern: &ShiftedPattern) -> Result<Self> {
        let (mass_y, gm) = mass_products(data, mass);
        let chol = SpdFactor::new(&gm).ok_or_else(|| Error::Preconditioner("YᵀMpY is not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .solve_lower_triangular(&Mat::identity(l.nrows(), l.nrows()))
            .ok_or_else(|| Error::Preconditioner("singular Cholesky factor".into()))?;
        let reduced = sym(&(&linv * data.gram_a() * linv.transpose()));
        let eig = SymmetricEigen::new(reduced);
        let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let t = linv.transpose() * &eig.eigenvectors;
        let shifts = ShiftSystemCache::new(pattern, &lambdas, &mass_y)?;
        let yt = data.point().y() * &t;
        let ut = data.ay() * &t;
        let p = lambdas.len();
        let ut2 = &ut * 2.0;
        let mut x_blocks = Vec::with_capacity(p);
        let mut j_blocks = Vec::with_capacity(p);
        for i in 0..p {
            let (xi, _) = shifts.saddle_solve(i, &ut2);
            j_blocks.push(sym(&ut.tr_mul(&xi)));
            x_blocks.push(xi);
        }
        let coupled = CoupledSystem::new(&lambdas, j_blocks)?;
        Ok(Preconditioner {
            metric,
            point: data.point().clone(),
            shifts,
            t,
            yt,
            ut,
            x_blocks,
            coupled,
        })
    }

    pub fn shifts(&self) -> &[f64] {
        self.shifts.lambdas()
    }

    pub fn shift_cache(&self) -> &ShiftSystemCache {
        &self.shifts
    }

    pub fn coupled(&self) -> &CoupledSystem {
        &self.coupled
    }

    /// Returns the horizontal `ξ` solving `defining_operator(ξ) = η`.
    pub fn apply(&self, eta: &Mat) -> Result<Mat> {
        let y = self.point.y();
        let g = self.point.gram();
        let rhs = match self.metric {
            MetricChoice::M1 => (eta + self.point.range_projection(eta)) * g,
            MetricChoice::M2 => eta * g * 0.5,
            MetricChoice::M3 => eta * 0.5,
        };
        let rt = rhs * &self.t;
        let p = self.t.ncols();
        let mut x = Mat::zeros(y.nrows(), p);
        for i in 0..p {
            let (xi, _) = self.shifts.saddle_solve(i, &rt.columns(i, 1).into_owned());
            x.set_column(i, &xi.column(0));
        }
        let v = self.ut.tr_mul(&x);
        let small = sym(&(self.yt.tr_mul(&rt) - &v - v.transpose()));
        let s = self.coupled.solve(&small)?;
        for i in 0..p {
            let corr = &self.x_blocks[i] * s.column(i);
            let mut col = x.column_mut(i);
            col -= corr;
        }
        let xi = (&self.yt * &s + x) * self.t.transpose();
        if !xi.iter().all(|v| v.is_finite()) {
            return Err(Error::Preconditioner("non-finite output".into()));
        }
        Ok(crate::manifold::project_horizontal(self.metric, &self.point, &xi))
    }
}

/// Matrix of a horizontal-space operator in a metric-orthonormal basis.
pub fn assemble_operator_dense<F>(metric: MetricChoice, point: &FactorPoint, mut op: F) -> Result<Mat>
where
    F: FnMut(&Mat) -> Result<Mat>,
{
    let basis = horizontal_basis(metric, point)?;
    let images: Vec<Mat> = basis.iter().map(&mut op).collect::<Result<_>>()?;
    let d = basis.len();
    Ok(Mat::from_fn(d, d, |i, j| inner_horizontal(metric, point, &basis[i], &images[j])))
}

/// Dense matrix of the operator inverted by the proposed preconditioner.
pub fn assemble_precond_operator_dense(
    metric: MetricChoice,
    problem: &LyapunovProblem,
    point: &FactorPoint,
    dense_limit: usize,
) -> Result<Mat> {
    if problem.n() > dense_limit {
        return Err(Error::DenseLimitExceeded {
            n: problem.n(),
            limit: dense_limit,
        });
    }
    let data = PointData::new(problem, point.clone())?;
    assemble_operator_dense(metric, point, |xi| Ok(defining_operator(metric, &data, Mass::Problem, xi)))
}
