//! Geometry of the quotient `ℝ*ⁿˣᵖ / 𝒪ₚ` of full-rank factors modulo
//! rotations: metrics, horizontal projections, retraction, cost, Riemannian
//! gradients and Hessian actions.
//!
//! All quantities are evaluated from tall-skinny products with `A`, `M` and
//! `B`; the `n×n` residual `E = A Y Yᵀ M + M Y Yᵀ A − B Bᵀ` is applied in
//! factored form.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{frob, skew, sylvester_spd, trace_of_product, Mat, SpdFactor};
use crate::problems::LyapunovProblem;

/// Riemannian metric on the total space.
///
/// * `M1`: `2 tr(Yᵀη Yᵀξ + YᵀY ηᵀξ) + tr(YᵀY (η_v)ᵀ ξ_v)` with `η_v` the vertical part
/// * `M2`: `tr(YᵀY ηᵀξ)`
/// * `M3`: `tr(ηᵀξ)`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricChoice {
    M1,
    M2,
    M3,
}

impl MetricChoice {
    pub const ALL: [MetricChoice; 3] = [MetricChoice::M1, MetricChoice::M2, MetricChoice::M3];

    pub fn index(self) -> u8 {
        match self {
            MetricChoice::M1 => 1,
            MetricChoice::M2 => 2,
            MetricChoice::M3 => 3,
        }
    }
}

impl fmt::Display for MetricChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

impl FromStr for MetricChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches(['m', 'M']) {
            "1" => Ok(MetricChoice::M1),
            "2" => Ok(MetricChoice::M2),
            "3" => Ok(MetricChoice::M3),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

/// Full-rank `n×p` representative `Y` with its cached Gram `YᵀY`.
#[derive(Clone, Debug)]
pub struct FactorPoint {
    y: Mat,
    gram: Mat,
    gram_factor: SpdFactor,
}

impl FactorPoint {
    pub fn new(y: Mat) -> Result<Self> {
        let gram = crate::linalg::sym(&y.tr_mul(&y));
        let gram_factor = SpdFactor::new(&gram).ok_or(Error::RankDeficient)?;
        Ok(FactorPoint {
            y,
            gram,
            gram_factor,
        })
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    pub fn into_y(self) -> Mat {
        self.y
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn gram_factor(&self) -> &SpdFactor {
        &self.gram_factor
    }

    /// `P_Y X = Y (YᵀY)⁻¹ Yᵀ X`.
    pub fn range_projection(&self, x: &Mat) -> Mat {
        &self.y * self.gram_factor.solve_left(&self.y.tr_mul(x))
    }

    /// Dimension of the horizontal space, `np − p(p−1)/2`.
    pub fn horizontal_dim(&self) -> usize {
        let (n, p) = (self.n(), self.p());
        n * p - p * (p - 1) / 2
    }

    fn check_shape(&self, operand: &'static str, x: &Mat) -> Result<()> {
        if x.shape() != self.y.shape() {
            return Err(Error::dims(operand, self.y.shape(), x.shape()));
        }
        Ok(())
    }
}

/// Tangent vector known to lie in the horizontal space of `metric`.
#[derive(Clone, Debug)]
pub struct HorizontalVector {
    z: Mat,
    metric: MetricChoice,
}

impl HorizontalVector {
    /// Projects an ambient matrix onto the horizontal space.
    pub fn project(metric: MetricChoice, at: &FactorPoint, ambient: &Mat) -> Result<Self> {
        at.check_shape("ambient", ambient)?;
        Ok(HorizontalVector {
            z: project_horizontal(metric, at, ambient),
            metric,
        })
    }

    /// Wraps a matrix the caller guarantees is horizontal.
    pub fn assume_horizontal(metric: MetricChoice, z: Mat) -> Self {
        HorizontalVector { z, metric }
    }

    pub fn z(&self) -> &Mat {
        &self.z
    }

    pub fn into_inner(self) -> Mat {
        self.z
    }

    pub fn metric(&self) -> MetricChoice {
        self.metric
    }

    pub fn expect_metric(&self, metric: MetricChoice) -> Result<&Mat> {
        if self.metric != metric {
            return Err(Error::MetricMismatch {
                expected: metric,
                found: self.metric,
            });
        }
        Ok(&self.z)
    }
}

/// Split of an ambient matrix into `YΩ` (vertical) and its complement.
#[derive(Clone, Debug)]
pub struct TangentDecomposition {
    pub vertical: Mat,
    pub horizontal: Mat,
    /// Skew-symmetric generator with `vertical = YΩ`.
    pub omega: Mat,
}

/// Skew generator `Ω` of the vertical component.
pub fn vertical_generator(metric: MetricChoice, at: &FactorPoint, ambient: &Mat) -> Mat {
    let yt_eta = at.y.tr_mul(ambient);
    match metric {
        MetricChoice::M1 | MetricChoice::M2 => skew(&at.gram_factor.solve_left(&yt_eta)),
        MetricChoice::M3 => sylvester_spd(&at.gram, &(&yt_eta - yt_eta.transpose())),
    }
}

pub fn project_horizontal(metric: MetricChoice, at: &FactorPoint, ambient: &Mat) -> Mat {
    ambient - &at.y * vertical_generator(metric, at, ambient)
}

pub fn project_decompose(
    metric: MetricChoice,
    at: &FactorPoint,
    ambient: &Mat,
) -> Result<TangentDecomposition> {
    at.check_shape("ambient", ambient)?;
    let omega = vertical_generator(metric, at, ambient);
    let vertical = &at.y * &omega;
    Ok(TangentDecomposition {
        horizontal: ambient - &vertical,
        vertical,
        omega,
    })
}

/// Metric on arbitrary ambient tangent vectors.
pub fn metric_inner(metric: MetricChoice, at: &FactorPoint, xi: &Mat, eta: &Mat) -> Result<f64> {
    at.check_shape("xi", xi)?;
    at.check_shape("eta", eta)?;
    let base = inner_horizontal(metric, at, xi, eta);
    Ok(match metric {
        MetricChoice::M1 => {
            let ox = vertical_generator(metric, at, xi);
            let oe = vertical_generator(metric, at, eta);
            let g = &at.gram;
            base + trace_of_product(&(g * ox.transpose()), &(g * oe))
        }
        _ => base,
    })
}

/// Metric restricted to horizontal arguments, where the vertical term of
/// `M1` vanishes.
pub fn inner_horizontal(metric: MetricChoice, at: &FactorPoint, xi: &Mat, eta: &Mat) -> f64 {
    match metric {
        MetricChoice::M1 => {
            let (a, b) = (at.y.tr_mul(xi), at.y.tr_mul(eta));
            2.0 * (trace_of_product(&a, &b) + frob(&(xi * &at.gram), eta))
        }
        MetricChoice::M2 => frob(&(xi * &at.gram), eta),
        MetricChoice::M3 => frob(xi, eta),
    }
}

/// Metric-orthonormal basis of the horizontal space, by Gram–Schmidt over
/// the projected coordinate matrices. Intended for small dense checks.
pub fn horizontal_basis(metric: MetricChoice, at: &FactorPoint) -> Result<Vec<Mat>> {
    let (n, p) = (at.n(), at.p());
    let want = at.horizontal_dim();
    let mut basis: Vec<Mat> = Vec::with_capacity(want);
    for j in 0..p {
        for i in 0..n {
            let mut e = Mat::zeros(n, p);
            e[(i, j)] = 1.0;
            let mut v = project_horizontal(metric, at, &e);
            let start = inner_horizontal(metric, at, &v, &v).sqrt();
            for _ in 0..2 {
                for b in &basis {
                    let c = inner_horizontal(metric, at, b, &v);
                    v -= b * c;
                }
            }
            let norm = inner_horizontal(metric, at, &v, &v).max(0.0).sqrt();
            if norm > 1e-8 * start && norm > 0.0 {
                basis.push(v / norm);
            }
        }
    }
    if basis.len() != want {
        return Err(Error::InvalidArgument(format!(
            "horizontal basis has {} vectors, expected {want}",
            basis.len()
        )));
    }
    Ok(basis)
}

/// `π(Y + t·Z)`.
pub fn retract(point: &FactorPoint, direction: &Mat, step: f64) -> Result<FactorPoint> {
    point.check_shape("direction", direction)?;
    let y = &point.y + direction * step;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::RetractionLeftManifold { step });
    }
    FactorPoint::new(y).map_err(|_| Error::RetractionLeftManifold { step })
}

/// `tr(YᵀAY · YᵀMY) − ‖BᵀY‖²_F`.
pub fn cost(problem: &LyapunovProblem, point: &FactorPoint) -> Result<f64> {
    cost_raw(problem, point.y())
}

pub fn cost_raw(problem: &LyapunovProblem, y: &Mat) -> Result<f64> {
    if y.nrows() != problem.n() {
        return Err(Error::dims("Y", (problem.n(), y.ncols()), y.shape()));
    }
    let ga = y.tr_mul(&problem.a().mul_dense(y));
    let gm = y.tr_mul(&problem.m().mul_dense(y));
    Ok(trace_of_product(&ga, &gm) - problem.b().tr_mul(y).norm_squared())
}

pub fn riemannian_gradient(
    metric: MetricChoice,
    problem: &LyapunovProblem,
    point: &FactorPoint,
) -> Result<HorizontalVector> {
    let data = PointData::new(problem, point.clone())?;
    Ok(HorizontalVector::assume_horizontal(metric, data.gradient(metric)))
}

pub fn hessian_action(
    metric: MetricChoice,
    problem: &LyapunovProblem,
    point: &FactorPoint,
    eta: &HorizontalVector,
) -> Result<HorizontalVector> {
    let z = eta.expect_metric(metric)?;
    point.check_shape("eta", z)?;
    let data = PointData::new(problem, point.clone())?;
    Ok(HorizontalVector::assume_horizontal(metric, data.hessian(metric, z)))
}

/// Problem-dependent quantities at one point, shared by the cost, gradient,
/// Hessian and preconditioner.
#[derive(Clone, Debug)]
pub struct PointData<'a> {
    problem: &'a LyapunovProblem,
    point: FactorPoint,
    ay: Mat,
    my: Mat,
    ga: Mat,
    gm: Mat,
    bty: Mat,
    ey: Mat,
    cost: f64,
}

impl<'a> PointData<'a> {
    pub fn new(problem: &'a LyapunovProblem, point: FactorPoint) -> Result<Self> {
        if point.n() != problem.n() {
            return Err(Error::dims("Y", (problem.n(), point.p()), point.y.shape()));
        }
        let y = &point.y;
        let ay = problem.a().mul_dense(y);
        let my = problem.m().mul_dense(y);
        let ga = crate::linalg::sym(&y.tr_mul(&ay));
        let gm = crate::linalg::sym(&y.tr_mul(&my));
        let bty = problem.b().tr_mul(y);
        let ey = &ay * &gm + &my * &ga - problem.b() * &bty;
        let cost = trace_of_product(&ga, &gm) - bty.norm_squared();
        Ok(PointData {
            problem,
            point,
            ay,
            my,
            ga,
            gm,
            bty,
            ey,
            cost,
        })
    }

    pub fn problem(&self) -> &'a LyapunovProblem {
        self.problem
    }

    pub fn point(&self) -> &FactorPoint {
        &self.point
    }

    pub fn into_point(self) -> FactorPoint {
        self.point
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `AY`.
    pub fn ay(&self) -> &Mat {
        &self.ay
    }

    /// `MY`.
    pub fn my(&self) -> &Mat {
        &self.my
    }

    /// `YᵀAY`.
    pub fn gram_a(&self) -> &Mat {
        &self.ga
    }

    /// `YᵀMY`.
    pub fn gram_m(&self) -> &Mat {
        &self.gm
    }

    /// `BᵀY`.
    pub fn bty(&self) -> &Mat {
        &self.bty
    }

    /// `E Y` with `E` the Euclidean gradient of the matrix cost at `YYᵀ`.
    pub fn residual_times_y(&self) -> &Mat {
        &self.ey
    }

    /// `E Z = AY(YᵀM Z) + MY(YᵀA Z) − B(Bᵀ Z)`.
    pub fn residual_apply(&self, z: &Mat) -> Mat {
        let b = self.problem.b();
        &self.ay * self.my.tr_mul(z) + &self.my * self.ay.tr_mul(z) - b * b.tr_mul(z)
    }

    /// Euclidean gradient `2 E Y` of the cost on the total space.
    pub fn euclidean_gradient(&self) -> Mat {
        &self.ey * 2.0
    }

    /// `(A F M + M F A) Y` for `F = Yηᵀ + ηYᵀ`.
    pub fn lyap_hessian_times_y(&self, eta: &Mat) -> Mat {
        self.lyap_hessian_times_y_with(eta, &self.problem.a().mul_dense(eta), &self.problem.m().mul_dense(eta))
    }

    pub(crate) fn lyap_hessian_times_y_with(&self, eta: &Mat, a_eta: &Mat, m_eta: &Mat) -> Mat {
        &self.ay * eta.tr_mul(&self.my)
            + a_eta * &self.gm
            + &self.my * eta.tr_mul(&self.ay)
            + m_eta * &self.ga
    }

    pub fn inner(&self, metric: MetricChoice, xi: &Mat, eta: &Mat) -> f64 {
        inner_horizontal(metric, &self.point, xi, eta)
    }

    pub fn norm(&self, metric: MetricChoice, xi: &Mat) -> f64 {
        self.inner(metric, xi, xi).max(0.0).sqrt()
    }

    pub fn project(&self, metric: MetricChoice, ambient: &Mat) -> Mat {
        project_horizontal(metric, &self.point, ambient)
    }

    /// Horizontal lift of the Riemannian gradient.
    pub fn gradient(&self, metric: MetricChoice) -> Mat {
        let gf = self.point.gram_factor();
        match metric {
            MetricChoice::M1 => {
                let w = gf.solve_right(&self.ey);
                let half_pw = self.point.range_projection(&w) * 0.5;
                w - half_pw
            }
            MetricChoice::M2 => gf.solve_right(&self.ey) * 2.0,
            MetricChoice::M3 => &self.ey * 2.0,
        }
    }

    /// Horizontal lift of the Riemannian Hessian applied to horizontal `eta`.
    pub fn hessian(&self, metric: MetricChoice, eta: &Mat) -> Mat {
        let gf = self.point.gram_factor();
        let k = self.lyap_hessian_times_y(eta);
        match metric {
            MetricChoice::M1 => {
                let w = gf.solve_right(&k);
                let main = &w - self.point.range_projection(&w) * 0.5;
                main + self.residual_correction_m1(eta)
            }
            MetricChoice::M2 => self.hessian_m2(eta, &k),
            MetricChoice::M3 => {
                let raw = (k + self.residual_apply(eta)) * 2.0;
                self.project(MetricChoice::M3, &raw)
            }
        }
    }

    /// `(I − P) E (I − P) η (YᵀY)⁻¹`.
    pub fn residual_correction_m1(&self, eta: &Mat) -> Mat {
        let q = eta - self.point.range_projection(eta);
        let e = self.residual_apply(&q);
        let e = &e - self.point.range_projection(&e);
        self.point.gram_factor().solve_right(&e)
    }

    /// `2 K (YᵀY)⁻¹ + E P⊥η (YᵀY)⁻¹ + P⊥Eη (YᵀY)⁻¹ + 2 skew(ηYᵀ) E Y (YᵀY)⁻²
    /// + 2 skew(η (YᵀY)⁻¹ Yᵀ E) Y (YᵀY)⁻¹`, projected horizontally.
    fn hessian_m2(&self, eta: &Mat, k: &Mat) -> Mat {
        let y = &self.point.y;
        let gf = self.point.gram_factor();
        let perp_eta = eta - self.point.range_projection(eta);
        let e_eta = self.residual_apply(eta);
        let perp_e_eta = &e_eta - self.point.range_projection(&e_eta);
        let mut t = gf.solve_right(&(k * 2.0 + self.residual_apply(&perp_eta) + perp_e_eta));
        let w = gf.solve_right(&gf.solve_right(&self.ey));
        t += eta * y.tr_mul(&w) - y * eta.tr_mul(&w);
        let v = gf.solve_right(y);
        let eta_g = gf.solve_right(eta);
        t += eta_g * self.ey.tr_mul(&v) - gf.solve_right(&self.ey) * eta.tr_mul(&v);
        self.project(MetricChoice::M2, &t)
    }
}
