#![allow(dead_code)]

use irrlyap::linalg::Mat;
use irrlyap::manifold::{cost_raw, metric_inner, FactorPoint, MetricChoice};
use irrlyap::problems::{gen_random_spd, LyapunovProblem, SpdSparseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn rel_mat(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// Random sparse SPD `A`, `M` and a Gaussian `B` with `s` columns.
pub fn random_problem(n: usize, s: usize, seed: u64) -> LyapunovProblem {
    let mut r = rng(seed ^ 0x5eed);
    LyapunovProblem::new(
        gen_random_spd(n, 0.15, seed),
        gen_random_spd(n, 0.15, seed.wrapping_add(1000)),
        randn(&mut r, n, s),
    )
    .unwrap()
}

/// `A = M = I`, `B = √2·Y*`, so `Y* Y*ᵀ` solves the equation exactly.
pub fn identity_problem(n: usize, p: usize, seed: u64) -> (LyapunovProblem, Mat) {
    let mut r = rng(seed);
    let ystar = randn(&mut r, n, p);
    let id = SpdSparseMatrix::identity(n);
    let prob = LyapunovProblem::new(id.clone(), id, &ystar * 2f64.sqrt()).unwrap();
    (prob, ystar)
}

/// Dense `n²×n²` Kronecker solve of `A X M + M X A = C`.
pub fn kronecker_solve(a: &Mat, m: &Mat, c: &Mat) -> Mat {
    let n = a.nrows();
    let big = a.kronecker(m) + m.kronecker(a);
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let x = big.lu().solve(&rhs).expect("Kronecker system is nonsingular");
    Mat::from_column_slice(n, n, x.as_slice())
}

pub fn dense_residual(prob: &LyapunovProblem, y: &Mat) -> Mat {
    let (a, m) = (prob.a().to_dense(), prob.m().to_dense());
    let x = y * y.transpose();
    &a * &x * &m + &m * &x * &a - prob.b() * prob.b().transpose()
}

/// `f̄` at `Y + s·U + t·V`.
fn cost_at(prob: &LyapunovProblem, y: &Mat, u: &Mat, s: f64, v: &Mat, t: f64) -> f64 {
    cost_raw(prob, &(y + u * s + v * t)).unwrap()
}

/// `D²f̄(Y)[u, v]` by a Richardson-extrapolated mixed central difference,
/// exact up to rounding for the quartic cost.
pub fn cost_second_derivative(prob: &LyapunovProblem, y: &Mat, u: &Mat, v: &Mat, h: f64) -> f64 {
    let mixed = |h: f64| {
        (cost_at(prob, y, u, h, v, h) - cost_at(prob, y, u, h, v, -h) - cost_at(prob, y, u, -h, v, h)
            + cost_at(prob, y, u, -h, v, -h))
            / (4.0 * h * h)
    };
    (4.0 * mixed(h) - mixed(2.0 * h)) / 3.0
}

/// `Df̄(Y)[v]` by a Richardson-extrapolated central difference.
pub fn cost_derivative(prob: &LyapunovProblem, y: &Mat, v: &Mat, h: f64) -> f64 {
    let zero = Mat::zeros(y.nrows(), y.ncols());
    let c = |h: f64| (cost_at(prob, y, v, h, &zero, 0.0) - cost_at(prob, y, v, -h, &zero, 0.0)) / (2.0 * h);
    (4.0 * c(h) - c(2.0 * h)) / 3.0
}

/// Derivative of the metric tensor: `(Dg(Y)[w])(a, b)` with `a`, `b` held fixed.
pub fn metric_derivative(metric: MetricChoice, y: &Mat, w: &Mat, a: &Mat, b: &Mat, h: f64) -> f64 {
    let g = |t: f64| {
        let pt = FactorPoint::new(y + w * t).unwrap();
        metric_inner(metric, &pt, a, b).unwrap()
    };
    let c = |h: f64| (g(h) - g(-h)) / (2.0 * h);
    (4.0 * c(h) - c(2.0 * h)) / 3.0
}

/// `g(Hess f[η], ξ)` from the Koszul formula of the total-space Levi-Civita
/// connection, for horizontal `η`, `ξ` and the lifted gradient `x`:
///
/// `D²f̄[η, ξ] − ½ (Dg[η](x, ξ) − Dg[x](η, ξ) + Dg[ξ](η, x))`.
pub fn koszul_hessian_form(
    metric: MetricChoice,
    prob: &LyapunovProblem,
    y: &Mat,
    grad: &Mat,
    eta: &Mat,
    xi: &Mat,
) -> f64 {
    let scale = y.norm();
    let hf = 1e-3 * scale / eta.norm().max(xi.norm());
    let d2 = cost_second_derivative(prob, y, eta, xi, hf);
    let dg = |w: &Mat, a: &Mat, b: &Mat| metric_derivative(metric, y, w, a, b, 1e-4 * scale / w.norm());
    d2 - 0.5 * (dg(eta, grad, xi) - dg(grad, eta, xi) + dg(xi, eta, grad))
}
