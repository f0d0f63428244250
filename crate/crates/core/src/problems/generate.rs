use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{LyapunovProblem, SpdSparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// One-dimensional finite-difference Laplacian test problem.
///
/// `A = tridiag(−1, 2, −1)/h²` with `h = 1/(n+1)`, `M` diagonal with entries
/// `u + 0.1` for `u ~ U[0,1)` and a last entry of exactly `0.1`, and `B = c`
/// with `c` standard normal. The stream is ChaCha8 seeded with `seed`.
pub fn gen_poisson(n: usize, seed: u64) -> Result<LyapunovProblem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "poisson generator needs n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_h2 = (n as f64 + 1.0).powi(2);
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n {
        entries.push((i, i, 2.0 * inv_h2));
        if i + 1 < n {
            entries.push((i, i + 1, -inv_h2));
            entries.push((i + 1, i, -inv_h2));
        }
    }
    let a = SpdSparseMatrix::from_triplets("A", n, &entries)?;
    let mut diag: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
    diag.push(0.0);
    diag.iter_mut().for_each(|d| *d += 0.1);
    let m = SpdSparseMatrix::from_diagonal("M", &diag)?;
    let b = Mat::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
    LyapunovProblem::new(a, m, b)
}

/// Random sparse, strictly diagonally dominant SPD matrix.
///
/// Each off-diagonal pair is present with probability `density`; diagonal
/// entries exceed the absolute row sum by a value in `[1, 2)`.
pub fn gen_random_spd(n: usize, density: f64, seed: u64) -> SpdSparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5bd0);
    let mut entries = Vec::new();
    let mut rowsum = vec![0.0f64; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                let v: f64 = rng.sample(StandardNormal);
                entries.push((i, j, v));
                entries.push((j, i, v));
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
        }
    }
    for (i, s) in rowsum.iter().enumerate() {
        entries.push((i, i, s + 1.0 + rng.random::<f64>()));
    }
    SpdSparseMatrix::from_triplets("random SPD", n, &entries)
        .expect("diagonally dominant construction is SPD")
}
