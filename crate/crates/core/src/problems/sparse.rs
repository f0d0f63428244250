use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric, LdlSymbolic};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Sparse symmetric positive definite matrix in CSR storage.
#[derive(Clone, Debug)]
pub struct SpdSparseMatrix {
    csr: CsMat<f64>,
}

impl SpdSparseMatrix {
    /// Wraps a CSR matrix after checking exact symmetry and positive definiteness.
    pub fn new(name: &str, csr: CsMat<f64>) -> Result<Self> {
        let csr = csr.to_csr();
        if csr.rows() != csr.cols() {
            return Err(Error::NotSymmetric {
                operand: name.to_string(),
                row: csr.rows(),
                col: csr.cols(),
            });
        }
        if let Some((row, col)) = first_asymmetry(&csr) {
            return Err(Error::NotSymmetric {
                operand: name.to_string(),
                row,
                col,
            });
        }
        let out = SpdSparseMatrix { csr };
        out.check_positive_definite(name)?;
        Ok(out)
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(name: &str, n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut tri = TriMat::new((n, n));
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) of `{name}` is outside a {n}×{n} matrix"
                )));
            }
            tri.add_triplet(i, j, v);
        }
        Self::new(name, tri.to_csr())
    }

    pub fn identity(n: usize) -> Self {
        SpdSparseMatrix {
            csr: CsMat::eye(n),
        }
    }

    pub fn from_diagonal(name: &str, diag: &[f64]) -> Result<Self> {
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(name, diag.len(), &entries)
    }

    pub fn n(&self) -> usize {
        self.csr.rows()
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn csr(&self) -> &CsMat<f64> {
        &self.csr
    }

    pub fn is_identity(&self) -> bool {
        self.csr
            .iter()
            .all(|(&v, (i, j))| if i == j { v == 1.0 } else { v == 0.0 })
            && (0..self.n()).all(|i| self.csr.get(i, i) == Some(&1.0))
    }

    /// `self · X` for a dense `n×k` matrix.
    pub fn mul_dense(&self, x: &Mat) -> Mat {
        assert_eq!(x.nrows(), self.n(), "operand rows must match matrix order");
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        let indptr = self.csr.indptr();
        let indices = self.csr.indices();
        let data = self.csr.data();
        for k in 0..x.ncols() {
            let xc = x.column(k);
            let mut oc = out.column_mut(k);
            for i in 0..self.n() {
                let range = indptr.outer_inds_sz(i);
                let mut acc = 0.0;
                for idx in range {
                    acc += data[idx] * xc[indices[idx]];
                }
                oc[i] = acc;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat {
        let mut out = Mat::zeros(self.n(), self.n());
        for (&v, (i, j)) in self.csr.iter() {
            out[(i, j)] += v;
        }
        out
    }

    fn check_positive_definite(&self, name: &str) -> Result<()> {
        let symbolic = symbolic_factor(&self.csr);
        factor_with(&symbolic, &self.csr).map(|_| ()).map_err(|_| Error::NotPositiveDefinite {
            operand: name.to_string(),
            detail: "sparse LDLᵀ factorization produced a non-positive pivot".into(),
        })
    }
}

fn first_asymmetry(csr: &CsMat<f64>) -> Option<(usize, usize)> {
    for (&v, (i, j)) in csr.iter() {
        if i != j && csr.get(j, i) != Some(&v) {
            return Some((i, j));
        }
    }
    None
}

/// Fixed sparsity pattern of `A + λ·B` for two symmetric matrices, so that
/// one symbolic factorization serves every shift.
#[derive(Clone, Debug)]
pub struct ShiftedPattern {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    // For each stored entry: positions in `a` and `b`, if present.
    a_pos: Vec<Option<usize>>,
    b_pos: Vec<Option<usize>>,
    symbolic: LdlSymbolic<usize>,
    a: CsMat<f64>,
    b: CsMat<f64>,
}

impl ShiftedPattern {
    pub fn new(a: &SpdSparseMatrix, b: &SpdSparseMatrix) -> Result<Self> {
        let (a, b) = (a.csr().clone(), b.csr().clone());
        if a.rows() != b.rows() {
            return Err(Error::dims("M", (a.rows(), a.rows()), (b.rows(), b.rows())));
        }
        let n = a.rows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut a_pos = Vec::new();
        let mut b_pos = Vec::new();
        indptr.push(0);
        let (ap, ai) = (a.indptr(), a.indices());
        let (bp, bi) = (b.indptr(), b.indices());
        for row in 0..n {
            let ra = ap.outer_inds_sz(row);
            let rb = bp.outer_inds_sz(row);
            let (mut x, mut y) = (ra.start, rb.start);
            while x < ra.end || y < rb.end {
                let ca = if x < ra.end { ai[x] } else { usize::MAX };
                let cb = if y < rb.end { bi[y] } else { usize::MAX };
                let col = ca.min(cb);
                indices.push(col);
                a_pos.push((ca == col).then_some(x));
                b_pos.push((cb == col).then_some(y));
                if ca == col {
                    x += 1;
                }
                if cb == col {
                    y += 1;
                }
            }
            indptr.push(indices.len());
        }
        let pattern = CsMat::new((n, n), indptr.clone(), indices.clone(), vec![1.0; indices.len()]);
        let symbolic = symbolic_factor(&pattern);
        Ok(ShiftedPattern {
            indptr,
            indices,
            a_pos,
            b_pos,
            symbolic,
            a,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Assembles `A + λ·B` on the shared pattern.
    pub fn shifted(&self, lambda: f64) -> CsMat<f64> {
        let (ad, bd) = (self.a.data(), self.b.data());
        let data = self
            .a_pos
            .iter()
            .zip(&self.b_pos)
            .map(|(pa, pb)| pa.map_or(0.0, |k| ad[k]) + lambda * pb.map_or(0.0, |k| bd[k]))
            .collect();
        let n = self.n();
        CsMat::new((n, n), self.indptr.clone(), self.indices.clone(), data)
    }

    /// Numeric LDLᵀ factorization of `A + λ·B`; fails unless all pivots are positive.
    pub fn factor(&self, lambda: f64) -> Result<SparseSpdFactor> {
        factor_with(&self.symbolic, &self.shifted(lambda))
    }
}

/// Numeric sparse SPD factorization.
pub struct SparseSpdFactor {
    numeric: LdlNumeric<f64, usize>,
}

impl std::fmt::Debug for SparseSpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseSpdFactor").finish_non_exhaustive()
    }
}

impl SparseSpdFactor {
    pub fn solve(&self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(rhs.nrows(), rhs.ncols());
        for k in 0..rhs.ncols() {
            let col: Vec<f64> = rhs.column(k).iter().copied().collect();
            let sol = self.numeric.solve(&col);
            out.column_mut(k).copy_from_slice(&sol);
        }
        out
    }
}

fn symbolic_factor(mat: &CsMat<f64>) -> LdlSymbolic<usize> {
    Ldl::new()
        .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
        .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
        .symbolic(mat.view())
}

fn factor_with(symbolic: &LdlSymbolic<usize>, mat: &CsMat<f64>) -> Result<SparseSpdFactor> {
    let numeric = symbolic
        .clone()
        .factor(mat.view())
        .map_err(|e| Error::NotPositiveDefinite {
            operand: "shifted operator".into(),
            detail: format!("numeric factorization failed: {e}"),
        })?;
    let d = numeric.d();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d.iter().any(|&v| !(v > dmax * 1e-14)) {
        return Err(Error::NotPositiveDefinite {
            operand: "shifted operator".into(),
            detail: "non-positive pivot in LDLᵀ".into(),
        });
    }
    Ok(SparseSpdFactor { numeric })
}
