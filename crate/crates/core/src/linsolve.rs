//! Sparse direct solves for mass matrices and bordered saddle systems.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::assembly::sparse::{norm2, SparseMatrix, TripletBuilder};
use crate::error::{Error, Result};

/// Pivots below this fraction of `max |A_ij|` are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

enum Inner {
    Lu(Lu<usize, f64>),
    Llt(Llt<usize, f64>),
    /// Unpivoted `L D L^T` after a fill-reducing symmetric ordering.
    Ldlt {
        symbolic: SymbolicCholesky<usize>,
        values: Vec<f64>,
    },
}

/// A factorized square matrix.
pub struct Factorization {
    n: usize,
    inner: Inner,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.inner {
            Inner::Lu(_) => "lu",
            Inner::Llt(_) => "cholesky",
            Inner::Ldlt { .. } => "ldlt",
        };
        f.debug_struct("Factorization").field("n", &self.n).field("kind", &kind).finish()
    }
}

fn to_faer(a: &SparseMatrix, lower_only: bool) -> Result<SparseColMat<usize, f64>> {
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        for (j, v) in a.row(i) {
            if !lower_only || j <= i {
                t.push(Triplet::new(i, j, v));
            }
        }
    }
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &t)
        .map_err(|e| Error::Solver(format!("sparse conversion failed: {e:?}")))
}

fn check_square(a: &SparseMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "cannot factor a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// LU factorization with partial pivoting.
///
/// The backend does not expose its pivots, so after factoring a probe solve
/// checks accuracy and estimates `||A^-1||`; near-zero pivots are reported
/// as [`Error::Singular`].
pub fn factor(a: &SparseMatrix) -> Result<Factorization> {
    check_square(a)?;
    let n = a.nrows();
    let scale = a.max_abs();
    if n > 0 && scale == 0.0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    let mat = to_faer(a, false)?;
    // the backend panics on an exactly zero numeric pivot instead of returning an error
    let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| mat.sp_lu()))
        .map_err(|_| Error::Singular("exactly zero pivot".into()))?;
    let lu = lu.map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => {
            Error::Singular(format!("structurally singular at column {index}"))
        }
        other => Error::Solver(format!("{other:?}")),
    })?;
    let f = Factorization {
        n,
        inner: Inner::Lu(lu),
    };
    f.probe(a)?;
    Ok(f)
}

/// Factorization of a symmetric matrix. Tries an unpivoted `L D L^T`
/// (always defined for quasi-definite matrices such as
/// `[[-M, B^T], [B, C]]` with `M`, `C` positive definite) and falls back to
/// pivoted LU when it breaks down or its probe solve is inaccurate.
pub fn factor_symmetric(a: &SparseMatrix) -> Result<Factorization> {
    check_square(a)?;
    if let Some(f) = try_ldlt(a) {
        if f.probe(a).is_ok() {
            return Ok(f);
        }
    }
    factor(a)
}

fn try_ldlt(a: &SparseMatrix) -> Option<Factorization> {
    let n = a.nrows();
    if n == 0 || a.max_abs() == 0.0 {
        return None;
    }
    let mat = to_faer(a, true).ok()?;
    let symbolic =
        factorize_symbolic_cholesky(mat.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default()).ok()?;
    let mut values = vec![0.0; symbolic.len_val()];
    let req = symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default());
    let mut buf = MemBuffer::try_new(req).ok()?;
    symbolic
        .factorize_numeric_ldlt(
            &mut values,
            mat.as_ref(),
            Side::Lower,
            LdltRegularization::default(),
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .ok()?;
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Factorization {
        n,
        inner: Inner::Ldlt { symbolic, values },
    })
}

/// Cholesky factorization; fails with [`Error::NotPositiveDefinite`] when a
/// nonpositive pivot is met.
pub fn factor_spd(a: &SparseMatrix) -> Result<Factorization> {
    check_square(a)?;
    let llt = to_faer(a, true)?
        .sp_cholesky(Side::Lower)
        .map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(_) => {
                Error::NotPositiveDefinite("nonpositive pivot in Cholesky factorization".into())
            }
            other => Error::Solver(format!("{other:?}")),
        })?;
    let f = Factorization {
        n: a.nrows(),
        inner: Inner::Llt(llt),
    };
    f.probe(a)?;
    Ok(f)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.inner, Inner::Llt(_))
    }

    fn probe(&self, a: &SparseMatrix) -> Result<()> {
        if self.n == 0 {
            return Ok(());
        }
        // Backward error of a probe solve: forward error would scale with the
        // condition number, which is legitimately large for shifted operators.
        let x0: Vec<f64> = (0..self.n).map(|i| 1.0 + ((i * 7919) % 113) as f64 / 113.0).collect();
        let b0 = a.mul_vec(&x0);
        let x = self.solve(&b0)?;
        let ax = a.mul_vec(&x);
        let r = norm2(&ax.iter().zip(&b0).map(|(p, q)| p - q).collect::<Vec<_>>());
        let err = r / (a.max_abs() * norm2(&x) + norm2(&b0));
        if !err.is_finite() || err > PIVOT_THRESHOLD {
            return Err(Error::Singular(format!("unstable probe solve (backward error {err:e})")));
        }
        // Two steps of inverse iteration bound ||A^-1|| from below; a pivot
        // under the threshold makes max|A| * ||A^-1|| exceed its inverse.
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let b: Vec<f64> = (0..self.n).map(|i| (((i * 104_729) % 2003) as f64 / 1001.0) - 1.0).collect();
        let mut y = self.solve(&b)?;
        let ny = inf(&y);
        y.iter_mut().for_each(|v| *v /= ny);
        let z = self.solve(&y)?;
        let growth = a.max_abs() * inf(&z).max(ny / inf(&b));
        if !growth.is_finite() || growth > 1.0 / PIVOT_THRESHOLD {
            return Err(Error::Singular(format!(
                "pivot below {PIVOT_THRESHOLD:e} * max|A| (estimated max|A| ||A^-1|| = {growth:e})"
            )));
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side of length {} for a system of order {}",
                b.len(),
                self.n
            )));
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = match &self.inner {
            Inner::Lu(lu) => lu.solve(&rhs),
            Inner::Llt(llt) => llt.solve(&rhs),
            Inner::Ldlt { symbolic, values } => {
                let mut x = rhs;
                let mut buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    x.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut buf),
                );
                x
            }
        };
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite solution".into()));
        }
        Ok(out)
    }
}

/// Relative residual `||A x - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = norm2(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    let nb = norm2(b);
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Blocks of the symmetric saddle matrix
/// `[[-M_sigma, B^T, 0], [B, C, H], [0, H^T, 0]]`.
#[derive(Debug, Clone)]
pub struct BlockSaddleSystem {
    pub m_sigma: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    /// Dense constraint columns, each of length `n_u`.
    pub h: Vec<Vec<f64>>,
}

impl BlockSaddleSystem {
    pub fn new(m_sigma: SparseMatrix, b: SparseMatrix, c: SparseMatrix, h: Vec<Vec<f64>>) -> Result<Self> {
        let ns = m_sigma.nrows();
        let nu = c.nrows();
        if m_sigma.ncols() != ns || c.ncols() != nu || b.nrows() != nu || b.ncols() != ns {
            return Err(Error::ShapeMismatch(format!(
                "M_sigma {}x{}, B {}x{}, C {}x{}",
                m_sigma.nrows(),
                m_sigma.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if let Some(col) = h.iter().find(|col| col.len() != nu) {
            return Err(Error::ShapeMismatch(format!(
                "constraint column of length {}, expected {nu}",
                col.len()
            )));
        }
        Ok(Self { m_sigma, b, c, h })
    }

    pub fn n_sigma(&self) -> usize {
        self.m_sigma.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_h(&self) -> usize {
        self.h.len()
    }

    pub fn order(&self) -> usize {
        self.n_sigma() + self.n_u() + self.n_h()
    }

    pub fn matrix(&self) -> SparseMatrix {
        let (ns, nu) = (self.n_sigma(), self.n_u());
        let n = self.order();
        let nnz = self.m_sigma.nnz() + 2 * self.b.nnz() + self.c.nnz() + 2 * nu * self.n_h();
        let mut t = TripletBuilder::with_capacity(n, n, nnz);
        t.add_block(0, 0, &self.m_sigma, -1.0);
        t.add_block_transposed(0, ns, &self.b, 1.0);
        t.add_block(ns, 0, &self.b, 1.0);
        t.add_block(ns, ns, &self.c, 1.0);
        for (k, col) in self.h.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                t.push(ns + i, ns + nu + k, v);
                t.push(ns + nu + k, ns + i, v);
            }
        }
        t.build()
    }

    /// Verifies that `H` has full column rank, then LU-factors the assembled matrix.
    pub fn factor(&self) -> Result<SaddleSolver> {
        check_full_column_rank(&self.h)?;
        let matrix = self.matrix();
        let fact = factor_symmetric(&matrix)?;
        Ok(SaddleSolver {
            n_sigma: self.n_sigma(),
            n_u: self.n_u(),
            n_h: self.n_h(),
            matrix,
            fact,
        })
    }
}

/// Assembles the saddle matrix from its blocks; `h` may be empty.
pub fn assemble_saddle(
    m_sigma: &SparseMatrix,
    b: &SparseMatrix,
    c: &SparseMatrix,
    h: Option<&[Vec<f64>]>,
) -> Result<SparseMatrix> {
    let sys = BlockSaddleSystem::new(
        m_sigma.clone(),
        b.clone(),
        c.clone(),
        h.map(<[Vec<f64>]>::to_vec).unwrap_or_default(),
    )?;
    Ok(sys.matrix())
}

fn check_full_column_rank(h: &[Vec<f64>]) -> Result<()> {
    // modified Gram-Schmidt with a relative drop test
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(h.len());
    for (k, col) in h.iter().enumerate() {
        let n0 = norm2(col);
        let mut v = col.clone();
        for q in &basis {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let nv = norm2(&v);
        if n0 == 0.0 || nv <= 1e-10 * n0 {
            return Err(Error::Singular(format!("constraint column {k} is linearly dependent")));
        }
        v.iter_mut().for_each(|a| *a /= nv);
        basis.push(v);
    }
    Ok(())
}

/// A factorized saddle system, reusable across right-hand sides.
#[derive(Debug)]
pub struct SaddleSolver {
    n_sigma: usize,
    n_u: usize,
    n_h: usize,
    matrix: SparseMatrix,
    fact: Factorization,
}

/// Block solution `(sigma, u, p)` of a saddle system.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub relative_residual: f64,
}

impl SaddleSolver {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solves with block right-hand side `(g_sigma; g_u; g_h)`; `g_h` may be
    /// empty when there are no constraint columns.
    pub fn solve(&self, g_sigma: &[f64], g_u: &[f64], g_h: &[f64]) -> Result<SaddleSolution> {
        if g_sigma.len() != self.n_sigma || g_u.len() != self.n_u || g_h.len() != self.n_h {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side blocks {}/{}/{}, expected {}/{}/{}",
                g_sigma.len(),
                g_u.len(),
                g_h.len(),
                self.n_sigma,
                self.n_u,
                self.n_h
            )));
        }
        let mut rhs = Vec::with_capacity(self.fact.dim());
        rhs.extend_from_slice(g_sigma);
        rhs.extend_from_slice(g_u);
        rhs.extend_from_slice(g_h);
        let x = self.fact.solve(&rhs)?;
        let relative_residual = relative_residual(&self.matrix, &x, &rhs);
        let (ns, nu) = (self.n_sigma, self.n_u);
        Ok(SaddleSolution {
            sigma: x[..ns].to_vec(),
            u: x[ns..ns + nu].to_vec(),
            p: x[ns + nu..].to_vec(),
            relative_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let f = factor(&SparseMatrix::identity(4)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn two_by_two_spd() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        for f in [factor(&a).unwrap(), factor_spd(&a).unwrap()] {
            let x = f.solve(&[1.0, 1.0]).unwrap();
            assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_matrices_rejected() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(factor(&a), Err(Error::Singular(_))));
        let structurally = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert!(matches!(factor(&structurally), Err(Error::Singular(_))));
        let tiny = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1e-15]]);
        assert!(matches!(factor(&tiny), Err(Error::Singular(_))));
    }

    #[test]
    fn symmetric_factorization_kinds() {
        // quasi-definite: unpivoted LDL^T
        let q = SparseMatrix::from_dense(&[vec![-2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 1.0]]);
        let f = factor_symmetric(&q).unwrap();
        assert!(format!("{f:?}").contains("ldlt"));
        let x = f.solve(&[1.0, 2.0, 3.0]).unwrap();
        assert!(relative_residual(&q, &x, &[1.0, 2.0, 3.0]) < 1e-15);
        // zero leading diagonal needs pivoting
        let p = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = factor_symmetric(&p).unwrap();
        assert_eq!(f.solve(&[2.0, 5.0]).unwrap(), vec![5.0, 2.0]);
        let singular = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(factor_symmetric(&singular), Err(Error::Singular(_))));
    }

    #[test]
    fn indefinite_rejected_by_cholesky() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(factor_spd(&a), Err(Error::NotPositiveDefinite(_))));
        assert!(factor(&a).is_ok());
    }

    #[test]
    fn saddle_layout() {
        let m = SparseMatrix::from_dense(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let b = SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![0.0, 1.0], vec![2.0, 0.0]]);
        let c = SparseMatrix::from_dense(&[vec![3.0, 0.0, 0.0], vec![0.0, 3.0, 1.0], vec![0.0, 1.0, 3.0]]);
        let plain = assemble_saddle(&m, &b, &c, None).unwrap();
        assert_eq!(plain.nrows(), 5);
        assert_eq!(plain.asymmetry(), 0.0);
        assert_eq!(plain.get(0, 0), -2.0);
        assert_eq!(plain.get(2, 0), 1.0);
        assert_eq!(plain.get(0, 2), 1.0);
        let h = vec![vec![1.0, 1.0, 0.0]];
        let bordered = assemble_saddle(&m, &b, &c, Some(&h)).unwrap();
        assert_eq!(bordered.nrows(), 6);
        assert_eq!(bordered.asymmetry(), 0.0);
        assert_eq!(bordered.get(5, 3), 1.0);
        assert_eq!(bordered.get(5, 5), 0.0);
        assert!(matches!(
            assemble_saddle(&m, &c, &c, None),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn dependent_constraints_rejected() {
        let m = SparseMatrix::identity(1);
        let b = SparseMatrix::from_dense(&[vec![1.0], vec![0.0]]);
        let c = SparseMatrix::identity(2);
        let h = vec![vec![1.0, 2.0], vec![-2.0, -4.0]];
        let sys = BlockSaddleSystem::new(m, b, c, h).unwrap();
        assert!(matches!(sys.factor(), Err(Error::Singular(_))));
    }
}
