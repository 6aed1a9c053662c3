//! Discrete codifferential, Hodge Laplacian, harmonic forms, and the
//! mixed Galerkin and elliptic-projection solves.

use std::sync::Arc;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::sparse::{dot, norm2, SparseMatrix, TripletBuilder};
use crate::assembly::{
    curl_stiffness_matrix, gradient_stiffness_matrix, integrate, load_degree, load_vector, mass_matrix,
    mixed_derivative_matrix,
};
use crate::elements::{build_space, exterior_derivative_matrix, BasisValues, Family, FeSpace, Field};
use crate::error::{Error, Result};
use crate::geometry::{dot as dot3, Vec3};
use crate::linsolve::{factor, factor_spd, BlockSaddleSystem, Factorization, SaddleSolver};
use crate::mesh::SimplicialMesh;

/// Shift added to the Hodge Laplacian so its inverse exists on meshes with
/// harmonic forms; it sits far below the first nonzero eigenvalue.
pub const HARMONIC_SHIFT: f64 = 1e-6;
/// Required ratio between the first non-harmonic and the last harmonic Ritz value.
pub const GAP_FACTOR: f64 = 1e3;
/// Ritz values below this are indistinguishable from zero.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

/// The pair `(P_r Lambda^0, P_r^- Lambda^1)` with the matrices shared by all solves.
#[derive(Debug)]
pub struct MixedPair {
    pub sigma_space: Arc<FeSpace>,
    pub u_space: Arc<FeSpace>,
    /// Mass matrix of the 0-form space.
    pub m_sigma: SparseMatrix,
    /// Mass matrix of the 1-form space.
    pub m_u: SparseMatrix,
    /// `B[i][j] = <d tau_j, v_i>`.
    pub b: SparseMatrix,
    /// `K[i][j] = <d v_j, d v_i>`.
    pub k: SparseMatrix,
    /// Coefficients of `d tau_j` in the 1-form basis.
    pub d: SparseMatrix,
    m_sigma_fact: Factorization,
    m_u_fact: Factorization,
}

impl MixedPair {
    /// Builds `P_r Lambda^0 x P_r^- Lambda^1` on `mesh`.
    pub fn new(mesh: Arc<SimplicialMesh>, r: usize) -> Result<Self> {
        let sigma = build_space(mesh.clone(), Family::Lagrange, 0, r)?;
        let u = build_space(mesh, Family::TrimmedPminus, 1, r)?;
        Self::from_spaces(sigma, u)
    }

    pub fn from_spaces(sigma_space: Arc<FeSpace>, u_space: Arc<FeSpace>) -> Result<Self> {
        let b = mixed_derivative_matrix(&sigma_space, &u_space)?;
        let d = exterior_derivative_matrix(&sigma_space, &u_space)?;
        let m_sigma = mass_matrix(&sigma_space)?;
        let m_u = mass_matrix(&u_space)?;
        let k = curl_stiffness_matrix(&u_space)?;
        let m_sigma_fact = factor_spd(&m_sigma)?;
        let m_u_fact = factor_spd(&m_u)?;
        Ok(Self {
            sigma_space,
            u_space,
            m_sigma,
            m_u,
            b,
            k,
            d,
            m_sigma_fact,
            m_u_fact,
        })
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        self.u_space.mesh()
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma_space.dof_count()
    }

    pub fn n_u(&self) -> usize {
        self.u_space.dof_count()
    }

    /// Solves `M_sigma x = rhs`.
    pub fn solve_m_sigma(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.m_sigma_fact.solve(rhs)
    }

    /// Solves `M_u x = rhs`.
    pub fn solve_m_u(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.m_u_fact.solve(rhs)
    }

    fn check_u_field(&self, v: &Field) -> Result<()> {
        if !Arc::ptr_eq(&v.space, &self.u_space) {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// `||v||_M` for 1-form coefficients.
    pub fn norm_u(&self, v: &[f64]) -> f64 {
        self.m_u.bilinear(v, v).max(0.0).sqrt()
    }

    /// Saddle system with `C = c` and constraint columns `h`.
    pub fn saddle(&self, c: SparseMatrix, h: Vec<Vec<f64>>) -> Result<BlockSaddleSystem> {
        BlockSaddleSystem::new(self.m_sigma.clone(), self.b.clone(), c, h)
    }
}

/// `d*_h v`: the 0-form `s` with `<s, tau> = <v, d tau>` for all `tau`.
pub fn dstar_h(pair: &MixedPair, v: &Field) -> Result<Field> {
    pair.check_u_field(v)?;
    let s = pair.solve_m_sigma(&pair.b.mul_vec_transposed(&v.coeffs))?;
    Field::from_coeffs(&pair.sigma_space, s)
}

/// `L_h v = d*_h d v + d d*_h v`, from `M_u (L_h v) = K v + B M_sigma^{-1} B^T v`.
pub fn apply_lh(pair: &MixedPair, v: &Field) -> Result<Field> {
    pair.check_u_field(v)?;
    let s = pair.solve_m_sigma(&pair.b.mul_vec_transposed(&v.coeffs))?;
    let mut rhs = pair.k.mul_vec(&v.coeffs);
    for (r, bs) in rhs.iter_mut().zip(pair.b.mul_vec(&s)) {
        *r += bs;
    }
    Field::from_coeffs(&pair.u_space, pair.solve_m_u(&rhs)?)
}

/// `<L_h v, w>_M` computed without the outer mass solve.
pub fn lh_form(pair: &MixedPair, v: &[f64], w: &[f64]) -> Result<f64> {
    let sv = pair.solve_m_sigma(&pair.b.mul_vec_transposed(v))?;
    let btw = pair.b.mul_vec_transposed(w);
    Ok(pair.k.bilinear(w, v) + dot(&sv, &btw))
}

/// An M-orthonormal basis of the discrete harmonic 1-forms.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub fields: Vec<Field>,
    /// Ritz values of `L_h` on the iterated block, ascending.
    pub ritz_values: Vec<f64>,
    /// `(||d q||, ||d*_h q||)` per member.
    pub residuals: Vec<(f64, f64)>,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// Columns `M_u q` used as constraint rows in bordered systems.
    pub fn constraint_columns(&self, pair: &MixedPair) -> Vec<Vec<f64>> {
        self.fields.iter().map(|q| pair.m_u.mul_vec(&q.coeffs)).collect()
    }

    /// `P_H v = sum_q <v, q> q` in coefficients.
    pub fn project(&self, pair: &MixedPair, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let mv = pair.m_u.mul_vec(v);
        for q in &self.fields {
            let a = dot(&mv, &q.coeffs);
            out.iter_mut().zip(&q.coeffs).for_each(|(o, qi)| *o += a * qi);
        }
        out
    }
}

/// Betti number `b_1` of the mesh, the expected harmonic dimension.
pub fn expected_harmonic_dim(mesh: &SimplicialMesh) -> usize {
    mesh.betti_numbers()[1]
}

fn m_orthonormalize(m: &SparseMatrix, block: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for v in block.drain(..) {
        let mut v = v;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &out {
                let p = m.bilinear(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = m.bilinear(&v, &v).max(0.0).sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|a| *a /= n);
            out.push(v);
        }
    }
    *block = out;
}

/// Symmetric eigen-decomposition of a small dense matrix, ascending.
fn small_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let vals = order.iter().map(|&k| s[k]).collect();
    let vecs = order.iter().map(|&k| (0..n).map(|i| u[(i, k)]).collect()).collect();
    Ok((vals, vecs))
}

/// `||d q||` by quadrature of the curl field (no cancellation in `q^T K q`).
fn curl_norm(q: &Field) -> Result<f64> {
    let space = &q.space;
    let mut scratch = BasisValues::with_len(space.local_dim());
    let v = integrate(space.mesh(), load_degree(space), |c, g, p, _| {
        let (_, d) = q.eval(c, g, p, &mut scratch);
        dot3(&d, &d)
    })?;
    Ok(v.max(0.0).sqrt())
}

/// Computes `expected_dim` M-orthonormal discrete harmonic 1-forms by inverse
/// subspace iteration on the (slightly shifted) saddle form of `L_h`.
pub fn harmonic_basis(pair: &MixedPair, expected_dim: usize) -> Result<HarmonicBasis> {
    let n = pair.n_u();
    let block_size = (expected_dim + 2).min(n);
    if expected_dim >= n {
        return Err(Error::TopologyMismatch(format!(
            "{expected_dim} harmonic forms requested in a space of dimension {n}"
        )));
    }
    let shifted = pair.k.linear_combination(1.0, &pair.m_u, HARMONIC_SHIFT)?;
    let solver = pair.saddle(shifted, Vec::new())?.factor()?;
    let zeros = vec![0.0; pair.n_sigma()];

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> = (0..block_size)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    m_orthonormalize(&pair.m_u, &mut block);

    let mut ritz = vec![f64::INFINITY; block_size];
    for _iter in 0..100 {
        let mut next = Vec::with_capacity(block.len());
        for v in &block {
            next.push(solver.solve(&zeros, &pair.m_u.mul_vec(v), &[])?.u);
        }
        m_orthonormalize(&pair.m_u, &mut next);
        // Rayleigh-Ritz with the M-orthonormal block
        let lv: Vec<Vec<f64>> = next
            .iter()
            .map(|v| pair.solve_m_sigma(&pair.b.mul_vec_transposed(v)))
            .collect::<Result<_>>()?;
        let kv: Vec<Vec<f64>> = next.iter().map(|v| pair.k.mul_vec(v)).collect();
        let m = next.len();
        let a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| dot(&next[i], &kv[j]) + dot(&lv[i], &pair.b.mul_vec_transposed(&next[j])))
                    .collect()
            })
            .collect();
        let (vals, vecs) = small_eigen(&a)?;
        block = (0..m)
            .map(|k| {
                let mut v = vec![0.0; n];
                for (j, c) in vecs[k].iter().enumerate() {
                    v.iter_mut().zip(&next[j]).for_each(|(o, x)| *o += c * x);
                }
                v
            })
            .collect();
        m_orthonormalize(&pair.m_u, &mut block);
        let converged = vals
            .iter()
            .zip(&ritz)
            .all(|(new, old)| (new - old).abs() <= 1e-10 * new.abs().max(1.0));
        ritz = vals;
        if converged {
            break;
        }
    }
    if block.len() < expected_dim + 1 && block.len() < n {
        return Err(Error::TopologyMismatch("iteration block collapsed".into()));
    }
    let last_harmonic = if expected_dim == 0 { 0.0 } else { ritz[expected_dim - 1] };
    let first_other = ritz.get(expected_dim).copied().unwrap_or(f64::INFINITY);
    if first_other < GAP_FACTOR * last_harmonic.max(ZERO_EIGENVALUE) {
        return Err(Error::TopologyMismatch(format!(
            "no eigenvalue gap after {expected_dim} harmonic forms (Ritz values {ritz:?})"
        )));
    }
    let mut fields = Vec::with_capacity(expected_dim);
    let mut residuals = Vec::with_capacity(expected_dim);
    for v in block.into_iter().take(expected_dim) {
        let q = Field::from_coeffs(&pair.u_space, v)?;
        let dq = curl_norm(&q)?;
        let s = dstar_h(pair, &q)?;
        let dsq = pair.m_sigma.bilinear(&s.coeffs, &s.coeffs).max(0.0).sqrt();
        if dq > 1e-8 || dsq > 1e-8 {
            return Err(Error::TopologyMismatch(format!(
                "harmonic candidate has ||dq|| = {dq:e}, ||d*q|| = {dsq:e}"
            )));
        }
        residuals.push((dq, dsq));
        fields.push(q);
    }
    Ok(HarmonicBasis {
        fields,
        ritz_values: ritz,
        residuals,
    })
}

/// Solution `(sigma_h, u_h, p_h)` of a bordered Hodge-Laplace system.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub sigma: Field,
    pub u: Field,
    /// Coefficients of `p_h` in the harmonic basis.
    pub p_coeffs: Vec<f64>,
    /// `p_h` as a 1-form.
    pub p: Field,
    /// Norms of the three block residuals relative to the right-hand side.
    pub residuals: [f64; 3],
}

/// Elliptic projection `(sigma_hat, u_hat, p_hat)` of a manufactured solution.
pub type EllipticProjectionResult = MixedSolution;

/// Factorized `[[-M_sigma, B^T, 0], [B, K, M_u Q], [0, (M_u Q)^T, 0]]`.
#[derive(Debug)]
pub struct HodgeLaplaceSolver<'a> {
    pair: &'a MixedPair,
    harmonic: &'a HarmonicBasis,
    system: BlockSaddleSystem,
    solver: SaddleSolver,
}

impl<'a> HodgeLaplaceSolver<'a> {
    pub fn new(pair: &'a MixedPair, harmonic: &'a HarmonicBasis) -> Result<Self> {
        let system = pair.saddle(pair.k.clone(), harmonic.constraint_columns(pair))?;
        let solver = system.factor()?;
        Ok(Self {
            pair,
            harmonic,
            system,
            solver,
        })
    }

    /// Solves with load `g_u` in the second block row and `g_h` in the constraint rows.
    pub fn solve(&self, g_u: &[f64], g_h: &[f64]) -> Result<MixedSolution> {
        let pair = self.pair;
        let zeros = vec![0.0; pair.n_sigma()];
        let sol = self.solver.solve(&zeros, g_u, g_h)?;
        let residuals = block_residuals(&self.system, &sol.sigma, &sol.u, &sol.p, g_u, g_h);
        let mut p = vec![0.0; pair.n_u()];
        for (a, q) in sol.p.iter().zip(&self.harmonic.fields) {
            p.iter_mut().zip(&q.coeffs).for_each(|(o, x)| *o += a * x);
        }
        Ok(MixedSolution {
            sigma: Field::from_coeffs(&pair.sigma_space, sol.sigma)?,
            u: Field::from_coeffs(&pair.u_space, sol.u)?,
            p: Field::from_coeffs(&pair.u_space, p)?,
            p_coeffs: sol.p,
            residuals,
        })
    }
}

/// Per-block residual norms of the bordered system with zero first-row data,
/// each relative to the norm of the full right-hand side (absolute if it vanishes).
fn block_residuals(sys: &BlockSaddleSystem, sigma: &[f64], u: &[f64], p: &[f64], g_u: &[f64], g_h: &[f64]) -> [f64; 3] {
    let ms = sys.m_sigma.mul_vec(sigma);
    let btu = sys.b.mul_vec_transposed(u);
    let r1: Vec<f64> = ms.iter().zip(&btu).map(|(a, b)| b - a).collect();
    let mut r2 = sys.b.mul_vec(sigma);
    r2.iter_mut().zip(sys.c.mul_vec(u)).for_each(|(a, b)| *a += b);
    for (col, pk) in sys.h.iter().zip(p) {
        r2.iter_mut().zip(col).for_each(|(a, b)| *a += pk * b);
    }
    r2.iter_mut().zip(g_u).for_each(|(a, b)| *a -= b);
    let r3: Vec<f64> = sys.h.iter().zip(g_h).map(|(col, g)| dot(col, u) - g).collect();
    let scale = (dot(g_u, g_u) + dot(g_h, g_h)).sqrt();
    let s = if scale > 0.0 { scale } else { 1.0 };
    [norm2(&r1) / s, norm2(&r2) / s, norm2(&r3) / s]
}

/// The Galerkin solution of the Hodge-Laplace problem with source `f`:
/// `<sigma,tau> - <d tau,u> = 0`, `<d sigma,v> + <du,dv> + <p,v> = <f,v>`, `<u,q> = 0`.
pub fn hodge_laplacian_solve(
    pair: &MixedPair,
    harmonic: &HarmonicBasis,
    f: &dyn Fn(&Vec3) -> Vec3,
) -> Result<MixedSolution> {
    let solver = HodgeLaplaceSolver::new(pair, harmonic)?;
    let g_u = load_vector(&pair.u_space, &|x, _| f(x), 0.0)?;
    solver.solve(&g_u, &vec![0.0; harmonic.dim()])
}

/// The elliptic projection: the Galerkin system with data `Lu` and harmonic
/// rows `<u_hat, q> = <u, q>`.
pub fn elliptic_projection(
    pair: &MixedPair,
    harmonic: &HarmonicBasis,
    u: &dyn Fn(&Vec3) -> Vec3,
    lu: &dyn Fn(&Vec3) -> Vec3,
) -> Result<EllipticProjectionResult> {
    let solver = HodgeLaplaceSolver::new(pair, harmonic)?;
    elliptic_projection_with(&solver, u, lu)
}

pub fn elliptic_projection_with(
    solver: &HodgeLaplaceSolver<'_>,
    u: &dyn Fn(&Vec3) -> Vec3,
    lu: &dyn Fn(&Vec3) -> Vec3,
) -> Result<EllipticProjectionResult> {
    let pair = solver.pair;
    let g_u = load_vector(&pair.u_space, &|x, _| lu(x), 0.0)?;
    let g_h = if solver.harmonic.dim() > 0 {
        let fu = load_vector(&pair.u_space, &|x, _| u(x), 0.0)?;
        solver.harmonic.fields.iter().map(|q| dot(&fu, &q.coeffs)).collect()
    } else {
        Vec::new()
    };
    solver.solve(&g_u, &g_h)
}

/// Discrete Hodge decomposition `v = d tau + q + z` with mutually
/// M-orthogonal parts (coefficient vectors in the 1-form space).
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub exact: Vec<f64>,
    pub harmonic: Vec<f64>,
    pub coexact: Vec<f64>,
}

/// Splits `v`; the exact part solves `(D^T M_u D) tau = B^T v` with a
/// mean-zero constraint, the harmonic part projects onto `harmonic`.
pub fn hodge_decomposition(pair: &MixedPair, harmonic: &HarmonicBasis, v: &[f64]) -> Result<HodgeDecomposition> {
    let s = gradient_stiffness_matrix(&pair.sigma_space)?;
    let ns = pair.n_sigma();
    let ones = pair.m_sigma.mul_vec(&vec![1.0; ns]);
    let mut t = TripletBuilder::with_capacity(ns + 1, ns + 1, s.nnz() + 2 * ns);
    t.add_block(0, 0, &s, 1.0);
    for (i, &w) in ones.iter().enumerate() {
        t.push(i, ns, w);
        t.push(ns, i, w);
    }
    let fact = factor(&t.build())?;
    let mut rhs = pair.b.mul_vec_transposed(v);
    rhs.push(0.0);
    let tau = fact.solve(&rhs)?;
    let exact = pair.d.mul_vec(&tau[..ns]);
    let harm = harmonic.project(pair, v);
    let coexact = v
        .iter()
        .zip(&exact)
        .zip(&harm)
        .map(|((a, b), c)| a - b - c)
        .collect();
    Ok(HodgeDecomposition {
        exact,
        harmonic: harm,
        coexact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_square_annulus, build_unit_cube, build_unit_square};
    use std::f64::consts::PI;

    fn annulus_pair(n: usize, r: usize) -> MixedPair {
        MixedPair::new(Arc::new(build_square_annulus(n).unwrap()), r).unwrap()
    }

    #[test]
    fn dstar_of_whitney_function_on_one_triangle() {
        use crate::mesh::MeshOrigin;
        let mesh = SimplicialMesh::from_cells(
            2,
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
            MeshOrigin::External,
        )
        .unwrap();
        let pair = MixedPair::new(Arc::new(mesh), 1).unwrap();
        for e in 0..3 {
            let mut c = vec![0.0; 3];
            c[e] = 1.0;
            let v = Field::from_coeffs(&pair.u_space, c).unwrap();
            let s = dstar_h(&pair, &v).unwrap();
            // dense 3x3 Gaussian elimination oracle
            let mut a = pair.m_sigma.to_dense();
            let mut rhs = pair.b.mul_vec_transposed(&v.coeffs);
            for k in 0..3 {
                for i in k + 1..3 {
                    let f = a[i][k] / a[k][k];
                    for j in k..3 {
                        a[i][j] -= f * a[k][j];
                    }
                    rhs[i] -= f * rhs[k];
                }
            }
            let mut x = [0.0; 3];
            for i in (0..3).rev() {
                x[i] = (rhs[i] - (i + 1..3).map(|j| a[i][j] * x[j]).sum::<f64>()) / a[i][i];
            }
            for i in 0..3 {
                assert!((s.coeffs[i] - x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn annulus_has_one_harmonic_form() {
        for r in 1..=2 {
            let pair = annulus_pair(8, r);
            assert_eq!(expected_harmonic_dim(pair.mesh()), 1);
            let h = harmonic_basis(&pair, 1).unwrap();
            assert_eq!(h.dim(), 1);
            let (dq, dsq) = h.residuals[0];
            assert!(dq <= 1e-8 && dsq <= 1e-8, "{dq} {dsq}");
            assert!((pair.norm_u(&h.fields[0].coeffs) - 1.0).abs() < 1e-12);
            assert!(matches!(harmonic_basis(&pair, 0), Err(Error::TopologyMismatch(_))));
            assert!(matches!(harmonic_basis(&pair, 2), Err(Error::TopologyMismatch(_))));
        }
    }

    #[test]
    fn contractible_domains_have_no_harmonic_forms() {
        let cube = MixedPair::new(Arc::new(build_unit_cube(2).unwrap()), 1).unwrap();
        assert_eq!(expected_harmonic_dim(cube.mesh()), 0);
        assert_eq!(harmonic_basis(&cube, 0).unwrap().dim(), 0);
        let square = MixedPair::new(Arc::new(build_unit_square(4).unwrap()), 2).unwrap();
        assert_eq!(harmonic_basis(&square, 0).unwrap().dim(), 0);
        assert!(matches!(harmonic_basis(&square, 1), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn lh_identities() {
        let pair = annulus_pair(8, 1);
        let h = harmonic_basis(&pair, 1).unwrap();
        let lq = apply_lh(&pair, &h.fields[0]).unwrap();
        assert!(pair.norm_u(&lq.coeffs) < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..pair.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..pair.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vf = Field::from_coeffs(&pair.u_space, v.clone()).unwrap();
        let lv = apply_lh(&pair, &vf).unwrap();
        let lhs = pair.m_u.bilinear(&lv.coeffs, &v);
        let s = dstar_h(&pair, &vf).unwrap();
        let rhs = pair.k.bilinear(&v, &v) + pair.m_sigma.bilinear(&s.coeffs, &s.coeffs);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
        let a = lh_form(&pair, &v, &w).unwrap();
        let b = lh_form(&pair, &w, &v).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn decomposition_reassembles_orthogonally() {
        let pair = annulus_pair(8, 2);
        let h = harmonic_basis(&pair, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..pair.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dec = hodge_decomposition(&pair, &h, &v).unwrap();
        let nv = pair.norm_u(&v);
        let m = &pair.m_u;
        assert!(m.bilinear(&dec.exact, &dec.harmonic).abs() <= 1e-10 * nv * nv);
        assert!(m.bilinear(&dec.exact, &dec.coexact).abs() <= 1e-10 * nv * nv);
        assert!(m.bilinear(&dec.harmonic, &dec.coexact).abs() <= 1e-10 * nv * nv);
        // the coexact part is annihilated by d*_h
        let z = Field::from_coeffs(&pair.u_space, dec.coexact.clone()).unwrap();
        let s = dstar_h(&pair, &z).unwrap();
        assert!(pair.m_sigma.bilinear(&s.coeffs, &s.coeffs).sqrt() <= 1e-10 * nv);
    }

    #[test]
    fn galerkin_with_harmonic_source() {
        let pair = annulus_pair(8, 1);
        let h = harmonic_basis(&pair, 1).unwrap();
        let solver = HodgeLaplaceSolver::new(&pair, &h).unwrap();
        let g = pair.m_u.mul_vec(&h.fields[0].coeffs);
        let sol = solver.solve(&g, &[0.0]).unwrap();
        assert!(sol.u.coeffs.iter().all(|v| v.abs() < 1e-9));
        assert!(sol.sigma.coeffs.iter().all(|v| v.abs() < 1e-9));
        assert!((sol.p_coeffs[0] - 1.0).abs() < 1e-9);
        let zero = hodge_laplacian_solve(&pair, &h, &|_| [0.0; 3]).unwrap();
        assert!(zero.u.coeffs.iter().chain(&zero.sigma.coeffs).chain(&zero.p_coeffs).all(|&v| v == 0.0));
    }

    fn steady_u(x: &Vec3) -> Vec3 {
        [(PI * x[0]).sin(), (PI * x[1]).sin(), 0.0]
    }

    fn steady_lu(x: &Vec3) -> Vec3 {
        let u = steady_u(x);
        [PI * PI * u[0], PI * PI * u[1], 0.0]
    }

    fn l2_error(field: &Field, exact: impl Fn(&Vec3) -> Vec3) -> f64 {
        let mut scratch = BasisValues::with_len(field.space.local_dim());
        integrate(field.space.mesh(), 8, |c, g, p, x| {
            let (v, _) = field.eval(c, g, p, &mut scratch);
            let e = crate::geometry::sub(&v, &exact(x));
            dot3(&e, &e)
        })
        .unwrap()
        .sqrt()
    }

    #[test]
    fn square_elliptic_projection_rates() {
        for r in 1..=2 {
            let errs: Vec<f64> = [4, 8, 16]
                .iter()
                .map(|&n| {
                    let pair = MixedPair::new(Arc::new(build_unit_square(n).unwrap()), r).unwrap();
                    let h = harmonic_basis(&pair, 0).unwrap();
                    let ep = elliptic_projection(&pair, &h, &steady_u, &steady_lu).unwrap();
                    assert!(ep.residuals.iter().all(|&x| x <= 1e-9), "{:?}", ep.residuals);
                    let gal = hodge_laplacian_solve(&pair, &h, &steady_lu).unwrap();
                    assert_eq!(gal.u.coeffs.len(), ep.u.coeffs.len());
                    l2_error(&ep.u, steady_u)
                })
                .collect();
            for w in errs.windows(2) {
                let rate = (w[0] / w[1]).log2();
                assert!((rate - r as f64).abs() <= 0.2, "r={r} rate {rate}");
            }
        }
    }

    #[test]
    fn annulus_projection_matches_harmonic_moments() {
        let pair = annulus_pair(8, 1);
        let h = harmonic_basis(&pair, 1).unwrap();
        let u = |x: &Vec3| [x[1] - 0.5, 0.3 * x[0], 0.0];
        let lu = |_: &Vec3| [0.0; 3];
        let ep = elliptic_projection(&pair, &h, &u, &lu).unwrap();
        let fu = load_vector(&pair.u_space, &|x, _| u(x), 0.0).unwrap();
        let q = &h.fields[0].coeffs;
        assert!((pair.m_u.bilinear(&ep.u.coeffs, q) - dot(&fu, q)).abs() < 1e-9);
        let zero = elliptic_projection(&pair, &h, &|_| [0.0; 3], &|_| [0.0; 3]).unwrap();
        assert!(zero.u.coeffs.iter().all(|&v| v == 0.0));
    }
}
