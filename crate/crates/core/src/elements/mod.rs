//! Finite element spaces of 0-forms and 1-forms.
//!
//! | form degree | poly degree | dim  | element                         | DOFs            |
//! |-------------|-------------|------|---------------------------------|-----------------|
//! | 0           | 1           | 2, 3 | Lagrange P1                     | vertices        |
//! | 0           | 2           | 2    | Lagrange P2                     | vertices, edges |
//! | 1           | 1           | 2, 3 | Whitney edge forms              | edges           |
//! | 1           | 2           | 2    | second-order trimmed edge forms | 2/edge, 2/cell  |
//!
//! 1-forms use vector proxies on which the exterior derivative acts as `rot`
//! (2D) or `curl` (3D), so the 2D spaces are rotated Raviart–Thomas spaces.
//! Scalar values are returned in the first component of a `Vec3`; 2D `rot`
//! is returned in the third component.

pub(crate) mod shape;

use std::sync::Arc;

use crate::assembly::quadrature::gauss_legendre_unit;
use crate::assembly::sparse::{SparseMatrix, TripletBuilder};
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, scale, sub, CellGeometry, Vec3};
use crate::mesh::SimplicialMesh;

use shape::local_edges;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Full polynomial family; for 0-forms this is Lagrange.
    Lagrange,
    /// Trimmed family `P_r^- Lambda^k`; coincides with Lagrange for 0-forms.
    TrimmedPminus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    P1,
    P2,
    Whitney,
    Ned2,
}

/// A finite element space on a fixed mesh with its global DOF map.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<SimplicialMesh>,
    family: Family,
    form_degree: usize,
    poly_degree: usize,
    kind: Kind,
    dof_count: usize,
    local_dim: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
}

/// Basis values and exterior derivatives at one point of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    /// Scalar (in component 0) for 0-forms, vector proxy for 1-forms.
    pub values: Vec<Vec3>,
    /// Gradient for 0-forms, curl (3D) or `[0, 0, rot]` (2D) for 1-forms.
    pub derivatives: Vec<Vec3>,
}

impl BasisValues {
    pub fn with_len(n: usize) -> Self {
        Self {
            values: vec![[0.0; 3]; n],
            derivatives: vec![[0.0; 3]; n],
        }
    }
}

pub fn build_space(
    mesh: Arc<SimplicialMesh>,
    family: Family,
    form_degree: usize,
    poly_degree: usize,
) -> Result<Arc<FeSpace>> {
    let dim = mesh.dim();
    let kind = match (family, form_degree, poly_degree, dim) {
        (_, 0, 1, _) => Kind::P1,
        (_, 0, 2, 2) => Kind::P2,
        (Family::TrimmedPminus, 1, 1, _) => Kind::Whitney,
        (Family::TrimmedPminus, 1, 2, 2) => Kind::Ned2,
        _ => {
            return Err(Error::Unsupported(format!(
                "{family:?} space with form degree {form_degree}, polynomial degree {poly_degree} in {dim}D"
            )))
        }
    };
    let nv = mesh.num_simplices(0);
    let ne = mesh.num_simplices(1);
    let nc = mesh.num_cells();
    let edges_per_cell = local_edges(dim).len();
    let (local_dim, dof_count) = match kind {
        Kind::P1 => (dim + 1, nv),
        Kind::P2 => (dim + 1 + edges_per_cell, nv + ne),
        Kind::Whitney => (edges_per_cell, ne),
        Kind::Ned2 => (8, 2 * ne + 2 * nc),
    };
    let mut cell_dofs = Vec::with_capacity(nc * local_dim);
    let mut cell_signs = Vec::with_capacity(nc * local_dim);
    for c in 0..nc {
        let verts = mesh.cell(c);
        let edges = mesh.cell_faces(c, 1);
        // Local edge (i, j) with i < j runs from the lower to the higher global
        // vertex because cells are stored ascending; the sign is kept explicit.
        let edge_sign = |k: usize| {
            let (i, j) = local_edges(dim)[k];
            if verts[i] < verts[j] {
                1.0
            } else {
                -1.0
            }
        };
        match kind {
            Kind::P1 => {
                cell_dofs.extend_from_slice(verts);
                cell_signs.extend(std::iter::repeat_n(1.0, dim + 1));
            }
            Kind::P2 => {
                cell_dofs.extend_from_slice(verts);
                cell_dofs.extend(edges.iter().map(|e| nv + e));
                cell_signs.extend(std::iter::repeat_n(1.0, local_dim));
            }
            Kind::Whitney => {
                cell_dofs.extend_from_slice(edges);
                cell_signs.extend((0..edges_per_cell).map(edge_sign));
            }
            Kind::Ned2 => {
                for (k, e) in edges.iter().enumerate() {
                    debug_assert_eq!(edge_sign(k), 1.0);
                    cell_dofs.extend([2 * e, 2 * e + 1]);
                    cell_signs.extend([1.0, 1.0]);
                }
                cell_dofs.extend([2 * ne + 2 * c, 2 * ne + 2 * c + 1]);
                cell_signs.extend([1.0, 1.0]);
            }
        }
    }
    Ok(Arc::new(FeSpace {
        mesh,
        family,
        form_degree,
        poly_degree,
        kind,
        dof_count,
        local_dim,
        cell_dofs,
        cell_signs,
    }))
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn form_degree(&self) -> usize {
        self.form_degree
    }

    pub fn poly_degree(&self) -> usize {
        self.poly_degree
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// Number of basis functions supported on one cell.
    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.local_dim..(c + 1) * self.local_dim]
    }

    pub fn cell_signs(&self, c: usize) -> &[f64] {
        &self.cell_signs[c * self.local_dim..(c + 1) * self.local_dim]
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Evaluates the cell's global basis functions (orientation signs applied)
    /// at barycentric point `bary`.
    pub fn eval_into(&self, geom: &CellGeometry, signs: &[f64], bary: &[f64], out: &mut BasisValues) {
        let (v, d) = (&mut out.values[..], &mut out.derivatives[..]);
        let gl = &geom.grad_lambda;
        match self.kind {
            Kind::P1 => shape::p1(bary, gl, v, d),
            Kind::P2 => shape::p2(geom.dim, bary, gl, v, d),
            Kind::Whitney => shape::whitney_all(geom.dim, bary, gl, v, d),
            Kind::Ned2 => shape::ned2(bary, gl, v, d),
        }
        for (k, &s) in signs.iter().enumerate() {
            if s != 1.0 {
                v[k] = scale(s, &v[k]);
                d[k] = scale(s, &d[k]);
            }
        }
    }

    /// Basis values at a point of the reference simplex, mapped to cell `cell`.
    pub fn eval_basis(&self, cell: usize, ref_point: &[f64]) -> Result<BasisValues> {
        let nc = self.mesh.num_cells();
        if cell >= nc {
            return Err(Error::OutOfRange { index: cell, len: nc });
        }
        let dim = self.mesh.dim();
        if ref_point.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "reference point has {} coordinates, expected {dim}",
                ref_point.len()
            )));
        }
        let mut bary = Vec::with_capacity(dim + 1);
        bary.push(1.0 - ref_point.iter().sum::<f64>());
        bary.extend_from_slice(ref_point);
        if bary.iter().any(|&b| b < -1e-12) {
            return Err(Error::InvalidParameter(format!(
                "point {ref_point:?} lies outside the reference simplex"
            )));
        }
        let geom = self.mesh.cell_geometry(cell);
        let mut out = BasisValues::with_len(self.local_dim);
        self.eval_into(&geom, self.cell_signs(cell), &bary, &mut out);
        Ok(out)
    }

    /// Local DOF functionals of cell `c` applied to `f` (unsigned, in local order).
    fn local_dofs(&self, geom: &CellGeometry, f: &dyn Fn(&Vec3) -> Vec3) -> Vec<f64> {
        let dim = geom.dim;
        match self.kind {
            Kind::P1 => geom.vertices.iter().map(|x| f(x)[0]).collect(),
            Kind::P2 => {
                let mut out: Vec<f64> = geom.vertices.iter().map(|x| f(x)[0]).collect();
                for &(i, j) in local_edges(dim) {
                    let mut m = scale(0.5, &geom.vertices[i]);
                    axpy(&mut m, 0.5, &geom.vertices[j]);
                    out.push(f(&m)[0]);
                }
                out
            }
            Kind::Whitney => local_edges(dim)
                .iter()
                .map(|&(i, j)| edge_moment(&geom.vertices[i], &geom.vertices[j], f))
                .collect(),
            Kind::Ned2 => shape::ned2_dofs(geom, f, 5, 8).to_vec(),
        }
    }
}

/// `int_0^1 f(x(s)) . (x_j - x_i) ds` along the segment from `xi` to `xj`.
fn edge_moment(xi: &Vec3, xj: &Vec3, f: &dyn Fn(&Vec3) -> Vec3) -> f64 {
    let t = sub(xj, xi);
    gauss_legendre_unit(5)
        .into_iter()
        .map(|(s, w)| {
            let mut x = scale(1.0 - s, xi);
            axpy(&mut x, s, xj);
            w * dot(&f(&x), &t)
        })
        .sum()
}

/// Coefficient vector attached to a finite element space.
#[derive(Debug, Clone)]
pub struct Field {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![0.0; space.dof_count()],
        }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dof_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a space with {} DOFs",
                coeffs.len(),
                space.dof_count()
            )));
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    /// Value and exterior derivative at barycentric point `bary` of cell `c`.
    pub fn eval(&self, c: usize, geom: &CellGeometry, bary: &[f64], scratch: &mut BasisValues) -> (Vec3, Vec3) {
        self.space.eval_into(geom, self.space.cell_signs(c), bary, scratch);
        let mut v = [0.0; 3];
        let mut d = [0.0; 3];
        for (k, &g) in self.space.cell_dofs(c).iter().enumerate() {
            axpy(&mut v, self.coeffs[g], &scratch.values[k]);
            axpy(&mut d, self.coeffs[g], &scratch.derivatives[k]);
        }
        (v, d)
    }
}

/// Applies the global DOF functionals to a smooth field. For 0-forms `f`
/// returns the scalar in component 0.
pub fn canonical_interpolate(space: &Arc<FeSpace>, f: &dyn Fn(&Vec3) -> Vec3) -> Field {
    let mesh = space.mesh();
    let mut coeffs = vec![0.0; space.dof_count()];
    let mut done = vec![false; space.dof_count()];
    for c in 0..mesh.num_cells() {
        let dofs = space.cell_dofs(c);
        if dofs.iter().all(|&g| done[g]) {
            continue;
        }
        let geom = mesh.cell_geometry(c);
        let local = space.local_dofs(&geom, f);
        for ((&g, &s), v) in dofs.iter().zip(space.cell_signs(c)).zip(local) {
            if !done[g] {
                coeffs[g] = s * v;
                done[g] = true;
            }
        }
    }
    Field {
        space: space.clone(),
        coeffs,
    }
}

pub fn interpolate_scalar(space: &Arc<FeSpace>, f: impl Fn(&Vec3) -> f64) -> Field {
    canonical_interpolate(space, &|x| [f(x), 0.0, 0.0])
}

/// Matrix `D` of the exterior derivative from `sigma_space` (0-forms) into
/// `u_space` (1-forms): column `j` holds the `u_space` coefficients of `d tau_j`.
/// Exact because the gradient of every 0-form basis function lies in the 1-form space.
pub fn exterior_derivative_matrix(sigma_space: &FeSpace, u_space: &FeSpace) -> Result<SparseMatrix> {
    check_pair(sigma_space, u_space)?;
    let mesh = sigma_space.mesh();
    let mut b = TripletBuilder::new(u_space.dof_count(), sigma_space.dof_count());
    let mut seen = std::collections::HashSet::new();
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        let s_dofs = sigma_space.cell_dofs(c);
        let s_signs = sigma_space.cell_signs(c);
        for (j, &gj) in s_dofs.iter().enumerate() {
            let grad = |x: &Vec3| {
                let mut sc = BasisValues::with_len(sigma_space.local_dim());
                sigma_space.eval_into(&geom, s_signs, &geom.barycentric(x), &mut sc);
                sc.derivatives[j]
            };
            let local = u_space.local_dofs(&geom, &grad);
            for ((&gi, &si), v) in u_space.cell_dofs(c).iter().zip(u_space.cell_signs(c)).zip(local) {
                if seen.insert((gi, gj)) {
                    // The functionals of these polynomial gradients are
                    // multiples of 1/6; snapping removes quadrature roundoff.
                    let exact = (6.0 * v).round() / 6.0;
                    debug_assert!((exact - v).abs() < 1e-9, "derivative entry {v}");
                    b.push(gi, gj, si * exact);
                }
            }
        }
    }
    Ok(b.build())
}

pub(crate) fn check_pair(sigma_space: &FeSpace, u_space: &FeSpace) -> Result<()> {
    if !sigma_space.same_mesh(u_space) {
        return Err(Error::MeshMismatch);
    }
    if sigma_space.form_degree() + 1 != u_space.form_degree() {
        return Err(Error::Unsupported(format!(
            "form degrees {} and {} do not form a complex pair",
            sigma_space.form_degree(),
            u_space.form_degree()
        )));
    }
    Ok(())
}
