//! Global assembly of the bilinear and linear forms of the mixed method.

pub mod quadrature;
pub mod sparse;

use crate::elements::{check_pair, BasisValues, FeSpace};
use crate::error::{Error, Result};
use crate::geometry::{dot, CellGeometry, Vec3};
use crate::mesh::SimplicialMesh;

use quadrature::quadrature;
pub use sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Value,
    Derivative,
}

fn pick(b: &BasisValues, part: Part) -> &[Vec3] {
    match part {
        Part::Value => &b.values,
        Part::Derivative => &b.derivatives,
    }
}

/// `A[i][j] = int part_i(row basis i) . part_j(col basis j)`, cell by cell.
fn assemble_bilinear(
    row: &FeSpace,
    row_part: Part,
    col: &FeSpace,
    col_part: Part,
    degree: usize,
) -> Result<SparseMatrix> {
    assemble_bilinear_ordered(row, row_part, col, col_part, degree, 0..row.mesh().num_cells())
}

fn assemble_bilinear_ordered(
    row: &FeSpace,
    row_part: Part,
    col: &FeSpace,
    col_part: Part,
    degree: usize,
    cells: impl Iterator<Item = usize>,
) -> Result<SparseMatrix> {
    if !row.same_mesh(col) {
        return Err(Error::MeshMismatch);
    }
    let mesh = row.mesh();
    let rule = quadrature(mesh.dim(), degree)?;
    let (nr, nc) = (row.local_dim(), col.local_dim());
    let mut b = TripletBuilder::with_capacity(row.dof_count(), col.dof_count(), mesh.num_cells() * nr * nc);
    let mut rb = BasisValues::with_len(nr);
    let mut cb = BasisValues::with_len(nc);
    let mut local = vec![0.0; nr * nc];
    for c in cells {
        let geom = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (p, w) in rule.normalized() {
            let w = w * geom.volume;
            row.eval_into(&geom, row.cell_signs(c), p, &mut rb);
            col.eval_into(&geom, col.cell_signs(c), p, &mut cb);
            let (ri, cj) = (pick(&rb, row_part), pick(&cb, col_part));
            for i in 0..nr {
                for j in 0..nc {
                    local[i * nc + j] += w * dot(&ri[i], &cj[j]);
                }
            }
        }
        for (i, &gi) in row.cell_dofs(c).iter().enumerate() {
            for (j, &gj) in col.cell_dofs(c).iter().enumerate() {
                b.push(gi, gj, local[i * nc + j]);
            }
        }
    }
    Ok(b.build())
}

/// Default quadrature exactness for bilinear forms of a space of degree `r`.
pub fn bilinear_degree(space: &FeSpace) -> usize {
    2 * space.poly_degree()
}

/// Default quadrature exactness for load vectors and error integrals.
pub fn load_degree(space: &FeSpace) -> usize {
    2 * space.poly_degree() + 2
}

/// `M[i][j] = <phi_j, phi_i>`
pub fn mass_matrix(space: &FeSpace) -> Result<SparseMatrix> {
    mass_matrix_with_degree(space, bilinear_degree(space))
}

pub fn mass_matrix_with_degree(space: &FeSpace, degree: usize) -> Result<SparseMatrix> {
    assemble_bilinear(space, Part::Value, space, Part::Value, degree)
}

/// `B[i][j] = <d tau_j, v_i>` with `tau` in the 0-form space and `v` in the 1-form space.
pub fn mixed_derivative_matrix(space_sigma: &FeSpace, space_u: &FeSpace) -> Result<SparseMatrix> {
    check_pair(space_sigma, space_u)?;
    let degree = bilinear_degree(space_sigma).max(bilinear_degree(space_u));
    assemble_bilinear(space_u, Part::Value, space_sigma, Part::Derivative, degree)
}

/// `K[i][j] = <d phi_j, d phi_i>` for a 1-form space.
pub fn curl_stiffness_matrix(space_u: &FeSpace) -> Result<SparseMatrix> {
    if space_u.form_degree() != 1 {
        return Err(Error::Unsupported("curl stiffness needs a 1-form space".into()));
    }
    assemble_bilinear(space_u, Part::Derivative, space_u, Part::Derivative, bilinear_degree(space_u))
}

/// `S[i][j] = <grad tau_j, grad tau_i>` for a 0-form space.
pub fn gradient_stiffness_matrix(space_sigma: &FeSpace) -> Result<SparseMatrix> {
    if space_sigma.form_degree() != 0 {
        return Err(Error::Unsupported("gradient stiffness needs a 0-form space".into()));
    }
    assemble_bilinear(
        space_sigma,
        Part::Derivative,
        space_sigma,
        Part::Derivative,
        bilinear_degree(space_sigma),
    )
}

/// `F[i] = <f(., t), phi_i>`; scalar data is read from component 0.
pub fn load_vector(space: &FeSpace, f: &dyn Fn(&Vec3, f64) -> Vec3, t: f64) -> Result<Vec<f64>> {
    load_vector_with_degree(space, f, t, load_degree(space))
}

pub fn load_vector_with_degree(
    space: &FeSpace,
    f: &dyn Fn(&Vec3, f64) -> Vec3,
    t: f64,
    degree: usize,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let rule = quadrature(mesh.dim(), degree)?;
    let mut out = vec![0.0; space.dof_count()];
    let mut basis = BasisValues::with_len(space.local_dim());
    let mut local = vec![0.0; space.local_dim()];
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (p, w) in rule.normalized() {
            let w = w * geom.volume;
            let fx = f(&geom.point(p), t);
            space.eval_into(&geom, space.cell_signs(c), p, &mut basis);
            for (l, v) in local.iter_mut().zip(&basis.values) {
                *l += w * dot(&fx, v);
            }
        }
        for (&g, l) in space.cell_dofs(c).iter().zip(&local) {
            out[g] += l;
        }
    }
    Ok(out)
}

/// Integral over the mesh of a scalar function of `(cell, geometry, barycentric point, physical point)`.
pub fn integrate(
    mesh: &SimplicialMesh,
    degree: usize,
    mut g: impl FnMut(usize, &CellGeometry, &[f64], &Vec3) -> f64,
) -> Result<f64> {
    let rule = quadrature(mesh.dim(), degree)?;
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        let mut cell = 0.0;
        for (p, w) in rule.normalized() {
            cell += w * g(c, &geom, p, &geom.point(p));
        }
        total += cell * geom.volume;
    }
    Ok(total)
}
