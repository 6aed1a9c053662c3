//! Oriented simplicial meshes with signed incidence (coboundary) tables.
//!
//! Every simplex is stored as a strictly ascending vertex tuple, so its
//! orientation is the one induced by the global vertex numbering. The sign of
//! a face inside its parent follows the alternating-face rule: dropping the
//! `i`-th vertex contributes `(-1)^i`.

mod generators;
mod io;
mod topology;

use std::collections::HashMap;

pub use generators::{
    build_square_annulus, build_unit_cube, build_unit_square, refine_uniform, FamilySource,
    Generator, MeshFamily,
};
pub use io::{read_mesh, write_mesh};

use crate::error::{Error, Result};
use crate::geometry::{signed_volume, CellGeometry, Vec3};

/// Flat storage of equally sized vertex tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexList {
    arity: usize,
    verts: Vec<usize>,
}

impl SimplexList {
    fn new(arity: usize) -> Self {
        Self {
            arity,
            verts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.verts.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Number of vertices per simplex.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.verts[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.verts.chunks_exact(self.arity)
    }
}

/// Sparse signed incidence from `d`-simplices (columns) to `(d+1)`-simplices (rows).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    signs: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.signs[r].iter().copied())
    }

    /// Exact integer product `self * rhs`, returned as its nonzero entries.
    pub fn product_nonzeros(&self, rhs: &IncidenceMatrix) -> Vec<(usize, usize, i64)> {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out = Vec::new();
        let mut acc: HashMap<usize, i64> = HashMap::new();
        for i in 0..self.nrows {
            acc.clear();
            for (k, s) in self.row(i) {
                for (j, t) in rhs.row(k) {
                    *acc.entry(j).or_insert(0) += s as i64 * t as i64;
                }
            }
            let mut row: Vec<_> = acc.iter().filter(|(_, v)| **v != 0).collect();
            row.sort();
            out.extend(row.into_iter().map(|(j, v)| (i, *j, *v)));
        }
        out
    }
}

/// How a mesh came to be; 3D refinement regenerates built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshOrigin {
    Generated { generator: Generator, n: usize },
    Refined,
    External,
}

/// An oriented simplicial mesh of a 2D or 3D polyhedral domain.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Vec3>,
    simplices: Vec<SimplexList>,
    incidence: Vec<IncidenceMatrix>,
    /// For each top cell and each `d`, the global indices of its `d`-faces in
    /// lexicographic order of local vertex subsets.
    cell_faces: Vec<Vec<usize>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    volumes: Vec<f64>,
    boundary_faces: Vec<usize>,
    origin: MeshOrigin,
}

/// Local `d`-faces of a simplex with `n` vertices, as index subsets in lexicographic order.
pub(crate) fn local_faces(n: usize, arity: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - left {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, arity, &mut Vec::new(), &mut out);
    out
}

impl SimplicialMesh {
    /// Builds the full complex from vertex coordinates and top-dimensional cells.
    ///
    /// Cell tuples are sorted ascending; their volume must be nonzero.
    pub fn from_cells(
        dim: usize,
        vertices: Vec<Vec3>,
        cells: Vec<Vec<usize>>,
        origin: MeshOrigin,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Unsupported(format!("mesh dimension {dim}")));
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let nv = vertices.len();
        let mut sorted_cells = Vec::with_capacity(cells.len());
        for (c, cell) in cells.into_iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has {} vertices, expected {}",
                    cell.len(),
                    dim + 1
                )));
            }
            let mut cell = cell;
            cell.sort_unstable();
            if cell.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("cell {c} repeats a vertex")));
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::OutOfRange { index: bad, len: nv });
            }
            sorted_cells.push(cell);
        }

        // Every d-face of every cell, deduplicated and sorted lexicographically
        // (cells themselves keep their input order).
        let mut simplices = Vec::with_capacity(dim + 1);
        let mut lookup = Vec::with_capacity(dim + 1);
        let mut cell_faces = vec![Vec::new(); dim + 1];
        for d in 0..=dim {
            let arity = d + 1;
            let mut list = SimplexList::new(arity);
            let mut map: HashMap<Vec<usize>, usize> = HashMap::new();
            if d == 0 {
                for v in 0..nv {
                    list.verts.push(v);
                }
            } else {
                let faces = local_faces(dim + 1, arity);
                let mut all: Vec<Vec<usize>> = Vec::with_capacity(sorted_cells.len() * faces.len());
                for cell in &sorted_cells {
                    for f in &faces {
                        all.push(f.iter().map(|&i| cell[i]).collect());
                    }
                }
                if d == dim {
                    // cells keep their input order so cell c is the c-th input cell
                    let mut check = all.clone();
                    check.sort_unstable();
                    if check.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::InvalidMesh("duplicate cell".into()));
                    }
                } else {
                    all.sort_unstable();
                    all.dedup();
                }
                for (i, s) in all.into_iter().enumerate() {
                    list.verts.extend_from_slice(&s);
                    map.insert(s, i);
                }
            }
            let faces = local_faces(dim + 1, arity);
            let cf = &mut cell_faces[d];
            cf.reserve(sorted_cells.len() * faces.len());
            for cell in &sorted_cells {
                for f in &faces {
                    if d == 0 {
                        cf.push(cell[f[0]]);
                    } else {
                        let key: Vec<usize> = f.iter().map(|&i| cell[i]).collect();
                        cf.push(map[&key]);
                    }
                }
            }
            simplices.push(list);
            lookup.push(map);
        }

        let mut incidence = Vec::with_capacity(dim);
        for d in 0..dim {
            let upper = &simplices[d + 1];
            let mut row_ptr = vec![0];
            let mut col_idx = Vec::with_capacity(upper.len() * (d + 2));
            let mut signs = Vec::with_capacity(upper.len() * (d + 2));
            let mut entries: Vec<(usize, i8)> = Vec::with_capacity(d + 2);
            for s in upper.iter() {
                entries.clear();
                for drop in 0..s.len() {
                    let face: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    let idx = if d == 0 { face[0] } else { lookup[d][&face] };
                    let sign = if drop % 2 == 0 { 1 } else { -1 };
                    entries.push((idx, sign));
                }
                entries.sort_unstable();
                for &(c, s) in &entries {
                    col_idx.push(c);
                    signs.push(s);
                }
                row_ptr.push(col_idx.len());
            }
            incidence.push(IncidenceMatrix {
                nrows: upper.len(),
                ncols: simplices[d].len(),
                row_ptr,
                col_idx,
                signs,
            });
        }

        let mut volumes = Vec::with_capacity(sorted_cells.len());
        for (c, cell) in sorted_cells.iter().enumerate() {
            let pts: Vec<Vec3> = cell.iter().map(|&v| vertices[v]).collect();
            let vol = signed_volume(dim, &pts).abs();
            if !(vol > 0.0) {
                return Err(Error::InvalidMesh(format!("cell {c} has zero volume")));
            }
            volumes.push(vol);
        }

        // Facet multiplicities from the top incidence table.
        let top = &incidence[dim - 1];
        let mut count = vec![0usize; simplices[dim - 1].len()];
        for &c in &top.col_idx {
            count[c] += 1;
        }
        let mut boundary_faces = Vec::new();
        for (f, &k) in count.iter().enumerate() {
            match k {
                1 => boundary_faces.push(f),
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "facet {f} is shared by {k} cells"
                    )))
                }
            }
        }

        Ok(Self {
            dim,
            vertices,
            simplices,
            incidence,
            cell_faces,
            lookup,
            volumes,
            boundary_faces,
            origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    /// All `d`-simplices.
    pub fn simplices(&self, d: usize) -> &SimplexList {
        &self.simplices[d]
    }

    pub fn num_simplices(&self, d: usize) -> usize {
        self.simplices[d].len()
    }

    pub fn num_cells(&self) -> usize {
        self.simplices[self.dim].len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        self.simplices[self.dim].get(c)
    }

    /// Signed incidence from `d`-simplices to `(d+1)`-simplices.
    pub fn incidence(&self, d: usize) -> &IncidenceMatrix {
        &self.incidence[d]
    }

    /// Global indices of the `d`-faces of cell `c`, in lexicographic local order.
    pub fn cell_faces(&self, c: usize, d: usize) -> &[usize] {
        let k = binomial(self.dim + 1, d + 1);
        &self.cell_faces[d][c * k..(c + 1) * k]
    }

    /// Index of the simplex with the given (unsorted) vertex set.
    pub fn find_simplex(&self, verts: &[usize]) -> Option<usize> {
        let mut key = verts.to_vec();
        key.sort_unstable();
        match key.len() {
            0 => None,
            1 => (key[0] < self.vertices.len()).then_some(key[0]),
            n if n <= self.dim + 1 => self.lookup[n - 1].get(&key).copied(),
            _ => None,
        }
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        self.volumes[c]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Indices of the `(dim-1)`-simplices lying on the domain boundary.
    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary_faces
    }

    pub fn origin(&self) -> MeshOrigin {
        self.origin
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let verts = self.cell(c).iter().map(|&v| self.vertices[v]).collect();
        CellGeometry::new(self.dim, verts).expect("cells were validated at construction")
    }

    pub fn max_edge_length(&self) -> f64 {
        self.simplices[1]
            .iter()
            .map(|e| crate::geometry::norm(&crate::geometry::sub(&self.vertices[e[1]], &self.vertices[e[0]])))
            .fold(0.0, f64::max)
    }

    /// Betti numbers `b_0..b_dim` from exact ranks of the incidence matrices.
    pub fn betti_numbers(&self) -> Vec<usize> {
        let ranks: Vec<usize> = self.incidence.iter().map(topology::rank).collect();
        (0..=self.dim)
            .map(|d| {
                let below = if d == 0 { 0 } else { ranks[d - 1] };
                let above = if d == self.dim { 0 } else { ranks[d] };
                self.num_simplices(d) - below - above
            })
            .collect()
    }

    /// Euler characteristic `sum (-1)^d n_d`.
    pub fn euler_characteristic(&self) -> i64 {
        (0..=self.dim)
            .map(|d| {
                let n = self.num_simplices(d) as i64;
                if d % 2 == 0 {
                    n
                } else {
                    -n
                }
            })
            .sum()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> SimplicialMesh {
        SimplicialMesh::from_cells(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![2, 0, 1]],
            MeshOrigin::External,
        )
        .unwrap()
    }

    #[test]
    fn cell_faces_match_cells_in_input_order() {
        // cells listed out of lexicographic order
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let m = SimplicialMesh::from_cells(2, verts, vec![vec![1, 3, 2], vec![0, 1, 2]], MeshOrigin::External).unwrap();
        assert_eq!(m.cell(0), &[1, 2, 3]);
        assert_eq!(m.cell(1), &[0, 1, 2]);
        let fine = super::generators::refine_uniform(&super::generators::build_square_annulus(4).unwrap()).unwrap();
        for m in [m, fine] {
            for c in 0..m.num_cells() {
                let v = m.cell(c).to_vec();
                let e = m.cell_faces(c, 1);
                let want = [[v[0], v[1]], [v[0], v[2]], [v[1], v[2]]];
                for k in 0..3 {
                    assert_eq!(m.simplices(1).get(e[k]), &want[k]);
                }
            }
        }
        assert!(SimplicialMesh::from_cells(
            2,
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2], vec![2, 1, 0]],
            MeshOrigin::External
        )
        .is_err());
    }

    #[test]
    fn single_triangle_complex() {
        let m = reference_triangle();
        assert_eq!(m.num_simplices(0), 3);
        assert_eq!(m.num_simplices(1), 3);
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.cell(0), &[0, 1, 2]);
        assert_eq!(m.boundary_faces(), &[0, 1, 2]);
        // edge [0,1]: +1 at vertex 1, -1 at vertex 0
        let row: Vec<_> = m.incidence(0).row(0).collect();
        assert_eq!(row, vec![(0, -1), (1, 1)]);
        // triangle [0,1,2] boundary: [1,2] - [0,2] + [0,1]
        let row: Vec<_> = m.incidence(1).row(0).collect();
        assert_eq!(row, vec![(0, 1), (1, -1), (2, 1)]);
        assert!(m.incidence(1).product_nonzeros(m.incidence(0)).is_empty());
        assert_eq!(m.betti_numbers(), vec![1, 0, 0]);
    }

    #[test]
    fn local_face_enumeration() {
        assert_eq!(local_faces(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(local_faces(4, 3).len(), 4);
        assert_eq!(binomial(4, 2), 6);
    }

    #[test]
    fn rejects_bad_cells() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(SimplicialMesh::from_cells(2, verts.clone(), vec![vec![0, 1, 2]], MeshOrigin::External).is_err());
        assert!(SimplicialMesh::from_cells(2, verts.clone(), vec![vec![0, 1, 7]], MeshOrigin::External).is_err());
        assert!(SimplicialMesh::from_cells(2, verts, vec![vec![0, 1, 1]], MeshOrigin::External).is_err());
    }

    #[test]
    fn find_simplex_is_order_independent() {
        let m = reference_triangle();
        assert_eq!(m.find_simplex(&[2, 1]), Some(2));
        assert_eq!(m.find_simplex(&[2, 0, 1]), Some(0));
        assert_eq!(m.find_simplex(&[0, 5]), None);
    }
}
