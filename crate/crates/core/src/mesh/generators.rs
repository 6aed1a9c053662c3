use std::path::PathBuf;

use super::{MeshOrigin, SimplicialMesh};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Built-in mesh generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    UnitCube,
    UnitSquare,
    SquareAnnulus,
}

/// Kuhn (Freudenthal) subdivision of the unit cube: `n^3` subcubes, 6 tetrahedra each.
pub fn build_unit_cube(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("unit cube needs n >= 1".into()));
    }
    let m = n + 1;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    // Unit steps along x, y, z increase the vertex index, so every monotone
    // lattice path is already in ascending order.
    let step = [1, m, m * m];
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let base = i + m * (j + m * k);
                for p in PERMS {
                    let v1 = base + step[p[0]];
                    let v2 = v1 + step[p[1]];
                    let v3 = v2 + step[p[2]];
                    cells.push(vec![base, v1, v2, v3]);
                }
            }
        }
    }
    SimplicialMesh::from_cells(
        3,
        vertices,
        cells,
        MeshOrigin::Generated {
            generator: Generator::UnitCube,
            n,
        },
    )
}

/// Structured triangulation of the unit square grid, keeping the grid
/// squares accepted by `keep`. Each square is cut along its `(i,j)-(i+1,j+1)` diagonal.
fn structured_2d(
    n: usize,
    keep: impl Fn(usize, usize) -> bool,
    generator: Generator,
) -> Result<SimplicialMesh> {
    let m = n + 1;
    let h = 1.0 / n as f64;
    let mut used = vec![false; m * m];
    for j in 0..n {
        for i in 0..n {
            if keep(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[(i + di) + m * (j + dj)] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; m * m];
    let mut vertices = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let g = i + m * j;
            if used[g] {
                index[g] = vertices.len();
                vertices.push([i as f64 * h, j as f64 * h, 0.0]);
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !keep(i, j) {
                continue;
            }
            let v00 = index[i + m * j];
            let v10 = index[i + 1 + m * j];
            let v01 = index[i + m * (j + 1)];
            let v11 = index[i + 1 + m * (j + 1)];
            cells.push(vec![v00, v10, v11]);
            cells.push(vec![v00, v01, v11]);
        }
    }
    SimplicialMesh::from_cells(2, vertices, cells, MeshOrigin::Generated { generator, n })
}

pub fn build_unit_square(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("unit square needs n >= 1".into()));
    }
    structured_2d(n, |_, _| true, Generator::UnitSquare)
}

/// `[0,1]^2` minus `(0.25,0.75)^2` on an `n x n` grid; `n` must be a positive multiple of 4.
pub fn build_square_annulus(n: usize) -> Result<SimplicialMesh> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "square annulus needs n a positive multiple of 4, got {n}"
        )));
    }
    let (lo, hi) = (n / 4, 3 * n / 4);
    structured_2d(
        n,
        |i, j| !((lo..hi).contains(&i) && (lo..hi).contains(&j)),
        Generator::SquareAnnulus,
    )
}

/// Uniform refinement.
///
/// In 2D every triangle is split into four congruent children through its
/// edge midpoints; parent vertices keep their indices and the midpoint of
/// edge `e` becomes vertex `V + e`. A generated unit cube is rebuilt at twice
/// the resolution.
pub fn refine_uniform(mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
    match mesh.dim() {
        2 => {
            let nv = mesh.num_simplices(0);
            let mut vertices: Vec<Vec3> = mesh.vertices().to_vec();
            for e in mesh.simplices(1).iter() {
                let (a, b) = (mesh.vertices()[e[0]], mesh.vertices()[e[1]]);
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]);
            }
            let mut cells = Vec::with_capacity(4 * mesh.num_cells());
            for c in 0..mesh.num_cells() {
                let t = mesh.cell(c);
                let edges = mesh.cell_faces(c, 1);
                // local edges: (0,1), (0,2), (1,2)
                let m01 = nv + edges[0];
                let m02 = nv + edges[1];
                let m12 = nv + edges[2];
                cells.push(vec![t[0], m01, m02]);
                cells.push(vec![t[1], m01, m12]);
                cells.push(vec![t[2], m02, m12]);
                cells.push(vec![m01, m02, m12]);
            }
            SimplicialMesh::from_cells(2, vertices, cells, MeshOrigin::Refined)
        }
        3 => match mesh.origin() {
            MeshOrigin::Generated {
                generator: Generator::UnitCube,
                n,
            } => build_unit_cube(2 * n),
            _ => Err(Error::Unsupported(
                "3D refinement is only available for generated unit cube meshes".into(),
            )),
        },
        d => Err(Error::Unsupported(format!("refinement in dimension {d}"))),
    }
}

/// Source of the level-0 mesh of a refinement family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilySource {
    Builtin(Generator),
    File(PathBuf),
}

/// A sequence of uniformly refined meshes; the mesh size halves per level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshFamily {
    pub source: FamilySource,
    /// Cells per axis at level 0 (ignored for file meshes).
    pub base_resolution: usize,
}

impl MeshFamily {
    pub fn builtin(generator: Generator, base_resolution: usize) -> Self {
        Self {
            source: FamilySource::Builtin(generator),
            base_resolution,
        }
    }

    pub fn from_file(path: impl Into<PathBuf>) -> Self {
        Self {
            source: FamilySource::File(path.into()),
            base_resolution: 1,
        }
    }

    fn base(&self) -> Result<SimplicialMesh> {
        match &self.source {
            FamilySource::Builtin(Generator::UnitCube) => build_unit_cube(self.base_resolution),
            FamilySource::Builtin(Generator::UnitSquare) => build_unit_square(self.base_resolution),
            FamilySource::Builtin(Generator::SquareAnnulus) => {
                build_square_annulus(self.base_resolution)
            }
            FamilySource::File(p) => super::read_mesh(p),
        }
    }

    pub fn mesh(&self, level: usize) -> Result<SimplicialMesh> {
        if let FamilySource::Builtin(Generator::UnitCube) = self.source {
            return build_unit_cube(self.base_resolution << level);
        }
        let mut mesh = self.base()?;
        for _ in 0..level {
            mesh = refine_uniform(&mesh)?;
        }
        Ok(mesh)
    }

    /// Mesh size at `level`: grid spacing per axis for built-in generators,
    /// longest edge for file meshes.
    pub fn mesh_size(&self, level: usize) -> Result<f64> {
        let scale = 0.5f64.powi(level as i32);
        match self.source {
            FamilySource::Builtin(_) => Ok(scale / self.base_resolution as f64),
            FamilySource::File(_) => Ok(self.base()?.max_edge_length() * scale),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Kuhn subdivision enumerated independently: collect every face of every
    /// monotone lattice path simplex in the unit cube.
    fn kuhn_counts_oracle(n: usize) -> [usize; 4] {
        use std::collections::BTreeSet;
        let idx = |i: usize, j: usize, k: usize| i + (n + 1) * (j + (n + 1) * k);
        let mut sets: [BTreeSet<Vec<usize>>; 4] = Default::default();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                        let mut p = [i, j, k];
                        let mut tet = vec![idx(p[0], p[1], p[2])];
                        for ax in perm {
                            p[ax] += 1;
                            tet.push(idx(p[0], p[1], p[2]));
                        }
                        for mask in 1u32..16 {
                            let mut s: Vec<usize> = (0..4).filter(|b| mask >> b & 1 == 1).map(|b| tet[b]).collect();
                            s.sort();
                            sets[s.len() - 1].insert(s);
                        }
                    }
                }
            }
        }
        [sets[0].len(), sets[1].len(), sets[2].len(), sets[3].len()]
    }

    #[test]
    fn unit_cube_counts() {
        let m = build_unit_cube(1).unwrap();
        let counts = [0, 1, 2, 3].map(|d| m.num_simplices(d));
        assert_eq!(counts, [8, 19, 18, 6]);
        assert_eq!(counts, kuhn_counts_oracle(1));
        assert_eq!(m.euler_characteristic(), 1);
        assert!((m.total_volume() - 1.0).abs() < 1e-14);

        let m2 = build_unit_cube(2).unwrap();
        assert_eq!(m2.num_simplices(0), 27);
        assert_eq!(m2.num_cells(), 48);
        assert_eq!([0, 1, 2, 3].map(|d| m2.num_simplices(d)), kuhn_counts_oracle(2));
    }

    #[test]
    fn unit_cube_rejects_zero() {
        assert!(matches!(build_unit_cube(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn annulus_counts_and_area() {
        let m = build_square_annulus(4).unwrap();
        assert_eq!(m.num_simplices(0), 24);
        assert_eq!(m.num_simplices(1), 48);
        assert_eq!(m.num_cells(), 24);
        assert_eq!(m.euler_characteristic(), 0);
        assert!((m.total_volume() - 0.75).abs() < 1e-14);
        assert_eq!(m.betti_numbers(), vec![1, 1, 0]);
        // outer boundary 16 edges, inner 8
        assert_eq!(m.boundary_faces().len(), 24);
    }

    #[test]
    fn annulus_rejects_non_multiple_of_four() {
        assert!(build_square_annulus(6).is_err());
        assert!(build_square_annulus(0).is_err());
    }

    #[test]
    fn refinement_combinatorics() {
        let m = build_square_annulus(4).unwrap();
        let (v, e, t) = (m.num_simplices(0), m.num_simplices(1), m.num_cells());
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_simplices(0), v + e);
        assert_eq!(r.num_simplices(1), 2 * e + 3 * t);
        assert_eq!(r.num_cells(), 4 * t);
        assert_eq!(r.num_cells(), 96);
        assert!((r.total_volume() - m.total_volume()).abs() < 1e-14);
        assert_eq!(&r.vertices()[..v], m.vertices());
        assert_eq!(r.betti_numbers(), vec![1, 1, 0]);
    }

    #[test]
    fn refined_cube_regenerates() {
        let m = build_unit_cube(2).unwrap();
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_cells(), 6 * 64);
    }

    #[test]
    fn family_mesh_sizes() {
        let fam = MeshFamily::builtin(Generator::UnitCube, 4);
        let hs: Vec<f64> = (0..3).map(|l| fam.mesh_size(l).unwrap()).collect();
        assert_eq!(hs, vec![0.25, 0.125, 0.0625]);
        let fam = MeshFamily::builtin(Generator::SquareAnnulus, 4);
        assert_eq!(fam.mesh(1).unwrap().num_cells(), 96);
    }
}
