//! Plain-text mesh files.
//!
//! ```text
//! # comment
//! dim 2
//! v 0.0 0.0
//! v 1.0 0.0
//! v 0.0 1.0
//! c 0 1 2
//! ```
//!
//! Cells use 0-based vertex indices and must be listed with positive orientation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MeshOrigin, SimplicialMesh};
use crate::error::{Error, Result};
use crate::geometry::{signed_volume, Vec3};

pub fn read_mesh(path: impl AsRef<Path>) -> Result<SimplicialMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text, path)
}

pub(crate) fn parse_mesh(text: &str, path: &Path) -> Result<SimplicialMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dim: Option<usize> = None;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut cells: Vec<(usize, Vec<usize>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap();
        let rest: Vec<&str> = tok.collect();
        match key {
            "dim" => {
                if dim.is_some() {
                    return Err(err(lineno, "duplicate dim line".into()));
                }
                let d = match rest.as_slice() {
                    [d] => d.parse::<usize>().ok(),
                    _ => None,
                };
                match d {
                    Some(d @ (2 | 3)) => dim = Some(d),
                    _ => return Err(err(lineno, format!("expected `dim 2` or `dim 3`, got `{line}`"))),
                }
            }
            "v" => {
                let d = dim.ok_or_else(|| err(lineno, "vertex before dim line".into()))?;
                if rest.len() != d {
                    return Err(err(lineno, format!("vertex needs {d} coordinates")));
                }
                let mut x = [0.0; 3];
                for (k, s) in rest.iter().enumerate() {
                    x[k] = s
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(lineno, format!("bad coordinate `{s}`")))?;
                }
                vertices.push(x);
            }
            "c" => {
                let d = dim.ok_or_else(|| err(lineno, "cell before dim line".into()))?;
                if rest.len() != d + 1 {
                    return Err(err(lineno, format!("cell needs {} vertex indices", d + 1)));
                }
                let idx = rest
                    .iter()
                    .map(|s| s.parse::<usize>().map_err(|_| err(lineno, format!("bad index `{s}`"))))
                    .collect::<Result<Vec<_>>>()?;
                cells.push((lineno, idx));
            }
            other => return Err(err(lineno, format!("unknown record `{other}`"))),
        }
    }

    let dim = dim.ok_or_else(|| err(0, "missing dim line".into()))?;
    for (lineno, cell) in &cells {
        if let Some(&bad) = cell.iter().find(|&&v| v >= vertices.len()) {
            return Err(err(
                *lineno,
                format!("vertex index {bad} out of range ({} vertices)", vertices.len()),
            ));
        }
        let pts: Vec<Vec3> = cell.iter().map(|&v| vertices[v]).collect();
        if !(signed_volume(dim, &pts) > 0.0) {
            return Err(err(*lineno, "cell has non-positive volume".into()));
        }
    }
    SimplicialMesh::from_cells(
        dim,
        vertices,
        cells.into_iter().map(|(_, c)| c).collect(),
        MeshOrigin::External,
    )
}

pub(crate) fn format_mesh(mesh: &SimplicialMesh) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    writeln!(out, "dim {dim}").unwrap();
    for v in mesh.vertices() {
        out.push('v');
        for x in &v[..dim] {
            write!(out, " {x:.16e}").unwrap();
        }
        out.push('\n');
    }
    for c in 0..mesh.num_cells() {
        let mut cell = mesh.cell(c).to_vec();
        let pts: Vec<Vec3> = cell.iter().map(|&v| mesh.vertices()[v]).collect();
        if signed_volume(dim, &pts) < 0.0 {
            cell.swap(dim - 1, dim);
        }
        out.push('c');
        for v in cell {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_mesh(mesh: &SimplicialMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_mesh(mesh)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
