//! Small fixed-size vector helpers and affine simplex geometry.
//!
//! All points and vector proxies are stored as `[f64; 3]`; two-dimensional
//! data leaves the third component at zero. With that convention the 2D
//! `rot` of a 1-form is the third component of the 3D curl, so derivative
//! inner products are plain dot products in every dimension.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// `acc += s * a`
#[inline]
pub fn axpy(acc: &mut Vec3, s: f64, a: &Vec3) {
    acc[0] += s * a[0];
    acc[1] += s * a[1];
    acc[2] += s * a[2];
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Signed measure of the simplex spanned by `verts` (3 points in 2D, 4 in 3D).
pub fn signed_volume(dim: usize, verts: &[Vec3]) -> f64 {
    match dim {
        2 => {
            let a = sub(&verts[1], &verts[0]);
            let b = sub(&verts[2], &verts[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(&verts[1], &verts[0]);
            let b = sub(&verts[2], &verts[0]);
            let c = sub(&verts[3], &verts[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        _ => unreachable!("only 2D and 3D simplices are supported"),
    }
}

/// Affine data of one top-dimensional simplex.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub dim: usize,
    pub vertices: Vec<Vec3>,
    /// Physical gradients of the barycentric coordinates.
    pub grad_lambda: Vec<Vec3>,
    /// Unsigned measure.
    pub volume: f64,
}

impl CellGeometry {
    pub fn new(dim: usize, vertices: Vec<Vec3>) -> Result<Self> {
        assert_eq!(vertices.len(), dim + 1);
        let vol = signed_volume(dim, &vertices);
        if vol == 0.0 || !vol.is_finite() {
            return Err(Error::InvalidMesh("degenerate simplex".into()));
        }
        let mut grad_lambda = vec![[0.0; 3]; dim + 1];
        match dim {
            2 => {
                let a = sub(&vertices[1], &vertices[0]);
                let b = sub(&vertices[2], &vertices[0]);
                let det = a[0] * b[1] - a[1] * b[0];
                // rows of J^{-1} with J = [a b]
                grad_lambda[1] = [b[1] / det, -b[0] / det, 0.0];
                grad_lambda[2] = [-a[1] / det, a[0] / det, 0.0];
            }
            3 => {
                let a = sub(&vertices[1], &vertices[0]);
                let b = sub(&vertices[2], &vertices[0]);
                let c = sub(&vertices[3], &vertices[0]);
                let det = dot(&a, &cross(&b, &c));
                grad_lambda[1] = scale(1.0 / det, &cross(&b, &c));
                grad_lambda[2] = scale(1.0 / det, &cross(&c, &a));
                grad_lambda[3] = scale(1.0 / det, &cross(&a, &b));
            }
            _ => return Err(Error::Unsupported(format!("dimension {dim}"))),
        }
        let mut g0 = [0.0; 3];
        for g in &grad_lambda[1..] {
            axpy(&mut g0, -1.0, g);
        }
        grad_lambda[0] = g0;
        Ok(Self {
            dim,
            vertices,
            grad_lambda,
            volume: vol.abs(),
        })
    }

    /// Physical point with the given barycentric coordinates.
    pub fn point(&self, bary: &[f64]) -> Vec3 {
        let mut x = [0.0; 3];
        for (b, v) in bary.iter().zip(&self.vertices) {
            axpy(&mut x, *b, v);
        }
        x
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: &Vec3) -> Vec<f64> {
        let d = sub(x, &self.vertices[0]);
        let mut bary = vec![0.0; self.dim + 1];
        let mut s = 0.0;
        for i in 1..=self.dim {
            bary[i] = dot(&self.grad_lambda[i], &d);
            s += bary[i];
        }
        bary[0] = 1.0 - s;
        bary
    }
}
