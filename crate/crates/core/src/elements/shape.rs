//! Closed-form local shape functions written in barycentric coordinates.
//!
//! Every formula is expressed through `lambda_i` and the physical gradients
//! `grad lambda_i`, so the affine pull-back (plain composition for 0-forms,
//! covariant transform for 1-forms) is built in and tangential traces match
//! across neighbouring cells.

use std::sync::OnceLock;

use crate::geometry::{axpy, cross, dot, scale, sub, CellGeometry, Vec3};

use crate::assembly::quadrature::{gauss_legendre_unit, quadrature};

/// Local edge `k` of a triangle or tetrahedron as a pair of local vertices,
/// in lexicographic order.
pub(crate) fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &[(0, 1), (0, 2), (1, 2)],
        3 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        _ => unreachable!(),
    }
}

/// Whitney form `lambda_i grad lambda_j - lambda_j grad lambda_i`.
#[inline]
pub(crate) fn whitney(lam: &[f64], gl: &[Vec3], i: usize, j: usize) -> Vec3 {
    let mut w = scale(lam[i], &gl[j]);
    axpy(&mut w, -lam[j], &gl[i]);
    w
}

/// Curl of the Whitney form; its third component is the 2D `rot`.
#[inline]
pub(crate) fn whitney_curl(gl: &[Vec3], i: usize, j: usize) -> Vec3 {
    scale(2.0, &cross(&gl[i], &gl[j]))
}

pub(crate) fn p1(lam: &[f64], gl: &[Vec3], values: &mut [Vec3], derivs: &mut [Vec3]) {
    for i in 0..lam.len() {
        values[i] = [lam[i], 0.0, 0.0];
        derivs[i] = gl[i];
    }
}

pub(crate) fn p2(dim: usize, lam: &[f64], gl: &[Vec3], values: &mut [Vec3], derivs: &mut [Vec3]) {
    let nv = dim + 1;
    for i in 0..nv {
        values[i] = [lam[i] * (2.0 * lam[i] - 1.0), 0.0, 0.0];
        derivs[i] = scale(4.0 * lam[i] - 1.0, &gl[i]);
    }
    for (k, &(i, j)) in local_edges(dim).iter().enumerate() {
        values[nv + k] = [4.0 * lam[i] * lam[j], 0.0, 0.0];
        let mut g = scale(4.0 * lam[j], &gl[i]);
        axpy(&mut g, 4.0 * lam[i], &gl[j]);
        derivs[nv + k] = g;
    }
}

pub(crate) fn whitney_all(dim: usize, lam: &[f64], gl: &[Vec3], values: &mut [Vec3], derivs: &mut [Vec3]) {
    for (k, &(i, j)) in local_edges(dim).iter().enumerate() {
        values[k] = whitney(lam, gl, i, j);
        derivs[k] = whitney_curl(gl, i, j);
    }
}

/// Spanning set of the second-order trimmed 1-form space on a triangle:
/// `lambda_i W_ij`, `lambda_j W_ij` per edge, then `lambda_2 W_01`, `lambda_1 W_02`.
const NED2_SPAN: [(usize, usize, usize); 8] = [
    (0, 0, 1),
    (1, 0, 1),
    (0, 0, 2),
    (2, 0, 2),
    (1, 1, 2),
    (2, 1, 2),
    (2, 0, 1),
    (1, 0, 2),
];

fn ned2_span(lam: &[f64], gl: &[Vec3], values: &mut [Vec3; 8], derivs: &mut [Vec3; 8]) {
    for (k, &(a, i, j)) in NED2_SPAN.iter().enumerate() {
        let w = whitney(lam, gl, i, j);
        values[k] = scale(lam[a], &w);
        let mut c = cross(&gl[a], &w);
        axpy(&mut c, lam[a], &whitney_curl(gl, i, j));
        derivs[k] = c;
    }
}

/// Degrees of freedom of the second-order trimmed 1-form element on one triangle:
/// per edge `(i,j)` the tangential moments against `1-s` and `s` (with `s`
/// running from vertex `i` to `j` and the unnormalized tangent `x_j - x_i`),
/// then the cell moments `|T|^{-1} int u . (x_1 - x_0)` and `|T|^{-1} int u . (x_2 - x_0)`.
pub(crate) fn ned2_dofs(geom: &CellGeometry, f: &dyn Fn(&Vec3) -> Vec3, edge_points: usize, cell_degree: usize) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (k, &(i, j)) in local_edges(2).iter().enumerate() {
        let (xi, xj) = (geom.vertices[i], geom.vertices[j]);
        let t = sub(&xj, &xi);
        for (s, w) in gauss_legendre_unit(edge_points) {
            let mut x = scale(1.0 - s, &xi);
            axpy(&mut x, s, &xj);
            let ft = dot(&f(&x), &t);
            out[2 * k] += w * (1.0 - s) * ft;
            out[2 * k + 1] += w * s * ft;
        }
    }
    let rule = quadrature(2, cell_degree).expect("supported degree");
    let e1 = sub(&geom.vertices[1], &geom.vertices[0]);
    let e2 = sub(&geom.vertices[2], &geom.vertices[0]);
    for (p, w) in rule.normalized() {
        let v = f(&geom.point(p));
        out[6] += w * dot(&v, &e1);
        out[7] += w * dot(&v, &e2);
    }
    out
}

/// `coef[b][a]`: weight of spanning function `b` in nodal basis function `a`.
fn ned2_coefficients() -> &'static [[f64; 8]; 8] {
    static COEF: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    COEF.get_or_init(|| {
        // The DOFs and the spanning set are invariant under affine maps, so
        // the reference triangle suffices.
        let geom = CellGeometry::new(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let mut v = [[0.0; 8]; 8];
        for b in 0..8 {
            let f = |x: &Vec3| {
                let lam = geom.barycentric(x);
                let mut vals = [[0.0; 3]; 8];
                let mut ders = [[0.0; 3]; 8];
                ned2_span(&lam, &geom.grad_lambda, &mut vals, &mut ders);
                vals[b]
            };
            let col = ned2_dofs(&geom, &f, 3, 2);
            for (k, c) in col.iter().enumerate() {
                v[k][b] = *c;
            }
        }
        invert8(v)
    })
}

fn invert8(mut a: [[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let mut inv = [[0.0; 8]; 8];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..8 {
        let p = (c..8)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        assert!(a[p][c].abs() > 1e-12, "trimmed element DOFs are not unisolvent");
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..8 {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..8 {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..8 {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
    }
    inv
}

pub(crate) fn ned2(lam: &[f64], gl: &[Vec3], values: &mut [Vec3], derivs: &mut [Vec3]) {
    let coef = ned2_coefficients();
    let mut sv = [[0.0; 3]; 8];
    let mut sd = [[0.0; 3]; 8];
    ned2_span(lam, gl, &mut sv, &mut sd);
    for a in 0..8 {
        let mut v = [0.0; 3];
        let mut d = [0.0; 3];
        for b in 0..8 {
            let c = coef[b][a];
            axpy(&mut v, c, &sv[b]);
            axpy(&mut d, c, &sd[b]);
        }
        values[a] = v;
        derivs[a] = d;
    }
}
