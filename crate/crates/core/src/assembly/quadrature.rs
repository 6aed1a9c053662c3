//! Symmetric simplex quadrature (Grundmann–Möller family).
//!
//! The rule of index `s` integrates polynomials of degree `2s + 1` exactly on
//! the `n`-simplex. Points are permutation-symmetric in barycentric
//! coordinates; some weights are negative for `s >= 1`.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 8;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Barycentric coordinates, `dim + 1` per point.
    pub points: Vec<Vec<f64>>,
    /// Weights summing to the reference simplex measure `1/dim!`.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference-simplex measure `1/dim!`.
    pub fn reference_measure(&self) -> f64 {
        1.0 / factorial(self.dim)
    }

    /// Iterates `(barycentric point, weight relative to unit simplex measure)`,
    /// i.e. weights summing to one. Multiply by a cell volume to integrate.
    pub fn normalized(&self) -> impl Iterator<Item = (&[f64], f64)> {
        let scale = factorial(self.dim);
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(p, w)| (p.as_slice(), w * scale))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All compositions of `total` into `parts` nonnegative integers, in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = Vec::with_capacity(parts);
            v.push(first);
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// A symmetric rule on the `dim`-simplex exact for polynomials of degree `exactness_degree`.
pub fn quadrature(dim: usize, exactness_degree: usize) -> Result<QuadratureRule> {
    if exactness_degree > MAX_DEGREE {
        return Err(Error::Unsupported(format!(
            "quadrature degree {exactness_degree} exceeds {MAX_DEGREE}"
        )));
    }
    if dim == 0 || dim > 3 {
        return Err(Error::Unsupported(format!("quadrature in dimension {dim}")));
    }
    let s = exactness_degree.saturating_sub(1).div_ceil(2);
    let d = 2 * s + 1;
    let n = dim;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + n - i));
        for beta in compositions(s - i, n + 1) {
            points.push(beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect());
            weights.push(w);
        }
    }
    Ok(QuadratureRule {
        dim,
        points,
        weights,
        exactness_degree: d,
    })
}

/// Gauss–Legendre rule on `[0, 1]` with `n` points (`n <= 5`), exact to degree `2n - 1`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[0.555_555_555_555_555_6, 0.888_888_888_888_888_9, 0.555_555_555_555_555_6],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        5 => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683_1,
                0.0,
                0.538_469_310_105_683_1,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("gauss_legendre_unit supports 1..=5 points"),
    };
    x.iter()
        .zip(w)
        .map(|(xi, wi)| (0.5 * (xi + 1.0), 0.5 * wi))
        .collect()
}
