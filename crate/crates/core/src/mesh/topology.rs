//! Exact rank of signed incidence matrices.
//!
//! Ranks are computed by sparse Gaussian elimination over the prime field
//! GF(2^31 - 1). Entries are integers in {-1, 0, 1}, so the result equals the
//! rational rank unless the prime divides every maximal nonzero minor.

use std::collections::HashMap;

use super::IncidenceMatrix;

const P: u64 = 2_147_483_647;

fn mul(a: u64, b: u64) -> u64 {
    a * b % P
}

fn inv(a: u64) -> u64 {
    // Fermat: a^(p-2)
    let mut base = a;
    let mut e = P - 2;
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        e >>= 1;
    }
    acc
}

/// `row -= factor * pivot`, both sorted by column.
fn eliminate(row: &[(usize, u64)], pivot: &[(usize, u64)], factor: u64) -> Vec<(usize, u64)> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let take_row = j == pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
        let take_piv = i == row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
        if take_row {
            out.push(row[i]);
            i += 1;
        } else if take_piv {
            out.push((pivot[j].0, (P - mul(factor, pivot[j].1)) % P));
            j += 1;
        } else {
            let v = (row[i].1 + P - mul(factor, pivot[j].1)) % P;
            if v != 0 {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

pub(super) fn rank(m: &IncidenceMatrix) -> usize {
    // pivot rows keyed by their last (largest) column
    let mut pivots: HashMap<usize, Vec<(usize, u64)>> = HashMap::new();
    for i in 0..m.nrows() {
        let mut row: Vec<(usize, u64)> = m
            .row(i)
            .map(|(c, s)| (c, if s > 0 { 1 } else { P - 1 }))
            .collect();
        while let Some(&(low, val)) = row.last() {
            match pivots.get(&low) {
                Some(p) => {
                    let pv = p.last().unwrap().1;
                    let factor = mul(val, inv(pv));
                    row = eliminate(&row, p, factor);
                }
                None => {
                    pivots.insert(low, row);
                    break;
                }
            }
        }
    }
    pivots.len()
}
