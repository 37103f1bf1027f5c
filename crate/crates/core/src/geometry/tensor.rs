//! Index bookkeeping for per-node tensors.
//!
//! A rank-r field with q ambient components stores, per node, the entries
//! `T[j1..jr][α]` flattened row-major with α fastest.

use crate::grid::{AxisKind, Chart};

pub fn len(m: usize, rank: usize, q: usize) -> usize {
    m.pow(rank as u32) * q
}

/// Decodes a flat lower-index position into its indices (first index most significant).
pub fn decode(m: usize, rank: usize, mut flat: usize, out: &mut [usize]) {
    for s in (0..rank).rev() {
        out[s] = flat % m;
        flat /= m;
    }
}

pub fn encode(m: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * m + i)
}

/// Pole parity of every component: each colatitude index flips sign across a pole.
pub fn parity(chart: &Chart, rank: usize, q: usize) -> Vec<bool> {
    let m = chart.dim();
    let total = len(m, rank, q);
    let colat = (0..m).find(|&a| chart.kind(a) == AxisKind::Colatitude);
    let mut idx = [0usize; 8];
    (0..total)
        .map(|c| match colat {
            None => false,
            Some(ax) => {
                decode(m, rank, c / q, &mut idx);
                idx[..rank].iter().filter(|&&i| i == ax).count() % 2 == 1
            }
        })
        .collect()
}

/// Raises every lower index of `t` with `ginv`.
pub fn raise_all(ginv: &[f64], t: &[f64], m: usize, rank: usize, q: usize) -> Vec<f64> {
    let mut cur = t.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut idx = [0usize; 8];
    for s in 0..rank {
        // stride of index s in the flat layout
        let stride = m.pow((rank - 1 - s) as u32) * q;
        for flat in 0..cur.len() {
            decode(m, rank, flat / q, &mut idx);
            let js = idx[s];
            let base = flat - js * stride;
            let mut acc = 0.0;
            for p in 0..m {
                acc += ginv[js * m + p] * cur[base + p * stride];
            }
            next[flat] = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Metric norm squared, Euclidean in the ambient slot.
pub fn norm2(ginv: &[f64], t: &[f64], m: usize, rank: usize, q: usize) -> f64 {
    if rank == 0 {
        return t.iter().map(|v| v * v).sum();
    }
    let up = raise_all(ginv, t, m, rank, q);
    t.iter().zip(&up).map(|(a, b)| a * b).sum()
}

/// Determinant and inverse of a small symmetric positive matrix (m ≤ 3).
pub fn det_inv(g: &[f64], m: usize) -> (f64, Vec<f64>) {
    match m {
        1 => (g[0], vec![1.0 / g[0]]),
        2 => {
            let det = g[0] * g[3] - g[1] * g[2];
            let inv = vec![g[3] / det, -g[1] / det, -g[2] / det, g[0] / det];
            (det, inv)
        }
        3 => {
            let c00 = g[4] * g[8] - g[5] * g[7];
            let c01 = g[5] * g[6] - g[3] * g[8];
            let c02 = g[3] * g[7] - g[4] * g[6];
            let det = g[0] * c00 + g[1] * c01 + g[2] * c02;
            let c11 = g[0] * g[8] - g[2] * g[6];
            let c12 = g[2] * g[3] - g[0] * g[5];
            let c22 = g[0] * g[4] - g[1] * g[3];
            let inv = vec![
                c00 / det,
                c01 / det,
                c02 / det,
                c01 / det,
                c11 / det,
                c12 / det,
                c02 / det,
                c12 / det,
                c22 / det,
            ];
            (det, inv)
        }
        _ => unreachable!("intrinsic dimension is at most 3"),
    }
}
