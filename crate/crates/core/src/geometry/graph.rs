//! Graphs of maps from a flat torus, and the singular values of their differential.

use nalgebra::DMatrix;

use super::Immersion;
use crate::error::{Error, Result};
use crate::grid::{self, Domain, GridField};

/// F(x) = (cos x¹, sin x¹, …, cos x^m, sin x^m, f(x)) in R^{2m+k}.
///
/// Each torus factor is a unit circle, so the induced metric is
/// δ_ij + ⟨f_i, f_j⟩.
pub fn graph_immersion(f: &GridField) -> Result<Immersion> {
    let chart = f.chart().clone();
    let Domain::TorusTm(m) = chart.domain() else {
        return Err(Error::Usage("graph_immersion needs a torus chart".into()));
    };
    let k = f.ncomp();
    let n = 2 * m + k;
    let mut values = Vec::with_capacity(chart.node_count() * n);
    for node in 0..chart.node_count() {
        for &x in chart.coord(node) {
            values.push(x.cos());
            values.push(x.sin());
        }
        values.extend_from_slice(f.at(node));
    }
    let mut pos = GridField::new(chart.clone(), n, values)?;
    if let Some(s) = f.shifts() {
        let mut shifts = vec![0.0; m * n];
        for a in 0..m {
            shifts[a * n + 2 * m..(a + 1) * n].copy_from_slice(&s[a * k..(a + 1) * k]);
        }
        pos = pos.with_shifts(shifts)?;
    }
    Immersion::new(pos)
}

#[derive(Debug, Clone)]
pub struct SingularValueReport {
    /// `m` values per node, descending; zero-padded when k < m.
    pub values: Vec<f64>,
    pub m: usize,
    /// λ_i λ_j < 1 for all i ≠ j at every node; `None` when m = 1.
    pub area_decreasing: Option<bool>,
    /// Largest λ₁λ₂ over nodes (0 when m = 1).
    pub max_pair_product: f64,
}

impl SingularValueReport {
    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }
}

pub fn graph_singular_values(f: &GridField) -> Result<SingularValueReport> {
    let chart = f.chart();
    let m = chart.dim();
    let k = f.ncomp();
    let d = grid::first_partials(f);
    let mut values = Vec::with_capacity(chart.node_count() * m);
    let mut max_pair: f64 = 0.0;
    for node in 0..chart.node_count() {
        let jac = DMatrix::from_fn(k, m, |r, c| d[c].at(node)[r]);
        let mut sv: Vec<f64> = jac.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv.resize(m, 0.0);
        if m >= 2 {
            max_pair = max_pair.max(sv[0] * sv[1]);
        }
        values.extend(sv);
    }
    let area_decreasing = (m >= 2).then_some(max_pair < 1.0);
    Ok(SingularValueReport {
        values,
        m,
        area_decreasing,
        max_pair_product: max_pair,
    })
}
