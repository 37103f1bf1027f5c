//! Residuals of the evolution equations along a computed flow.
//!
//! Each quantity X is differenced across two consecutive states and
//! compared with the average of its predicted rate at both ends, which is
//! centred at the midpoint. With a flat ambient space the covariant time
//! derivative is the plain componentwise one.

use serde::Serialize;

use super::FlowState;
use crate::error::{Error, Result};
use crate::geometry::structure::{normal_grad_a_norm2, quadratic_a_terms, ResidualNorm};
use crate::geometry::{
    covariant_derivative, covariant_hessian, laplacian, scalar_field, tensor, GeometryBundle,
};
use crate::grid::{self, GridField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionReport {
    /// ∂_t g_ij = −2⟨H, A_ij⟩.
    pub metric: ResidualNorm,
    /// ∂_t Γ^k_ij = −g^kl(∇_i⟨H,A_jl⟩ + ∇_j⟨H,A_il⟩ − ∇_l⟨H,A_ij⟩).
    pub christoffel: ResidualNorm,
    /// ∂_t √det g = −|H|² √det g, divided by √det g.
    pub volume: ResidualNorm,
    /// ∂_t A_ij = ∇_i∇_j H − C^k_ij F_k.
    pub second_fundamental: ResidualNorm,
    /// ∂_t|H|² = Δ|H|² − 2|∇⊥H|² + 2⟨A^ij,H⟩⟨A_ij,H⟩.
    pub mean_curvature: ResidualNorm,
    /// ∂_t|A|² = Δ|A|² − 2|∇⊥A|² + 2|⟨A_ij,A_kl⟩|² + |commutator|².
    pub second_norm: ResidualNorm,
    /// ∂_t f = Δf for f = |F|² + 2mt.
    pub heat: ResidualNorm,
    /// Relative error of d(volume)/dt against −∫|H|² dμ.
    pub volume_rate: f64,
}

impl EvolutionReport {
    pub const NAMES: [&'static str; 7] = [
        "metric",
        "christoffel",
        "volume",
        "second_fundamental",
        "mean_curvature",
        "second_norm",
        "heat",
    ];

    pub fn entries(&self) -> [(&'static str, ResidualNorm); 7] {
        [
            ("metric", self.metric),
            ("christoffel", self.christoffel),
            ("volume", self.volume),
            ("second_fundamental", self.second_fundamental),
            ("mean_curvature", self.mean_curvature),
            ("second_norm", self.second_norm),
            ("heat", self.heat),
        ]
    }
}

/// Per-state values and predicted rates, all flattened per node.
struct Terms {
    g: Vec<f64>,
    gamma: Vec<f64>,
    sqrt_det: Vec<f64>,
    a: Vec<f64>,
    h2: Vec<f64>,
    a2: Vec<f64>,
    f: Vec<f64>,
    volume: f64,
    metric_rate: Vec<f64>,
    christoffel_rate: Vec<f64>,
    volume_rate: Vec<f64>,
    total_volume_rate: f64,
    second_rate: Vec<f64>,
    h2_rate: Vec<f64>,
    a2_rate: Vec<f64>,
    f_rate: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn terms(state: &FlowState) -> Result<Terms> {
    let b = &state.bundle;
    let chart = b.chart().clone();
    let (m, n) = (b.m(), b.n());
    let nodes = b.node_count();
    let (m2, m3) = (m * m, m * m * m);

    let mut g = Vec::with_capacity(nodes * m2);
    let mut gamma = Vec::with_capacity(nodes * m3);
    let mut hdot = Vec::with_capacity(nodes * m2);
    for node in 0..nodes {
        g.extend_from_slice(b.g(node));
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    gamma.push(b.christoffel.get(node, k, i, j));
                }
            }
        }
        let (a, h) = (b.a(node), b.h(node));
        for ij in 0..m2 {
            hdot.push(dot(h, &a[ij * n..(ij + 1) * n]));
        }
    }
    let sqrt_det: Vec<f64> = (0..nodes).map(|i| b.sqrt_det(i)).collect();
    let h2: Vec<f64> = (0..nodes).map(|i| b.norm_h2(i)).collect();
    let a2: Vec<f64> = (0..nodes).map(|i| b.norm_a2(i)).collect();

    let metric_rate: Vec<f64> = hdot.iter().map(|v| -2.0 * v).collect();

    // C^k_ij from the covariant derivative of h_ij = ⟨H, A_ij⟩.
    let hfield = GridField::from_parts(chart.clone(), m2, hdot.clone())
        .with_pole_parity(tensor::parity(&chart, 2, 1));
    let dh = covariant_derivative(b, &hfield, 2);
    let mut christoffel_rate = vec![0.0; nodes * m3];
    for node in 0..nodes {
        let d = dh.at(node);
        let gi = b.ginv(node);
        let at = |i: usize, j: usize, l: usize| d[(i * m + j) * m + l];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += gi[k * m + l] * (at(i, j, l) + at(j, i, l) - at(l, i, j));
                    }
                    christoffel_rate[node * m3 + (k * m + i) * m + j] = -s;
                }
            }
        }
    }

    let volume_rate: Vec<f64> = h2.iter().map(|v| -v).collect();
    let total_volume_rate = -b.integrate(&h2);

    // ∂_t A = ∇∇H − C^k_ij F_k, with ∇∇ the covariant Hessian of the R^n-valued H.
    let hess_h = covariant_hessian(b, &b.mean.h)?;
    let mut second_rate = hess_h.values().to_vec();
    for node in 0..nodes {
        let base = node * m2 * n;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let c = christoffel_rate[node * m3 + (k * m + i) * m + j];
                    let t = b.tangent(node, k);
                    for al in 0..n {
                        second_rate[base + (i * m + j) * n + al] -= c * t[al];
                    }
                }
            }
        }
    }

    // |H|²: Δ|H|² − 2|∇⊥H|² + 2⟨A^ij,H⟩⟨A_ij,H⟩.
    let lap_h2 = laplacian(b, &scalar_field(&chart, h2.clone()))?;
    let dh_vec = grid::first_partials(&b.mean.h);
    let mut h2_rate = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let gi = b.ginv(node);
        let perp: Vec<Vec<f64>> = (0..m)
            .map(|k| b.normal_at(node, dh_vec[k].at(node)))
            .collect();
        let mut grad2 = 0.0;
        for k in 0..m {
            for l in 0..m {
                grad2 += gi[k * m + l] * dot(&perp[k], &perp[l]);
            }
        }
        let hh = tensor::norm2(gi, &hdot[node * m2..(node + 1) * m2], m, 2, 1);
        h2_rate.push(lap_h2.values()[node] - 2.0 * grad2 + 2.0 * hh);
    }

    // |A|²: Δ|A|² − 2|∇⊥A|² + 2|⟨A_ij,A_kl⟩|² + |commutator|².
    let lap_a2 = laplacian(b, &scalar_field(&chart, a2.clone()))?;
    let grad_a = covariant_derivative(b, &b.second, 2);
    let perp_a = normal_grad_a_norm2(b, &grad_a);
    let a2_rate: Vec<f64> = (0..nodes)
        .map(|node| {
            let (inner, comm) = quadratic_a_terms(b, node);
            lap_a2.values()[node] - 2.0 * perp_a[node] + 2.0 * inner + comm
        })
        .collect();

    let shift = 2.0 * m as f64 * state.t;
    let f: Vec<f64> = state
        .imm
        .values()
        .chunks(n)
        .map(|p| dot(p, p) + shift)
        .collect();
    // |F|² is well defined only for closed immersions; quasi-periodic
    // charts make it jump across the wrap.
    let f_rate = if state.imm.field().shifts().is_some() {
        vec![0.0; nodes]
    } else {
        laplacian(b, &scalar_field(&chart, f.clone()))?.into_values()
    };

    Ok(Terms {
        g,
        gamma,
        sqrt_det,
        a: b.second.values().to_vec(),
        h2,
        a2,
        f,
        volume: b.volume(),
        metric_rate,
        christoffel_rate,
        volume_rate,
        total_volume_rate,
        second_rate,
        h2_rate,
        a2_rate,
        f_rate,
    })
}

/// Pointwise defect (X₁ − X₀)/dt − (R₀ + R₁)/2.
fn defect(x0: &[f64], x1: &[f64], r0: &[f64], r1: &[f64], dt: f64) -> Vec<f64> {
    (0..x0.len())
        .map(|i| (x1[i] - x0[i]) / dt - 0.5 * (r0[i] + r1[i]))
        .collect()
}

/// Residuals of every evolution equation between two consecutive states.
pub fn evolution_residuals(before: &FlowState, after: &FlowState) -> Result<EvolutionReport> {
    let dt = after.t - before.t;
    if !(dt > 0.0) {
        return Err(Error::Usage(
            "evolution_residuals: states must be in increasing time".into(),
        ));
    }
    if before.imm.node_count() != after.imm.node_count() || before.imm.n() != after.imm.n() {
        return Err(Error::Usage(
            "evolution_residuals: states live on different grids".into(),
        ));
    }
    let b: &GeometryBundle = &before.bundle;
    let (m, n) = (b.m(), b.n());
    let nodes = b.node_count();
    let chart = b.chart();
    let layer = chart.boundary_layer(4);
    let mask: Vec<bool> = (0..nodes).map(|i| chart.is_interior(i, layer)).collect();
    let (t0, t1) = (terms(before)?, terms(after)?);
    let norm = |mags: &[f64]| ResidualNorm::from_magnitudes(b, mags, &mask);
    let (m2, m3) = (m * m, m * m * m);

    let dg = defect(&t0.g, &t1.g, &t0.metric_rate, &t1.metric_rate, dt);
    let metric: Vec<f64> = (0..nodes)
        .map(|i| tensor::norm2(b.ginv(i), &dg[i * m2..(i + 1) * m2], m, 2, 1).sqrt())
        .collect();

    let dgam = defect(
        &t0.gamma,
        &t1.gamma,
        &t0.christoffel_rate,
        &t1.christoffel_rate,
        dt,
    );
    let christoffel: Vec<f64> = (0..nodes)
        .map(|i| {
            // Lower the upper index so the tensor norm applies.
            let g = b.g(i);
            let c = &dgam[i * m3..(i + 1) * m3];
            let mut low = vec![0.0; m3];
            for k in 0..m {
                for p in 0..m {
                    for ij in 0..m2 {
                        low[k * m2 + ij] += g[k * m + p] * c[p * m2 + ij];
                    }
                }
            }
            tensor::norm2(b.ginv(i), &low, m, 3, 1).sqrt()
        })
        .collect();

    let volume: Vec<f64> = (0..nodes)
        .map(|i| {
            let avg = 0.5 * (t0.sqrt_det[i] + t1.sqrt_det[i]);
            ((t1.sqrt_det[i] - t0.sqrt_det[i]) / dt / avg
                - 0.5 * (t0.volume_rate[i] + t1.volume_rate[i]))
                .abs()
        })
        .collect();

    let da = defect(&t0.a, &t1.a, &t0.second_rate, &t1.second_rate, dt);
    let per = m2 * n;
    let second: Vec<f64> = (0..nodes)
        .map(|i| tensor::norm2(b.ginv(i), &da[i * per..(i + 1) * per], m, 2, n).sqrt())
        .collect();

    let abs = |v: Vec<f64>| v.into_iter().map(f64::abs).collect::<Vec<_>>();
    let mean = abs(defect(&t0.h2, &t1.h2, &t0.h2_rate, &t1.h2_rate, dt));
    let second_norm = abs(defect(&t0.a2, &t1.a2, &t0.a2_rate, &t1.a2_rate, dt));
    let heat = if before.imm.field().shifts().is_some() {
        vec![0.0; nodes]
    } else {
        abs(defect(&t0.f, &t1.f, &t0.f_rate, &t1.f_rate, dt))
    };

    let rate = (t1.volume - t0.volume) / dt;
    let predicted = 0.5 * (t0.total_volume_rate + t1.total_volume_rate);
    let volume_rate = if predicted != 0.0 {
        ((rate - predicted) / predicted).abs()
    } else {
        rate.abs()
    };

    Ok(EvolutionReport {
        metric: norm(&metric),
        christoffel: norm(&christoffel),
        volume: norm(&volume),
        second_fundamental: norm(&second),
        mean_curvature: norm(&mean),
        second_norm: norm(&second_norm),
        heat: norm(&heat),
        volume_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::step_explicit;
    use crate::geometry::Immersion;
    use crate::grid::{make_chart, ChartSpec};
    use std::f64::consts::PI;

    fn pair(imm: Immersion, dt: f64) -> (FlowState, FlowState) {
        let s0 = FlowState::new(imm, 0.0, 0).unwrap();
        let s1 = step_explicit(&s0, dt).unwrap();
        (s0, s1)
    }

    fn circle(n: usize) -> Immersion {
        let c = make_chart(&ChartSpec::circle(n)).unwrap();
        Immersion::from_fn(c, 2, |x| vec![x[0].cos(), x[0].sin()]).unwrap()
    }

    #[test]
    fn shrinking_circle_heat_and_volume_rate() {
        let (s0, s1) = pair(circle(256), 1e-5);
        let r = evolution_residuals(&s0, &s1).unwrap();
        assert!(r.heat.linf < 1e-3, "{}", r.heat.linf);
        assert!(r.volume_rate < 1e-2, "{}", r.volume_rate);
        for (name, v) in r.entries() {
            assert!(v.linf.is_finite() && v.linf >= 0.0, "{name}");
            assert!(v.linf < 1e-2, "{name}: {}", v.linf);
        }
    }

    #[test]
    fn stationary_plane_has_zero_residuals() {
        let c = make_chart(&ChartSpec::torus(&[16, 16])).unwrap();
        let plane = Immersion::new(
            GridField::from_fn(c, 3, |x| vec![x[0], x[1], 0.0])
                .unwrap()
                .with_shifts(vec![2.0 * PI, 0.0, 0.0, 0.0, 2.0 * PI, 0.0])
                .unwrap(),
        )
        .unwrap();
        let (s0, s1) = pair(plane, 1e-3);
        let r = evolution_residuals(&s0, &s1).unwrap();
        for (name, v) in r.entries() {
            assert!(v.linf < 1e-10, "{name}: {}", v.linf);
        }
    }

    #[test]
    fn ellipse_residuals_converge() {
        // A curve without rotational symmetry exercises every term,
        // including the Christoffel rate, which vanishes on circles.
        let run = |n: usize, dt: f64| {
            let c = make_chart(&ChartSpec::circle(n)).unwrap();
            let imm =
                Immersion::from_fn(c, 2, |x| vec![1.3 * x[0].cos(), 0.8 * x[0].sin()]).unwrap();
            let (s0, s1) = pair(imm, dt);
            evolution_residuals(&s0, &s1).unwrap()
        };
        let coarse = run(128, 4e-6);
        let fine = run(256, 1e-6);
        for ((name, a), (_, b)) in coarse.entries().iter().zip(fine.entries().iter()) {
            assert!(a.linf / b.linf > 3.0, "{name}: {} -> {}", a.linf, b.linf);
        }
        assert!(coarse.christoffel.linf > 1e-6);
    }

    #[test]
    fn states_must_advance() {
        let (s0, _) = pair(circle(16), 1e-4);
        assert!(evolution_residuals(&s0, &s0).is_err());
    }
}
