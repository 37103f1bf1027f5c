//! Extrinsic geometry of discrete immersions into flat R^n.
//!
//! Everything is computed in the chart's coordinates: g_ij = ⟨F_i, F_j⟩,
//! Γ^k_ij from finite-differenced g, A^α_ij the normal part of ∂_i∂_j F^α
//! and H^α = g^ij A^α_ij. The ambient metric is Euclidean, so no ambient
//! Christoffel or curvature term ever appears.

pub mod graph;
pub mod structure;
pub mod tensor;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, Chart, GridField, Partials};

pub use graph::{graph_immersion, graph_singular_values, SingularValueReport};
pub use structure::{structure_residuals, CurvatureReport, ResidualNorm};

/// Relative floor on det g below which an immersion counts as degenerate.
pub const DET_FLOOR: f64 = 1e-12;

/// Pinching ratio is reported only where |H|² exceeds this fraction of |A|².
pub const PINCHING_THRESHOLD: f64 = 1e-12;

/// A discrete map F from chart nodes into R^n.
#[derive(Debug, Clone)]
pub struct Immersion {
    pos: GridField,
}

impl Immersion {
    /// Wraps a position field. Positivity of the induced metric is checked
    /// by [`induced_metric`], which every geometric consumer goes through.
    pub fn new(pos: GridField) -> Result<Self> {
        let m = pos.chart().dim();
        let n = pos.ncomp();
        if n <= m {
            return Err(Error::Usage(format!(
                "ambient dimension {n} must exceed chart dimension {m}"
            )));
        }
        pos.check_finite("immersion")?;
        Ok(Immersion { pos })
    }

    pub fn from_fn(chart: Arc<Chart>, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Immersion::new(GridField::from_fn(chart, n, f)?)
    }

    pub fn field(&self) -> &GridField {
        &self.pos
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.pos.chart()
    }

    pub fn m(&self) -> usize {
        self.chart().dim()
    }

    pub fn n(&self) -> usize {
        self.pos.ncomp()
    }

    pub fn node_count(&self) -> usize {
        self.chart().node_count()
    }

    pub fn position(&self, node: usize) -> &[f64] {
        self.pos.at(node)
    }

    pub fn values(&self) -> &[f64] {
        self.pos.values()
    }

    /// Same chart and wrap shifts with new positions.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Immersion> {
        Ok(Immersion {
            pos: self.pos.with_values(values)?,
        })
    }

    /// Image under x ↦ Qx + b with `q` row-major n×n.
    pub fn affine_image(&self, q: &[f64], b: &[f64]) -> Result<Immersion> {
        let n = self.n();
        if q.len() != n * n || b.len() != n {
            return Err(Error::Usage(format!(
                "affine map must be {n}x{n} plus a {n}-vector"
            )));
        }
        let apply = |x: &[f64], out: &mut [f64], with_b: bool| {
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += q[r * n + c] * x[c];
                }
                out[r] = if with_b { acc + b[r] } else { acc };
            }
        };
        let mut values = vec![0.0; self.values().len()];
        for node in 0..self.node_count() {
            apply(
                self.position(node),
                &mut values[node * n..(node + 1) * n],
                true,
            );
        }
        let mut pos = GridField::new(self.chart().clone(), n, values)?;
        if let Some(s) = self.pos.shifts() {
            let mut shifts = vec![0.0; s.len()];
            for a in 0..self.m() {
                apply(
                    &s[a * n..(a + 1) * n],
                    &mut shifts[a * n..(a + 1) * n],
                    false,
                );
            }
            pos = pos.with_shifts(shifts)?;
        }
        Immersion::new(pos)
    }

    /// λ(F − center).
    pub fn scaled(&self, center: &[f64], lambda: f64) -> Result<Immersion> {
        let n = self.n();
        let values: Vec<f64> = self
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| lambda * (v - center[i % n]))
            .collect();
        let mut pos = GridField::new(self.chart().clone(), n, values)?;
        if let Some(s) = self.pos.shifts() {
            pos = pos.with_shifts(s.iter().map(|v| lambda * v).collect())?;
        }
        Immersion::new(pos)
    }

    pub fn max_norm2(&self) -> f64 {
        (0..self.node_count())
            .map(|i| self.position(i).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// First fundamental form together with the jet of F it came from.
#[derive(Debug, Clone)]
pub struct MetricBundle {
    jet: Partials,
    /// `[node][a][α]`, the tangent vectors F_a.
    tangents: Vec<f64>,
    metric: GridField,
    inverse: Vec<f64>,
    det: Vec<f64>,
    sqrt_det: Vec<f64>,
    m: usize,
    n: usize,
}

impl MetricBundle {
    pub fn g(&self, node: usize) -> &[f64] {
        self.metric.at(node)
    }

    pub fn ginv(&self, node: usize) -> &[f64] {
        let mm = self.m * self.m;
        &self.inverse[node * mm..(node + 1) * mm]
    }

    pub fn det(&self, node: usize) -> f64 {
        self.det[node]
    }

    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    pub fn tangent(&self, node: usize, a: usize) -> &[f64] {
        let off = (node * self.m + a) * self.n;
        &self.tangents[off..off + self.n]
    }

    pub fn metric_field(&self) -> &GridField {
        &self.metric
    }
}

/// g_ij, g^ij and √det g; fails on the first node below the degeneracy floor.
pub fn induced_metric(imm: &Immersion) -> Result<MetricBundle> {
    let chart = imm.chart().clone();
    let (m, n) = (imm.m(), imm.n());
    let jet = grid::partials(imm.field())?;
    let nodes = chart.node_count();
    let mut tangents = vec![0.0; nodes * m * n];
    for node in 0..nodes {
        for a in 0..m {
            let off = (node * m + a) * n;
            tangents[off..off + n].copy_from_slice(jet.first[a].at(node));
        }
    }

    let mut g = vec![0.0; nodes * m * m];
    let mut inverse = vec![0.0; nodes * m * m];
    let mut det = vec![0.0; nodes];
    let mut worst: Option<(usize, f64, f64, f64)> = None;
    for node in 0..nodes {
        let t = &tangents[node * m * n..(node + 1) * m * n];
        let gn = &mut g[node * m * m..(node + 1) * m * m];
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for al in 0..n {
                    s += t[i * n + al] * t[j * n + al];
                }
                gn[i * m + j] = s;
                gn[j * m + i] = s;
            }
        }
        let (d, inv) = tensor::det_inv(gn, m);
        let trace: f64 = (0..m).map(|i| gn[i * m + i]).sum();
        let floor = DET_FLOOR * (trace / m as f64).powi(m as i32);
        if !d.is_finite() || !trace.is_finite() {
            return Err(Error::NonFinite {
                what: "induced metric",
                node,
            });
        }
        if d <= floor || floor == 0.0 {
            let ratio = if floor > 0.0 { d / floor } else { 0.0 };
            if worst.is_none_or(|w| ratio < w.3) {
                worst = Some((node, d, floor, ratio));
            }
        }
        det[node] = d;
        inverse[node * m * m..(node + 1) * m * m].copy_from_slice(&inv);
    }
    if let Some((node, det, floor, _)) = worst {
        return Err(Error::DegenerateImmersion { node, det, floor });
    }
    let sqrt_det = det.iter().map(|d| d.sqrt()).collect();
    let metric = GridField::from_parts(chart.clone(), m * m, g)
        .with_pole_parity(tensor::parity(&chart, 2, 1));
    Ok(MetricBundle {
        jet,
        tangents,
        metric,
        inverse,
        det,
        sqrt_det,
        m,
        n,
    })
}

/// Christoffel symbols of both kinds, `[k][i][j]` per node.
#[derive(Debug, Clone)]
pub struct Christoffel {
    /// Γ_{k,ij} = ½(∂_j g_ki + ∂_i g_kj − ∂_k g_ij).
    pub first: GridField,
    /// Γ^k_ij = g^kl Γ_{l,ij}.
    pub second: Vec<f64>,
    /// g^kl⟨∂_i∂_j F, F_l⟩, the tangential part of the discrete Hessian of F.
    pub extrinsic: Vec<f64>,
    m: usize,
}

impl Christoffel {
    pub fn at(&self, node: usize) -> &[f64] {
        let c = self.m.pow(3);
        &self.second[node * c..(node + 1) * c]
    }

    /// Γ^k_ij.
    pub fn get(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.second[node * m * m * m + (k * m + i) * m + j]
    }

    pub fn get_ext(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.extrinsic[node * m * m * m + (k * m + i) * m + j]
    }
}

pub fn christoffel(metric: &MetricBundle) -> Christoffel {
    let m = metric.m;
    let chart = metric.metric.chart().clone();
    let dg = grid::first_partials(&metric.metric);
    let nodes = chart.node_count();
    let m3 = m * m * m;
    let mut first = vec![0.0; nodes * m3];
    let mut second = vec![0.0; nodes * m3];
    for node in 0..nodes {
        let d = |a: usize, i: usize, j: usize| dg[a].at(node)[i * m + j];
        let f = &mut first[node * m3..(node + 1) * m3];
        for k in 0..m {
            for i in 0..m {
                for j in i..m {
                    let v = 0.5 * (d(j, k, i) + d(i, k, j) - d(k, i, j));
                    f[(k * m + i) * m + j] = v;
                    f[(k * m + j) * m + i] = v;
                }
            }
        }
        let ginv = metric.ginv(node);
        let s = &mut second[node * m3..(node + 1) * m3];
        for k in 0..m {
            for i in 0..m {
                for j in i..m {
                    let mut acc = 0.0;
                    for l in 0..m {
                        acc += ginv[k * m + l] * f[(l * m + i) * m + j];
                    }
                    s[(k * m + i) * m + j] = acc;
                    s[(k * m + j) * m + i] = acc;
                }
            }
        }
    }
    let n = metric.n;
    let mut extrinsic = vec![0.0; nodes * m3];
    let mut low = vec![0.0; m3];
    for node in 0..nodes {
        for l in 0..m {
            let t = metric.tangent(node, l);
            for i in 0..m {
                for j in i..m {
                    let d2 = metric.jet.second(i, j).at(node);
                    let v: f64 = (0..n).map(|al| d2[al] * t[al]).sum();
                    low[(l * m + i) * m + j] = v;
                    low[(l * m + j) * m + i] = v;
                }
            }
        }
        let ginv = metric.ginv(node);
        let s = &mut extrinsic[node * m3..(node + 1) * m3];
        for k in 0..m {
            for ij in 0..m * m {
                s[k * m * m + ij] = (0..m).map(|l| ginv[k * m + l] * low[l * m * m + ij]).sum();
            }
        }
    }
    let first = GridField::from_parts(chart.clone(), m3, first)
        .with_pole_parity(tensor::parity(&chart, 3, 1));
    Christoffel {
        first,
        second,
        extrinsic,
        m,
    }
}

/// A^α_ij = ∂_i∂_j F^α − Γ̂^k_ij F^α_k (the normal part of ∂_i∂_j F), layout `[i][j][α]`.
pub fn second_fundamental(metric: &MetricBundle, chr: &Christoffel) -> GridField {
    let (m, n) = (metric.m, metric.n);
    let chart = metric.metric.chart().clone();
    let nodes = chart.node_count();
    let per = m * m * n;
    let mut a = vec![0.0; nodes * per];
    for node in 0..nodes {
        let out = &mut a[node * per..(node + 1) * per];
        for i in 0..m {
            for j in i..m {
                let d2 = metric.jet.second(i, j).at(node);
                for al in 0..n {
                    let mut v = d2[al];
                    for k in 0..m {
                        v -= chr.get_ext(node, k, i, j) * metric.tangent(node, k)[al];
                    }
                    out[(i * m + j) * n + al] = v;
                    out[(j * m + i) * n + al] = v;
                }
            }
        }
    }
    GridField::from_parts(chart.clone(), per, a).with_pole_parity(tensor::parity(&chart, 2, n))
}

#[derive(Debug, Clone)]
pub struct MeanCurvature {
    pub h: GridField,
    pub norm_a2: Vec<f64>,
    pub norm_h2: Vec<f64>,
}

impl MeanCurvature {
    /// |A|²/|H|², absent where |H|² is negligible against |A|².
    pub fn pinching(&self, node: usize) -> Option<f64> {
        let (a2, h2) = (self.norm_a2[node], self.norm_h2[node]);
        (h2 > PINCHING_THRESHOLD * a2 && h2 > 0.0).then(|| a2 / h2)
    }
}

pub fn mean_curvature(a: &GridField, metric: &MetricBundle) -> MeanCurvature {
    let (m, n) = (metric.m, metric.n);
    let chart = a.chart().clone();
    let nodes = chart.node_count();
    let mut h = vec![0.0; nodes * n];
    let mut norm_a2 = vec![0.0; nodes];
    let mut norm_h2 = vec![0.0; nodes];
    for node in 0..nodes {
        let an = a.at(node);
        let ginv = metric.ginv(node);
        let hn = &mut h[node * n..(node + 1) * n];
        for i in 0..m {
            for j in 0..m {
                let w = ginv[i * m + j];
                for al in 0..n {
                    hn[al] += w * an[(i * m + j) * n + al];
                }
            }
        }
        norm_h2[node] = hn.iter().map(|v| v * v).sum();
        norm_a2[node] = tensor::norm2(ginv, an, m, 2, n);
    }
    MeanCurvature {
        h: GridField::from_parts(chart, n, h),
        norm_a2,
        norm_h2,
    }
}

/// All first- and second-order geometry of one immersion. Immutable.
#[derive(Debug, Clone)]
pub struct GeometryBundle {
    pub metric: MetricBundle,
    pub christoffel: Christoffel,
    /// A^α_ij, `[i][j][α]`.
    pub second: GridField,
    pub mean: MeanCurvature,
}

impl GeometryBundle {
    pub fn new(imm: &Immersion) -> Result<Self> {
        let metric = induced_metric(imm)?;
        let christoffel = christoffel(&metric);
        let second = second_fundamental(&metric, &christoffel);
        let mean = mean_curvature(&second, &metric);
        let b = GeometryBundle {
            metric,
            christoffel,
            second,
            mean,
        };
        b.mean.h.check_finite("mean curvature")?;
        Ok(b)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.second.chart()
    }

    pub fn m(&self) -> usize {
        self.metric.m
    }

    pub fn n(&self) -> usize {
        self.metric.n
    }

    pub fn node_count(&self) -> usize {
        self.chart().node_count()
    }

    pub fn g(&self, node: usize) -> &[f64] {
        self.metric.g(node)
    }

    pub fn ginv(&self, node: usize) -> &[f64] {
        self.metric.ginv(node)
    }

    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.metric.sqrt_det(node)
    }

    pub fn tangent(&self, node: usize, a: usize) -> &[f64] {
        self.metric.tangent(node, a)
    }

    pub fn a(&self, node: usize) -> &[f64] {
        self.second.at(node)
    }

    pub fn h(&self, node: usize) -> &[f64] {
        self.mean.h.at(node)
    }

    pub fn norm_a2(&self, node: usize) -> f64 {
        self.mean.norm_a2[node]
    }

    pub fn norm_h2(&self, node: usize) -> f64 {
        self.mean.norm_h2[node]
    }

    pub fn volume_density(&self) -> GridField {
        GridField::from_parts(self.chart().clone(), 1, self.metric.sqrt_det.clone())
    }

    pub fn volume(&self) -> f64 {
        grid::integrate_slices(
            self.chart(),
            &vec![1.0; self.node_count()],
            &self.metric.sqrt_det,
        )
    }

    /// ∫ s dμ for a per-node scalar.
    pub fn integrate(&self, s: &[f64]) -> f64 {
        grid::integrate_slices(self.chart(), s, &self.metric.sqrt_det)
    }

    /// Largest |A|² and its first (lowest-index) node.
    pub fn max_norm_a2(&self) -> (f64, usize) {
        argmax(&self.mean.norm_a2)
    }

    pub fn max_norm_h2(&self) -> f64 {
        argmax(&self.mean.norm_h2).0
    }

    pub fn min_det_g(&self) -> f64 {
        self.metric
            .det
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest physical grid spacing √g_aa · h_a over nodes and axes.
    pub fn min_physical_spacing(&self) -> f64 {
        let m = self.m();
        let h = self.chart().spacing();
        let mut best = f64::INFINITY;
        for node in 0..self.node_count() {
            let g = self.g(node);
            for a in 0..m {
                best = best.min(g[a * m + a].sqrt() * h[a]);
            }
        }
        best
    }

    /// I − F_i g^ij F_jᵀ, row-major n×n.
    pub fn normal_projector(&self, node: usize) -> Vec<f64> {
        let (m, n) = (self.m(), self.n());
        let ginv = self.ginv(node);
        let mut p = vec![0.0; n * n];
        for r in 0..n {
            p[r * n + r] = 1.0;
        }
        for i in 0..m {
            for j in 0..m {
                let w = ginv[i * m + j];
                let (ti, tj) = (self.tangent(node, i), self.tangent(node, j));
                for r in 0..n {
                    for c in 0..n {
                        p[r * n + c] -= w * ti[r] * tj[c];
                    }
                }
            }
        }
        p
    }

    /// V − g^ij⟨V, F_i⟩F_j at one node.
    pub fn normal_at(&self, node: usize, v: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m(), self.n());
        let ginv = self.ginv(node);
        let dots: Vec<f64> = (0..m)
            .map(|i| {
                self.tangent(node, i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let mut out = v.to_vec();
        for i in 0..m {
            for j in 0..m {
                let c = ginv[i * m + j] * dots[i];
                let tj = self.tangent(node, j);
                for al in 0..n {
                    out[al] -= c * tj[al];
                }
            }
        }
        out
    }

    /// Largest |⟨A_ij, F_k⟩| relative to |A| and |F_k| at the same node.
    pub fn tangency_defect(&self) -> f64 {
        let (m, n) = (self.m(), self.n());
        let mut worst: f64 = 0.0;
        for node in 0..self.node_count() {
            let a = self.a(node);
            let scale = self.norm_a2(node).sqrt().max(1e-300);
            for k in 0..m {
                let t = self.tangent(node, k);
                let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                for ij in 0..m * m {
                    let dot: f64 = (0..n).map(|al| a[ij * n + al] * t[al]).sum();
                    worst = worst.max(dot.abs() / (scale * tn));
                }
            }
        }
        worst
    }
}

fn argmax(v: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &x) in v.iter().enumerate() {
        if x > best.0 {
            best = (x, i);
        }
    }
    best
}

/// V⊥ for a node-major field with n components.
pub fn normal_part(bundle: &GeometryBundle, v: &GridField) -> Result<GridField> {
    if v.ncomp() != bundle.n() || v.chart().node_count() != bundle.node_count() {
        return Err(Error::Usage(
            "normal_part: field must have n components on the same chart".into(),
        ));
    }
    let mut out = Vec::with_capacity(v.values().len());
    for node in 0..bundle.node_count() {
        out.extend(bundle.normal_at(node, v.at(node)));
    }
    Ok(GridField::from_parts(
        bundle.chart().clone(),
        bundle.n(),
        out,
    ))
}

/// ∇_i T_{j1..jr}^α = ∂_i T − Σ_s Γ^p_{i j_s} T_{..p..}; the new index comes first.
pub fn covariant_derivative(bundle: &GeometryBundle, field: &GridField, rank: usize) -> GridField {
    let m = bundle.m();
    let chart = field.chart().clone();
    let q = field.ncomp() / m.pow(rank as u32);
    debug_assert_eq!(q * m.pow(rank as u32), field.ncomp());
    let d = grid::first_partials(field);
    let per_in = field.ncomp();
    let per_out = per_in * m;
    let nodes = chart.node_count();
    let mut out = vec![0.0; nodes * per_out];
    let mut idx = [0usize; 8];
    for node in 0..nodes {
        let t = field.at(node);
        let o = &mut out[node * per_out..(node + 1) * per_out];
        for i in 0..m {
            let di = d[i].at(node);
            for flat in 0..per_in {
                tensor::decode(m, rank, flat / q, &mut idx);
                let mut v = di[flat];
                for s in 0..rank {
                    let js = idx[s];
                    let stride = m.pow((rank - 1 - s) as u32) * q;
                    let base = flat - js * stride;
                    for p in 0..m {
                        v -= bundle.christoffel.get(node, p, i, js) * t[base + p * stride];
                    }
                }
                o[i * per_in + flat] = v;
            }
        }
    }
    GridField::from_parts(chart.clone(), per_out, out).with_pole_parity(tensor::parity(
        &chart,
        rank + 1,
        q,
    ))
}

/// ∇_i∇_j f = ∂_i∂_j f − Γ^k_ij ∂_k f for a field without lower indices,
/// using compact diagonal stencils.
pub fn covariant_hessian(bundle: &GeometryBundle, field: &GridField) -> Result<GridField> {
    let m = bundle.m();
    let q = field.ncomp();
    let chart = field.chart().clone();
    let p = grid::partials(field)?;
    let nodes = chart.node_count();
    let per = m * m * q;
    let mut out = vec![0.0; nodes * per];
    for node in 0..nodes {
        let o = &mut out[node * per..(node + 1) * per];
        for i in 0..m {
            for j in i..m {
                let d2 = p.second(i, j).at(node);
                for al in 0..q {
                    let mut v = d2[al];
                    for k in 0..m {
                        v -= bundle.christoffel.get(node, k, i, j) * p.first[k].at(node)[al];
                    }
                    o[(i * m + j) * q + al] = v;
                    o[(j * m + i) * q + al] = v;
                }
            }
        }
    }
    Ok(GridField::from_parts(chart.clone(), per, out)
        .with_pole_parity(tensor::parity(&chart, 2, q)))
}

/// Laplace–Beltrami g^ij ∇_i∇_j f, componentwise.
pub fn laplacian(bundle: &GeometryBundle, field: &GridField) -> Result<GridField> {
    let m = bundle.m();
    let q = field.ncomp();
    let hess = covariant_hessian(bundle, field)?;
    let nodes = bundle.node_count();
    let mut out = vec![0.0; nodes * q];
    for node in 0..nodes {
        let ginv = bundle.ginv(node);
        let hn = hess.at(node);
        for i in 0..m {
            for j in 0..m {
                for al in 0..q {
                    out[node * q + al] += ginv[i * m + j] * hn[(i * m + j) * q + al];
                }
            }
        }
    }
    Ok(GridField::from_parts(field.chart().clone(), q, out))
}

/// Scalar field from per-node values.
pub fn scalar_field(chart: &Arc<Chart>, values: Vec<f64>) -> GridField {
    GridField::from_parts(chart.clone(), 1, values)
}
