//! Lagrangian graphs x ↦ x + i∇u(x) over flat tori, their angle and mean
//! curvature form, and the potential flow du/dt = α.
//!
//! R^{2m} ≅ C^m is ordered (x¹, …, x^m, y¹, …, y^m) with J(x, y) = (−y, x)
//! and ω(V, W) = ⟨JV, W⟩ = Σ_j (V_{x^j} W_{y^j} − V_{y^j} W_{x^j}).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{run, FlowConfig, FlowRecord, FlowState, Integrator};
use crate::geometry::{laplacian, scalar_field, tensor, GeometryBundle, Immersion, ResidualNorm};
use crate::grid::{self, Chart, Domain, GridField};

/// u(x) = ½xᵀSx + φ(x) on a flat torus, with φ periodic and of mean zero.
#[derive(Debug, Clone)]
pub struct Potential {
    s: Vec<f64>,
    phi: GridField,
}

impl Potential {
    /// Validates the pieces and subtracts the mean of φ.
    pub fn new(s: Vec<f64>, phi: GridField) -> Result<Potential> {
        let chart = phi.chart();
        let Domain::TorusTm(m) = chart.domain() else {
            return Err(Error::Usage("potential needs a torus chart".into()));
        };
        if phi.ncomp() != 1 || phi.shifts().is_some() {
            return Err(Error::Usage("φ must be a periodic scalar field".into()));
        }
        if s.len() != m * m {
            return Err(Error::Usage(format!(
                "quadratic part must be {m}x{m}, got {} entries",
                s.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("quadratic part is not finite".into()));
        }
        for i in 0..m {
            for j in 0..i {
                if s[i * m + j] != s[j * m + i] {
                    return Err(Error::Usage("quadratic part is not symmetric".into()));
                }
            }
        }
        phi.check_finite("potential")?;
        let mean = phi.values().iter().sum::<f64>() / phi.values().len() as f64;
        let phi = phi.with_values(phi.values().iter().map(|v| v - mean).collect())?;
        Ok(Potential { s, phi })
    }

    pub fn from_fn(
        chart: Arc<Chart>,
        s: Vec<f64>,
        phi: impl Fn(&[f64]) -> f64,
    ) -> Result<Potential> {
        Potential::new(s, GridField::from_fn(chart, 1, |x| vec![phi(x)])?)
    }

    pub fn m(&self) -> usize {
        self.phi.chart().dim()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.phi.chart()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn phi(&self) -> &GridField {
        &self.phi
    }

    fn with_phi(&self, values: Vec<f64>) -> Result<Potential> {
        Potential::new(self.s.clone(), self.phi.with_values(values)?)
    }

    /// ∇u = Sx + ∇φ, quasi-periodic with shifts 2π·S e_b.
    pub fn gradient(&self) -> Result<GridField> {
        let m = self.m();
        let chart = self.chart();
        let d = grid::first_partials(&self.phi);
        let mut values = Vec::with_capacity(chart.node_count() * m);
        for node in 0..chart.node_count() {
            let x = chart.coord(node);
            for a in 0..m {
                let sx: f64 = (0..m).map(|b| self.s[a * m + b] * x[b]).sum();
                values.push(sx + d[a].at(node)[0]);
            }
        }
        let mut shifts = vec![0.0; m * m];
        for b in 0..m {
            for a in 0..m {
                shifts[b * m + a] = 2.0 * PI * self.s[a * m + b];
            }
        }
        GridField::new(chart.clone(), m, values)?.with_shifts(shifts)
    }

    /// Hess φ per node as D_b D_a φ (the same stencils that differentiate
    /// ∇u in the immersion), row-major m×m, exactly symmetric.
    pub fn hess_phi(&self) -> Vec<f64> {
        let m = self.m();
        let nodes = self.chart().node_count();
        let d = grid::first_partials(&self.phi);
        let mut out = vec![0.0; nodes * m * m];
        for a in 0..m {
            for b in a..m {
                let dd = grid::derivative(&d[a], b);
                for node in 0..nodes {
                    let v = dd.at(node)[0];
                    out[node * m * m + a * m + b] = v;
                    out[node * m * m + b * m + a] = v;
                }
            }
        }
        out
    }

    /// Hess u = S + Hess φ per node.
    pub fn hessian(&self) -> Vec<f64> {
        let mm = self.s.len();
        let mut k = self.hess_phi();
        for (i, v) in k.iter_mut().enumerate() {
            *v += self.s[i % mm];
        }
        k
    }
}

/// F(x) = (x, ∇u(x)) in R^{2m}.
pub fn lag_immersion(p: &Potential) -> Result<Immersion> {
    let m = p.m();
    let n = 2 * m;
    let chart = p.chart();
    let y = p.gradient()?;
    let mut values = Vec::with_capacity(chart.node_count() * n);
    for node in 0..chart.node_count() {
        values.extend_from_slice(chart.coord(node));
        values.extend_from_slice(y.at(node));
    }
    let ys = y
        .shifts()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| vec![0.0; m * m]);
    let mut shifts = vec![0.0; m * n];
    for b in 0..m {
        shifts[b * n + b] = 2.0 * PI;
        shifts[b * n + m..(b + 1) * n].copy_from_slice(&ys[b * m..(b + 1) * m]);
    }
    Immersion::new(GridField::new(chart.clone(), n, values)?.with_shifts(shifts)?)
}

fn half_dim(n: usize) -> Result<usize> {
    if n % 2 != 0 {
        return Err(Error::Usage(format!(
            "symplectic structure needs an even ambient dimension, got {n}"
        )));
    }
    Ok(n / 2)
}

fn omega(v: &[f64], w: &[f64], h: usize) -> f64 {
    (0..h).map(|j| v[j] * w[h + j] - v[h + j] * w[j]).sum()
}

fn j_times(v: &[f64], h: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * h];
    for j in 0..h {
        out[j] = -v[h + j];
        out[h + j] = v[j];
    }
    out
}

/// max over nodes and pairs i < j of |ω(F_i, F_j)|.
pub fn lagrangian_residual(imm: &Immersion) -> Result<f64> {
    let h = half_dim(imm.n())?;
    let m = imm.m();
    let d = grid::first_partials(imm.field());
    let mut worst: f64 = 0.0;
    for node in 0..imm.node_count() {
        for i in 0..m {
            for j in i + 1..m {
                worst = worst.max(omega(d[i].at(node), d[j].at(node), h).abs());
            }
        }
    }
    Ok(worst)
}

/// Σ arctan λ over the eigenvalues of a symmetric m×m matrix (m ≤ 3).
pub fn angle_of(k: &[f64], m: usize) -> f64 {
    let eig: Vec<f64> = match m {
        1 => vec![k[0]],
        2 => Matrix2::from_row_slice(k)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect(),
        3 => Matrix3::from_row_slice(k)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect(),
        _ => DMatrix::from_row_slice(m, m, k)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect(),
    };
    eig.iter().map(|l| l.atan()).sum()
}

fn complex_det(k: &[f64], m: usize) -> Complex64 {
    let a = DMatrix::from_fn(m, m, |r, c| {
        Complex64::new(if r == c { 1.0 } else { 0.0 }, k[r * m + c])
    });
    a.determinant()
}

#[derive(Debug, Clone)]
pub struct AngleField {
    pub alpha: GridField,
    /// max |det(I + i Hess u) − e^{iα}√det g| / √det g.
    pub identity_defect: f64,
}

/// α = Σ arctan λ_i(Hess u), checked against the complex determinant and
/// the induced metric of the graph.
pub fn lagrangian_angle(p: &Potential) -> Result<AngleField> {
    let m = p.m();
    let k = p.hessian();
    let bundle = GeometryBundle::new(&lag_immersion(p)?)?;
    let nodes = p.chart().node_count();
    let mut alpha = Vec::with_capacity(nodes);
    let mut defect: f64 = 0.0;
    for node in 0..nodes {
        let kn = &k[node * m * m..(node + 1) * m * m];
        let a = angle_of(kn, m);
        let vol = bundle.sqrt_det(node);
        let lhs = complex_det(kn, m);
        let rhs = Complex64::from_polar(vol, a);
        defect = defect.max((lhs - rhs).norm() / vol);
        alpha.push(a);
    }
    Ok(AngleField {
        alpha: scalar_field(p.chart(), alpha),
        identity_defect: defect,
    })
}

fn alpha_values(p: &Potential) -> Result<Vec<f64>> {
    let m = p.m();
    let k = p.hessian();
    let alpha: Vec<f64> = k.chunks(m * m).map(|kn| angle_of(kn, m)).collect();
    if let Some(node) = alpha.iter().position(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            what: "lagrangian angle",
            node,
        });
    }
    Ok(alpha)
}

#[derive(Debug, Clone)]
pub struct MeanCurvatureForm {
    /// h_ijk = ⟨J F_i, A_jk⟩, layout `[i][j][k]`.
    pub h: GridField,
    /// H_i = g^kl h_ikl.
    pub form: GridField,
    /// max |h_ijk − h_jik|.
    pub symmetry_defect: f64,
    /// max |∂_i H_j − ∂_j H_i| over interior nodes.
    pub closedness: f64,
    /// max |H_i − ω(F_i, H⃗)|.
    pub omega_defect: f64,
}

pub fn mean_curvature_form(imm: &Immersion, bundle: &GeometryBundle) -> Result<MeanCurvatureForm> {
    let (m, n) = (imm.m(), imm.n());
    if n != 2 * m {
        return Err(Error::Usage(format!(
            "mean curvature form needs n = 2m, got m = {m}, n = {n}"
        )));
    }
    let chart = imm.chart();
    let nodes = imm.node_count();
    let mut h = vec![0.0; nodes * m * m * m];
    let mut form = vec![0.0; nodes * m];
    let (mut sym, mut om): (f64, f64) = (0.0, 0.0);
    for node in 0..nodes {
        let a = bundle.a(node);
        let ginv = bundle.ginv(node);
        let hn = &mut h[node * m * m * m..(node + 1) * m * m * m];
        for i in 0..m {
            let nu = j_times(bundle.tangent(node, i), m);
            for j in 0..m {
                for k in 0..m {
                    let ajk = &a[(j * m + k) * n..(j * m + k + 1) * n];
                    hn[(i * m + j) * m + k] = nu.iter().zip(ajk).map(|(x, y)| x * y).sum();
                }
            }
        }
        for i in 0..m {
            let mut hi = 0.0;
            for k in 0..m {
                for l in 0..m {
                    hi += ginv[k * m + l] * hn[(i * m + k) * m + l];
                }
            }
            form[node * m + i] = hi;
            om = om.max((hi - omega(bundle.tangent(node, i), bundle.h(node), m)).abs());
            for j in 0..m {
                for k in 0..m {
                    sym = sym.max((hn[(i * m + j) * m + k] - hn[(j * m + i) * m + k]).abs());
                }
            }
        }
    }
    let form =
        GridField::new(chart.clone(), m, form)?.with_pole_parity(tensor::parity(chart, 1, 1));
    let d = grid::first_partials(&form);
    let layer = chart.boundary_layer(1);
    let mut closed: f64 = 0.0;
    for node in (0..nodes).filter(|&i| chart.is_interior(i, layer)) {
        for i in 0..m {
            for j in i + 1..m {
                closed = closed.max((d[i].at(node)[j] - d[j].at(node)[i]).abs());
            }
        }
    }
    Ok(MeanCurvatureForm {
        h: GridField::new(chart.clone(), m * m * m, h)?,
        form,
        symmetry_defect: sym,
        closedness: closed,
        omega_defect: om,
    })
}

#[derive(Debug, Clone)]
pub struct PinchingReport {
    /// |A|² − 3/(m+2)|H⃗|² per node.
    pub gap: Vec<f64>,
    /// Smallest gap over interior nodes.
    pub gap_min: f64,
    /// |ĥ − (Ĥ_i g_jk + Ĥ_j g_ki + Ĥ_k g_ij)/(m+2)|² per node, with ĥ the
    /// fully symmetrized h and Ĥ its trace.
    pub defect: Vec<f64>,
    /// max |defect − (|ĥ|² − 3/(m+2)|Ĥ|²)| relative to |ĥ|²: the algebraic
    /// identity, exact up to round-off.
    pub identity_defect: f64,
    /// max |gap − defect| over interior nodes: discretization difference
    /// between the A-based and h-based expressions.
    pub gap_vs_defect: f64,
}

pub fn pinching_gap(imm: &Immersion, bundle: &GeometryBundle) -> Result<PinchingReport> {
    let mcf = mean_curvature_form(imm, bundle)?;
    let m = imm.m();
    let mf = m as f64;
    let chart = imm.chart();
    let nodes = imm.node_count();
    let c = 3.0 / (mf + 2.0);
    let mut gap = Vec::with_capacity(nodes);
    let mut defect = Vec::with_capacity(nodes);
    let (mut gap_min, mut ident, mut versus) = (f64::INFINITY, 0.0f64, 0.0f64);
    let m3 = m * m * m;
    for node in 0..nodes {
        let g = bundle.g(node);
        let ginv = bundle.ginv(node);
        let hn = mcf.h.at(node);
        let mut hs = vec![0.0; m3];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let e = |a: usize, b: usize, d: usize| hn[(a * m + b) * m + d];
                    hs[(i * m + j) * m + k] = (e(i, j, k)
                        + e(i, k, j)
                        + e(j, i, k)
                        + e(j, k, i)
                        + e(k, i, j)
                        + e(k, j, i))
                        / 6.0;
                }
            }
        }
        let mut trace = vec![0.0; m];
        for (i, t) in trace.iter_mut().enumerate() {
            for k in 0..m {
                for l in 0..m {
                    *t += ginv[k * m + l] * hs[(i * m + k) * m + l];
                }
            }
        }
        let mut diff = hs.clone();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    diff[(i * m + j) * m + k] -= (trace[i] * g[j * m + k]
                        + trace[j] * g[k * m + i]
                        + trace[k] * g[i * m + j])
                        / (mf + 2.0);
                }
            }
        }
        let d = tensor::norm2(ginv, &diff, m, 3, 1);
        let hs2 = tensor::norm2(ginv, &hs, m, 3, 1);
        let tr2 = tensor::norm2(ginv, &trace, m, 1, 1);
        ident = ident.max((d - (hs2 - c * tr2)).abs() / hs2.max(f64::MIN_POSITIVE));
        let gp = bundle.norm_a2(node) - c * bundle.norm_h2(node);
        if chart.is_interior(node, 0) {
            gap_min = gap_min.min(gp);
            versus = versus.max((gp - d).abs());
        }
        gap.push(gp);
        defect.push(d);
    }
    Ok(PinchingReport {
        gap,
        gap_min,
        defect,
        identity_defect: ident,
        gap_vs_defect: versus,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangianReport {
    pub lagrangian_residual: f64,
    #[serde(skip)]
    pub alpha: GridField,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub angle_identity_defect: f64,
    pub h_symmetry_defect: f64,
    pub dh_residual: f64,
    pub dalpha_minus_h_residual: f64,
    pub h_omega_defect: f64,
    /// min cos α.
    pub calibration_min: f64,
    pub pinching_gap_min: f64,
}

pub fn lagrangian_report(p: &Potential) -> Result<LagrangianReport> {
    let imm = lag_immersion(p)?;
    let bundle = GeometryBundle::new(&imm)?;
    let angle = lagrangian_angle(p)?;
    let mcf = mean_curvature_form(&imm, &bundle)?;
    let pinch = pinching_gap(&imm, &bundle)?;
    let m = p.m();
    let dalpha = grid::first_partials(&angle.alpha);
    let mut da_h: f64 = 0.0;
    for node in 0..imm.node_count() {
        for i in 0..m {
            da_h = da_h.max((dalpha[i].at(node)[0] - mcf.form.at(node)[i]).abs());
        }
    }
    let av = angle.alpha.values();
    Ok(LagrangianReport {
        lagrangian_residual: lagrangian_residual(&imm)?,
        alpha_min: av.iter().copied().fold(f64::INFINITY, f64::min),
        alpha_max: av.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        calibration_min: av.iter().map(|a| a.cos()).fold(f64::INFINITY, f64::min),
        alpha: angle.alpha,
        angle_identity_defect: angle.identity_defect,
        h_symmetry_defect: mcf.symmetry_defect,
        dh_residual: mcf.closedness,
        dalpha_minus_h_residual: da_h,
        h_omega_defect: mcf.omega_defect,
        pinching_gap_min: pinch.gap_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaConfig {
    /// dt = σ·h_min²/2.
    pub cfl_sigma: f64,
    pub t_max: f64,
    pub record_every: usize,
    /// Keep every k-th record's potential (0 = none besides the last).
    pub snapshot_every: usize,
}

impl Default for MaConfig {
    fn default() -> Self {
        MaConfig {
            cfl_sigma: 0.25,
            t_max: 1.0,
            record_every: 1,
            snapshot_every: 0,
        }
    }
}

impl MaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_sigma > 0.0 && self.cfl_sigma <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_sigma = {} outside (0, 1]",
                self.cfl_sigma
            )));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "potential flow needs a finite t_max > 0, got {}",
                self.t_max
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn time_step(&self, chart: &Chart) -> f64 {
        let h = chart
            .spacing()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        self.cfl_sigma * h * h / 2.0
    }
}

/// One explicit step of φ_t = α(S + Hess φ), followed by re-centering.
pub fn ma_step(p: &Potential, dt: f64) -> Result<Potential> {
    let alpha = alpha_values(p)?;
    let values = p
        .phi
        .values()
        .iter()
        .zip(&alpha)
        .map(|(v, a)| v + dt * a)
        .collect();
    p.with_phi(values)
}

#[derive(Debug, Clone)]
pub struct MaSnapshot {
    pub record: usize,
    pub t: f64,
    pub potential: Potential,
}

#[derive(Debug, Clone)]
pub struct MaTrace {
    pub records: Vec<FlowRecord>,
    pub snapshots: Vec<MaSnapshot>,
    pub last: MaSnapshot,
}

fn ma_record(p: &Potential, t: f64, step: usize, dt: f64) -> Result<FlowRecord> {
    let state = FlowState::new(lag_immersion(p)?, t, step)?;
    let mut rec = FlowRecord::of(&state, dt, None)?;
    let alpha = alpha_values(p)?;
    rec.alpha = Some((
        alpha.iter().copied().fold(f64::INFINITY, f64::min),
        alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    rec.hess_phi_inf = Some(
        p.hess_phi()
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs())),
    );
    Ok(rec)
}

/// Runs the potential flow to `t_max` with a fixed step (the last one
/// clipped to land on `t_max`).
pub fn ma_run(p0: &Potential, config: &MaConfig) -> Result<MaTrace> {
    config.validate()?;
    let dt = config.time_step(p0.chart());
    let mut p = p0.clone();
    let (mut t, mut step) = (0.0, 0usize);
    let mut records = vec![ma_record(&p, t, step, 0.0)?];
    let mut snapshots = Vec::new();
    if config.snapshot_every > 0 {
        snapshots.push(MaSnapshot {
            record: 0,
            t,
            potential: p.clone(),
        });
    }
    while t < config.t_max {
        let h = dt.min(config.t_max - t);
        p = ma_step(&p, h)?;
        step += 1;
        t = if h < dt { config.t_max } else { t + h };
        if step % config.record_every == 0 || t >= config.t_max {
            records.push(ma_record(&p, t, step, h)?);
            let idx = records.len() - 1;
            if config.snapshot_every > 0 && idx % config.snapshot_every == 0 {
                snapshots.push(MaSnapshot {
                    record: idx,
                    t,
                    potential: p.clone(),
                });
            }
        }
    }
    let last = MaSnapshot {
        record: records.len() - 1,
        t,
        potential: p,
    };
    Ok(MaTrace {
        records,
        snapshots,
        last,
    })
}

/// Δ_g α + ⟨dα, K g⁻¹ dα⟩: the rate of α at a fixed parameter point, where
/// the potential flow moves the graph by H⃗ plus the tangential field
/// K g⁻¹ dα.
fn angle_rate(p: &Potential) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = p.m();
    let imm = lag_immersion(p)?;
    let bundle = GeometryBundle::new(&imm)?;
    let alpha = alpha_values(p)?;
    let field = scalar_field(p.chart(), alpha.clone());
    let lap = laplacian(&bundle, &field)?;
    let d = grid::first_partials(&field);
    let k = p.hessian();
    let mut rate = Vec::with_capacity(alpha.len());
    for node in 0..alpha.len() {
        let ginv = bundle.ginv(node);
        let da: Vec<f64> = (0..m).map(|a| d[a].at(node)[0]).collect();
        let mut drift = 0.0;
        for a in 0..m {
            for b in 0..m {
                let kg: f64 = (0..m)
                    .map(|c| k[node * m * m + a * m + c] * ginv[c * m + b])
                    .sum();
                drift += da[a] * kg * da[b];
            }
        }
        rate.push(lap.at(node)[0] + drift);
    }
    Ok((alpha, rate))
}

/// Midpoint residual of ∂α/∂t = Δα (plus the reparametrization drift)
/// between two potential-flow states `dt` apart.
pub fn angle_evolution_residual(
    before: &Potential,
    after: &Potential,
    dt: f64,
) -> Result<ResidualNorm> {
    if !(dt > 0.0) {
        return Err(Error::Usage("angle residual needs dt > 0".into()));
    }
    let (a0, r0) = angle_rate(before)?;
    let (a1, r1) = angle_rate(after)?;
    let mags: Vec<f64> = (0..a0.len())
        .map(|i| ((a1[i] - a0[i]) / dt - 0.5 * (r0[i] + r1[i])).abs())
        .collect();
    let bundle = GeometryBundle::new(&lag_immersion(after)?)?;
    Ok(ResidualNorm::from_magnitudes(
        &bundle,
        &mags,
        &vec![true; mags.len()],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualRouteReport {
    pub t: f64,
    pub max_h_potential: f64,
    pub max_h_immersion: f64,
    pub volume_potential: f64,
    pub volume_immersion: f64,
}

impl DualRouteReport {
    pub fn h_relative_difference(&self) -> f64 {
        (self.max_h_potential - self.max_h_immersion).abs()
            / self.max_h_potential.max(f64::MIN_POSITIVE)
    }
}

/// Flows the same initial graph by the potential equation and by the
/// parametric flow of the immersion, then compares reparametrization
/// invariant quantities at `t_end`.
pub fn dual_route_check(p0: &Potential, t_end: f64, cfl_sigma: f64) -> Result<DualRouteReport> {
    let cfg = MaConfig {
        cfl_sigma,
        t_max: t_end,
        record_every: usize::MAX,
        snapshot_every: 0,
    };
    let ma = ma_run(p0, &cfg)?;
    let last = ma.records.last().expect("ma_run records the final state");
    let flow_cfg = FlowConfig {
        integrator: Integrator::ExplicitEuler,
        cfl_sigma,
        stop_t_max: t_end,
        record_every: usize::MAX,
        ..FlowConfig::default()
    };
    let trace = run(lag_immersion(p0)?, flow_cfg)?;
    let fin = trace.last().expect("flow records the final state");
    Ok(DualRouteReport {
        t: t_end,
        max_h_potential: last.max_h2.sqrt(),
        max_h_immersion: fin.max_h2.sqrt(),
        volume_potential: last.volume,
        volume_immersion: fin.volume,
    })
}
