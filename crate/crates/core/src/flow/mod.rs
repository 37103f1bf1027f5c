//! Time integration of dF/dt = H and its diagnostics.

mod evolution;
mod solver;

use serde::{Deserialize, Serialize};

pub use evolution::{evolution_residuals, EvolutionReport};

use crate::error::{Error, Result};
use crate::geometry::{GeometryBundle, Immersion};
use crate::grid::{self, GridField};
use crate::singularity::{huisken_value, DensityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    ExplicitEuler,
    SemiImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub integrator: Integrator,
    /// Parabolic CFL factor σ in dt ≤ σ·h_min²/(2m).
    pub cfl_sigma: f64,
    /// Curvature brake ρ in dt ≤ ρ/max|A|².
    pub curvature_cap_rho: f64,
    pub stop_max_a2: f64,
    pub stop_t_max: f64,
    pub stop_dt_min: f64,
    /// Record every this many steps (the initial and final states are always recorded).
    pub record_every: usize,
    /// Keep the immersion of every this many records; 0 keeps none.
    pub snapshot_every: usize,
    /// Evaluate the Gaussian density at every record.
    pub monitor: Option<DensityParams>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            integrator: Integrator::ExplicitEuler,
            cfl_sigma: 0.25,
            curvature_cap_rho: 0.05,
            stop_max_a2: 1e6,
            stop_t_max: f64::INFINITY,
            stop_dt_min: 1e-12,
            record_every: 1,
            snapshot_every: 0,
            monitor: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cfl_sigma", self.cfl_sigma),
            ("curvature_cap_rho", self.curvature_cap_rho),
            ("stop_max_A2", self.stop_max_a2),
            ("stop_t_max", self.stop_t_max),
            ("stop_dt_min", self.stop_dt_min),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "flow.{name} must be positive, got {v}"
                )));
            }
        }
        if self.cfl_sigma > 1.0 {
            return Err(Error::Config(format!(
                "flow.cfl_sigma must be at most 1, got {}",
                self.cfl_sigma
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("flow.record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    TimeReached,
    CurvatureCap,
    DtUnderflow,
    Degenerate,
    NonFinite,
}

impl Termination {
    /// CurvatureCap and DtUnderflow are the discrete singularity signal.
    pub fn is_singular(self) -> bool {
        matches!(self, Termination::CurvatureCap | Termination::DtUnderflow)
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Termination::Degenerate | Termination::NonFinite)
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub imm: Immersion,
    pub bundle: GeometryBundle,
    pub step_index: usize,
}

impl FlowState {
    pub fn new(imm: Immersion, t: f64, step_index: usize) -> Result<FlowState> {
        let bundle = GeometryBundle::new(&imm)?;
        Ok(FlowState {
            t,
            imm,
            bundle,
            step_index,
        })
    }

    fn advanced(&self, values: Vec<f64>, dt: f64) -> Result<FlowState> {
        let pos = self.imm.field().with_values(values)?;
        FlowState::new(Immersion::new(pos)?, self.t + dt, self.step_index + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub step: usize,
    pub t: f64,
    /// Step size that produced this state (0 for the initial state).
    pub dt: f64,
    pub max_a2: f64,
    /// First node attaining `max_a2`.
    pub argmax_a2: usize,
    pub max_h2: f64,
    pub volume: f64,
    pub min_det_g: f64,
    pub huisken: Option<f64>,
    /// (min α, max α) for potential flows.
    pub alpha: Option<(f64, f64)>,
    pub hess_phi_inf: Option<f64>,
}

impl FlowRecord {
    pub fn of(state: &FlowState, dt: f64, monitor: Option<&DensityParams>) -> Result<FlowRecord> {
        let b = &state.bundle;
        let (max_a2, argmax_a2) = b.max_norm_a2();
        let huisken = match monitor {
            Some(p) if p.t0 > state.t => Some(huisken_value(b, &state.imm, state.t, p)?),
            _ => None,
        };
        Ok(FlowRecord {
            step: state.step_index,
            t: state.t,
            dt,
            max_a2,
            argmax_a2,
            max_h2: b.max_norm_h2(),
            volume: b.volume(),
            min_det_g: b.min_det_g(),
            huisken,
            alpha: None,
            hess_phi_inf: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Index into `FlowTrace::records`.
    pub record: usize,
    pub t: f64,
    pub imm: Immersion,
}

#[derive(Debug, Clone, Default)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Option<Termination>,
}

impl FlowTrace {
    pub fn last(&self) -> Option<&FlowRecord> {
        self.records.last()
    }
}

/// Step size from the CFL and curvature laws, before clipping to `stop_t_max`.
///
/// The implicit integrator needs no CFL bound; it falls back to it only
/// when the immersion is flat.
pub fn time_step(config: &FlowConfig, bundle: &GeometryBundle) -> f64 {
    let (a2, _) = bundle.max_norm_a2();
    let curv = if a2 > 0.0 {
        config.curvature_cap_rho / a2
    } else {
        f64::INFINITY
    };
    let h = bundle.min_physical_spacing();
    let cfl = config.cfl_sigma * h * h / (2.0 * bundle.m() as f64);
    match config.integrator {
        Integrator::ExplicitEuler => cfl.min(curv),
        Integrator::SemiImplicit => {
            if curv.is_finite() {
                curv
            } else {
                cfl
            }
        }
    }
}

/// F ← F + dt·H.
pub fn step_explicit(state: &FlowState, dt: f64) -> Result<FlowState> {
    let n = state.imm.n();
    let mut values = state.imm.values().to_vec();
    for node in 0..state.imm.node_count() {
        let h = state.bundle.h(node);
        for al in 0..n {
            values[node * n + al] += dt * h[al];
        }
    }
    state.advanced(values, dt)
}

/// Frozen-coefficient operator L y = g^ij(∂_i∂_j y − Γ̂^k_ij ∂_k y), whose
/// value on F is exactly the mean curvature vector.
struct FrozenLaplacian<'a> {
    bundle: &'a GeometryBundle,
    /// g^ij Γ̂^k_ij per node.
    drift: Vec<f64>,
}

impl<'a> FrozenLaplacian<'a> {
    fn new(bundle: &'a GeometryBundle) -> Self {
        let m = bundle.m();
        let mut drift = vec![0.0; bundle.node_count() * m];
        for node in 0..bundle.node_count() {
            let gi = bundle.ginv(node);
            for k in 0..m {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += gi[i * m + j] * bundle.christoffel.get_ext(node, k, i, j);
                    }
                }
                drift[node * m + k] = s;
            }
        }
        FrozenLaplacian { bundle, drift }
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let b = self.bundle;
        let (m, n) = (b.m(), b.n());
        let field = GridField::from_parts(b.chart().clone(), n, y.to_vec());
        let p = grid::partials(&field)?;
        for node in 0..b.node_count() {
            let gi = b.ginv(node);
            let o = &mut out[node * n..(node + 1) * n];
            o.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                for j in 0..m {
                    let w = gi[i * m + j];
                    let d2 = p.second(i, j).at(node);
                    for al in 0..n {
                        o[al] += w * d2[al];
                    }
                }
            }
            for k in 0..m {
                let w = self.drift[node * m + k];
                let d1 = p.first[k].at(node);
                for al in 0..n {
                    o[al] -= w * d1[al];
                }
            }
        }
        Ok(())
    }
}

/// Approximate inverse of I − dt·L: periodic tridiagonal solves along the
/// stiffest periodic axis, with the other axes lumped onto the diagonal.
/// Uses second-order weights whatever the stencil order. Without a
/// periodic axis it reduces to Jacobi.
struct LinePreconditioner {
    n: usize,
    axis: Option<(usize, usize, usize)>,
    line_starts: Vec<usize>,
    sub: Vec<f64>,
    diag: Vec<f64>,
}

impl LinePreconditioner {
    fn new(bundle: &GeometryBundle, dt: f64) -> Self {
        let chart = bundle.chart();
        let m = bundle.m();
        let h = chart.spacing();
        let nodes = bundle.node_count();
        let weight = |node: usize, a: usize| dt * bundle.ginv(node)[a * m + a] / (h[a] * h[a]);
        let axis = (0..m)
            .filter(|&a| chart.kind(a) == grid::AxisKind::Periodic)
            .map(|a| (a, (0..nodes).map(|i| weight(i, a)).fold(0.0, f64::max)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(a, _)| a);
        let mut diag = vec![0.0; nodes];
        let mut sub = vec![0.0; nodes];
        for node in 0..nodes {
            diag[node] = 1.0 + 2.0 * (0..m).map(|a| weight(node, a)).sum::<f64>();
            if let Some(a) = axis {
                sub[node] = -weight(node, a);
            }
        }
        let dims = chart.dims();
        let axis = axis.map(|a| (a, dims[a], dims[a + 1..].iter().product::<usize>()));
        let line_starts = match axis {
            Some((a, _, _)) => (0..nodes)
                .filter(|&i| chart.multi_index(i)[a] == 0)
                .collect(),
            None => Vec::new(),
        };
        LinePreconditioner {
            n: bundle.n(),
            axis,
            line_starts,
            sub,
            diag,
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        let Some((_, len, stride)) = self.axis else {
            for (i, (o, x)) in out.iter_mut().zip(v).enumerate() {
                *o = x / self.diag[i / n];
            }
            return;
        };
        let (mut sub, mut diag, mut rhs) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for &start in &self.line_starts {
            for k in 0..len {
                let node = start + k * stride;
                sub[k] = self.sub[node];
                diag[k] = self.diag[node];
            }
            for al in 0..n {
                for k in 0..len {
                    rhs[k] = v[(start + k * stride) * n + al];
                }
                // The operator is symmetric along the line up to the
                // variation of g^aa, so the same weights serve both sides.
                solver::cyclic_thomas(&sub, &diag, &sub, &mut rhs);
                for k in 0..len {
                    out[(start + k * stride) * n + al] = rhs[k];
                }
            }
        }
    }
}

/// Relative residual the implicit solve is driven to.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
const SOLVER_MAX_ITER: usize = 2000;

/// Solves (I − dt·L) Y = dt·H for the increment Y = F(t+dt) − F(t), with L
/// the Laplace–Beltrami operator frozen at time t. Since L F = H this is
/// the same as (I − dt·L) F(t+dt) = F(t), but the increment carries no
/// quasi-periodic shifts.
pub fn step_semi_implicit(state: &FlowState, dt: f64) -> Result<FlowState> {
    let b = &state.bundle;
    let n = b.n();
    let len = b.node_count() * n;
    let op = FrozenLaplacian::new(b);
    let rhs: Vec<f64> = b.mean.h.values().iter().map(|h| dt * h).collect();
    let pre = LinePreconditioner::new(b, dt);
    let mut y = rhs.clone();
    let mut ly = vec![0.0; len];
    solver::bicgstab(
        |v, out| {
            op.apply(v, &mut ly)?;
            for i in 0..len {
                out[i] = v[i] - dt * ly[i];
            }
            Ok(())
        },
        |v, out| pre.apply(v, out),
        &rhs,
        &mut y,
        SOLVER_TOLERANCE,
        SOLVER_MAX_ITER,
    )?;
    let values = state
        .imm
        .values()
        .iter()
        .zip(&y)
        .map(|(f, d)| f + d)
        .collect();
    state.advanced(values, dt)
}

/// A flow in progress. Everything after construction is a deterministic
/// function of the current state, so a resumed flow reproduces an
/// uninterrupted one exactly.
#[derive(Debug, Clone)]
pub struct Flow {
    config: FlowConfig,
    state: FlowState,
    trace: FlowTrace,
}

impl Flow {
    pub fn new(initial: Immersion, config: FlowConfig) -> Result<Flow> {
        config.validate()?;
        let state = FlowState::new(initial, 0.0, 0)?;
        let mut flow = Flow {
            config,
            state,
            trace: FlowTrace::default(),
        };
        flow.record(0.0)?;
        Ok(flow)
    }

    pub fn resume(state: FlowState, trace: FlowTrace, config: FlowConfig) -> Result<Flow> {
        config.validate()?;
        if trace.records.last().map(|r| r.step) > Some(state.step_index) {
            return Err(Error::Usage("resume: trace extends past the state".into()));
        }
        Ok(Flow {
            config,
            state,
            trace,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn trace(&self) -> &FlowTrace {
        &self.trace
    }

    pub fn into_parts(self) -> (FlowState, FlowTrace) {
        (self.state, self.trace)
    }

    fn record(&mut self, dt: f64) -> Result<()> {
        let rec = FlowRecord::of(&self.state, dt, self.config.monitor.as_ref())?;
        let idx = self.trace.records.len();
        self.trace.records.push(rec);
        let every = self.config.snapshot_every;
        if every > 0 && idx % every == 0 {
            self.trace.snapshots.push(Snapshot {
                record: idx,
                t: self.state.t,
                imm: self.state.imm.clone(),
            });
        }
        Ok(())
    }

    fn finish(&mut self, why: Termination, last_dt: f64) -> Result<Termination> {
        if self.trace.records.last().map(|r| r.step) != Some(self.state.step_index) {
            self.record(last_dt)?;
        }
        let last = self.trace.records.len() - 1;
        if self.config.snapshot_every > 0
            && self.trace.snapshots.last().map(|s| s.record) != Some(last)
        {
            self.trace.snapshots.push(Snapshot {
                record: last,
                t: self.state.t,
                imm: self.state.imm.clone(),
            });
        }
        self.trace.termination = Some(why);
        Ok(why)
    }

    fn stop_reason(&self) -> Option<Termination> {
        if self.state.t >= self.config.stop_t_max {
            return Some(Termination::TimeReached);
        }
        if self.state.bundle.max_norm_a2().0 >= self.config.stop_max_a2 {
            return Some(Termination::CurvatureCap);
        }
        None
    }

    /// Takes up to `max_steps` steps (unbounded when `None`). Returns the
    /// termination reason once the flow has stopped.
    pub fn advance(&mut self, max_steps: Option<usize>) -> Result<Option<Termination>> {
        if let Some(t) = self.trace.termination {
            return Ok(Some(t));
        }
        let mut taken = 0;
        let mut last_dt = self.trace.records.last().map_or(0.0, |r| r.dt);
        loop {
            if let Some(why) = self.stop_reason() {
                return self.finish(why, last_dt).map(Some);
            }
            if max_steps.is_some_and(|k| taken >= k) {
                return Ok(None);
            }
            let dt = time_step(&self.config, &self.state.bundle);
            if !(dt >= self.config.stop_dt_min) {
                return self.finish(Termination::DtUnderflow, last_dt).map(Some);
            }
            let remaining = self.config.stop_t_max - self.state.t;
            let clipped = dt >= remaining;
            let dt = if clipped { remaining } else { dt };
            let next = match self.config.integrator {
                Integrator::ExplicitEuler => step_explicit(&self.state, dt),
                Integrator::SemiImplicit => step_semi_implicit(&self.state, dt),
            };
            let mut next = match next {
                Ok(s) => s,
                Err(Error::DegenerateImmersion { .. }) => {
                    return self.finish(Termination::Degenerate, last_dt).map(Some)
                }
                Err(Error::NonFinite { .. }) => {
                    return self.finish(Termination::NonFinite, last_dt).map(Some)
                }
                Err(e) => return Err(e),
            };
            if clipped {
                next.t = self.config.stop_t_max;
            }
            self.state = next;
            last_dt = dt;
            taken += 1;
            if self.state.step_index % self.config.record_every == 0 {
                self.record(dt)?;
            }
        }
    }
}

/// Runs the flow to termination.
pub fn run(initial: Immersion, config: FlowConfig) -> Result<FlowTrace> {
    let mut flow = Flow::new(initial, config)?;
    flow.advance(None)?;
    Ok(flow.into_parts().1)
}

/// Number of trailing records the singular-time fit uses.
pub const SINGULAR_FIT_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularTimeEstimate {
    pub t_hat: f64,
    /// RMS of the fit residual relative to the RMS of 1/max|A|².
    pub fit_quality: f64,
    /// False when the curvature history is not strictly growing or the fit
    /// does not predict a blow-up after the last record.
    pub reliable: bool,
}

/// Least-squares fit of 1/max|A|² as an affine function of t over the last
/// records; T_hat is its root.
pub fn estimate_singular_time(trace: &FlowTrace) -> Result<SingularTimeEstimate> {
    let k = SINGULAR_FIT_RECORDS;
    let recs = &trace.records;
    if recs.len() < k {
        return Err(Error::Usage(format!(
            "singular time fit needs {k} records, trace has {}",
            recs.len()
        )));
    }
    let tail = &recs[recs.len() - k..];
    let growing = tail.windows(2).all(|w| w[1].max_a2 > w[0].max_a2) && tail[0].max_a2 > 0.0;
    if !growing {
        return Ok(SingularTimeEstimate {
            t_hat: f64::INFINITY,
            fit_quality: f64::INFINITY,
            reliable: false,
        });
    }
    let ts: Vec<f64> = tail.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = tail.iter().map(|r| 1.0 / r.max_a2).collect();
    let kf = k as f64;
    let tm = ts.iter().sum::<f64>() / kf;
    let ym = ys.iter().sum::<f64>() / kf;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let t_hat = -icpt / slope;
    let rss: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - icpt - slope * t).powi(2))
        .sum();
    let yss: f64 = ys.iter().map(|y| y * y).sum();
    let fit_quality = (rss / yss).sqrt();
    let last_t = *ts.last().unwrap();
    let reliable = slope < 0.0 && t_hat.is_finite() && t_hat > last_t;
    Ok(SingularTimeEstimate {
        t_hat,
        fit_quality,
        reliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::graph_immersion;
    use crate::grid::{make_chart, ChartSpec};

    fn circle(n: usize, r: f64) -> Immersion {
        let c = make_chart(&ChartSpec::circle(n)).unwrap();
        Immersion::from_fn(c, 2, move |x| vec![r * x[0].cos(), r * x[0].sin()]).unwrap()
    }

    fn sphere(j: usize) -> Immersion {
        let c = make_chart(&ChartSpec::sphere(j, 2 * j)).unwrap();
        Immersion::from_fn(c, 3, |p| {
            vec![p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()]
        })
        .unwrap()
    }

    fn mean_radius(imm: &Immersion) -> f64 {
        let n = imm.n();
        let s: f64 = imm
            .values()
            .chunks(n)
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        s / imm.node_count() as f64
    }

    #[test]
    fn explicit_circle_step() {
        let s = FlowState::new(circle(256, 1.0), 0.0, 0).unwrap();
        let s1 = step_explicit(&s, 1e-4).unwrap();
        let r = mean_radius(&s1.imm);
        // Discrete |H| on the circle is c2/s1 = 1 + h²/4 + O(h⁴).
        let h = 2.0 * std::f64::consts::PI / 256.0;
        let c2 = 2.0 * (1.0 - h.cos()) / (h * h);
        let s1h = (h.sin() / h).powi(2);
        assert!((r - (1.0 - 1e-4 * c2 / s1h)).abs() < 1e-14);
        assert!((r - (1.0 - 2e-4f64).sqrt()).abs() < 1e-7);
        assert_eq!(s1.step_index, 1);
        assert!((s1.t - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn explicit_sphere_step() {
        let s = FlowState::new(sphere(48), 0.0, 0).unwrap();
        let r = mean_radius(&step_explicit(&s, 1e-4).unwrap().imm);
        assert!((r - (1.0 - 4e-4f64).sqrt()).abs() < 1e-6, "{r}");
    }

    #[test]
    fn flat_graph_is_fixed_point() {
        let c = make_chart(&ChartSpec::torus(&[16, 16])).unwrap();
        let imm = graph_immersion(&GridField::zeros(c, 1)).unwrap();
        let s = FlowState::new(imm.clone(), 0.0, 0).unwrap();
        // The product torus curves in its circle factors; only the graph
        // slot is flat.
        let e = step_explicit(&s, 1e-3).unwrap();
        let i = step_semi_implicit(&s, 1e-3).unwrap();
        for node in 0..imm.node_count() {
            assert_eq!(e.imm.position(node)[4], 0.0);
            assert_eq!(i.imm.position(node)[4], 0.0);
        }
    }

    #[test]
    fn semi_implicit_circle_step() {
        let s = FlowState::new(circle(256, 1.0), 0.0, 0).unwrap();
        let r = mean_radius(&step_semi_implicit(&s, 1e-3).unwrap().imm);
        assert!(
            (r - (1.0 - 2e-3f64).sqrt()).abs() < 2e-6,
            "{}",
            r - (1.0 - 2e-3f64).sqrt()
        );
    }

    #[test]
    fn semi_implicit_sphere_step() {
        let s = FlowState::new(sphere(48), 0.0, 0).unwrap();
        let r = mean_radius(&step_semi_implicit(&s, 1e-3).unwrap().imm);
        assert!((r - (1.0 - 4e-3f64).sqrt()).abs() < 1e-4, "{r}");
    }

    #[test]
    fn semi_implicit_agrees_with_explicit_to_second_order() {
        let c = make_chart(&ChartSpec::circle(64)).unwrap();
        let imm = Immersion::from_fn(c, 2, |x| vec![1.5 * x[0].cos(), x[0].sin()]).unwrap();
        let s = FlowState::new(imm, 0.0, 0).unwrap();
        let gap = |dt: f64| {
            let e = step_explicit(&s, dt).unwrap();
            let i = step_semi_implicit(&s, dt).unwrap();
            e.imm
                .values()
                .iter()
                .zip(i.imm.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ratio = gap(1e-4) / gap(5e-5);
        assert!(ratio > 3.8 && ratio < 4.2, "{ratio}");
    }

    #[test]
    fn flat_graph_run_reaches_time() {
        let c = make_chart(&ChartSpec::torus(&[8, 8])).unwrap();
        let plane = Immersion::new(
            GridField::from_fn(c, 3, |x| vec![x[0], x[1], 0.0])
                .unwrap()
                .with_shifts(vec![
                    2.0 * std::f64::consts::PI,
                    0.0,
                    0.0,
                    0.0,
                    2.0 * std::f64::consts::PI,
                    0.0,
                ])
                .unwrap(),
        )
        .unwrap();
        let v0 = GeometryBundle::new(&plane).unwrap().volume();
        let cfg = FlowConfig {
            stop_t_max: 1.0,
            record_every: 1000,
            ..FlowConfig::default()
        };
        let trace = run(plane, cfg).unwrap();
        assert_eq!(trace.termination, Some(Termination::TimeReached));
        let last = trace.last().unwrap();
        assert_eq!(last.t, 1.0);
        assert!((last.volume - v0).abs() < 1e-10);
        assert!(trace.records.iter().all(|r| (r.volume - v0).abs() < 1e-10));
    }

    #[test]
    fn circle_run_hits_curvature_cap_and_fit_finds_extinction() {
        let cfg = FlowConfig {
            record_every: 200,
            stop_max_a2: 1e4,
            ..FlowConfig::default()
        };
        let trace = run(circle(64, 1.0), cfg).unwrap();
        assert_eq!(trace.termination, Some(Termination::CurvatureCap));
        assert!(trace
            .records
            .windows(2)
            .all(|w| w[1].t > w[0].t && w[1].volume < w[0].volume));
        let est = estimate_singular_time(&trace).unwrap();
        assert!(est.reliable);
        assert!((est.t_hat - 0.5).abs() < 1e-2, "{}", est.t_hat);
    }

    #[test]
    fn stationary_history_is_unreliable() {
        let rec = |t: f64| FlowRecord {
            step: 0,
            t,
            dt: 0.1,
            max_a2: 1.0,
            argmax_a2: 0,
            max_h2: 1.0,
            volume: 1.0,
            min_det_g: 1.0,
            huisken: None,
            alpha: None,
            hess_phi_inf: None,
        };
        let trace = FlowTrace {
            records: (0..12).map(|i| rec(i as f64)).collect(),
            ..FlowTrace::default()
        };
        assert!(!estimate_singular_time(&trace).unwrap().reliable);
        let short = FlowTrace {
            records: vec![rec(0.0)],
            ..FlowTrace::default()
        };
        assert!(estimate_singular_time(&short).is_err());
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let cfg = FlowConfig {
            record_every: 7,
            stop_t_max: 0.05,
            ..FlowConfig::default()
        };
        let full = run(circle(32, 1.0), cfg.clone()).unwrap();
        let mut a = Flow::new(circle(32, 1.0), cfg.clone()).unwrap();
        assert_eq!(a.advance(Some(5)).unwrap(), None);
        let (state, trace) = a.into_parts();
        let mut b = Flow::resume(state, trace, cfg).unwrap();
        b.advance(None).unwrap();
        assert_eq!(b.trace().records, full.records);
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        assert!(FlowConfig {
            cfl_sigma: 1.5,
            ..FlowConfig::default()
        }
        .validate()
        .is_err());
        assert!(FlowConfig {
            curvature_cap_rho: 0.0,
            ..FlowConfig::default()
        }
        .validate()
        .is_err());
        assert!(FlowConfig {
            record_every: 0,
            ..FlowConfig::default()
        }
        .validate()
        .is_err());
    }
}
