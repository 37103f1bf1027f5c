//! Structured parameter charts and finite-difference calculus on them.
//!
//! A [`Chart`] is a single global coordinate patch: the circle, a flat torus,
//! a latitude-staggered sphere, or a closed interval. Fields live on chart
//! nodes in lexicographic order (last axis fastest). Every derivative and
//! integral used downstream goes through [`partials`], [`derivative`] and
//! [`integrate`].
//!
//! Two pieces of per-field metadata make the stencils topology-aware:
//!
//! * **wrap shifts**: a quasi-periodic field satisfies
//!   `f(x + 2π e_a) = f(x) + P_a`; the shift `P_a` is added whenever a stencil
//!   wraps across axis `a`. Lagrangian graphs and the x-part of graph
//!   immersions use this to keep affine coordinates exact.
//! * **pole parity**: on the sphere, a component whose value changes sign when
//!   the colatitude direction is reversed is marked odd and negated when read
//!   through a pole ghost.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;

/// Colatitude radius of the sphere caps excluded from residual norms.
pub const POLAR_CAP: f64 = PI / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    CircleS1,
    TorusTm(usize),
    SphereS2,
    /// Closed interval with one-sided end stencils. Used for truncated
    /// non-compact curves such as the grim reaper.
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::CircleS1 => "circle",
            Domain::TorusTm(_) => "torus",
            Domain::SphereS2 => "sphere",
            Domain::Interval { .. } => "interval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdOrder {
    Two,
    Four,
}

impl FdOrder {
    pub fn from_int(k: i64) -> Option<Self> {
        match k {
            2 => Some(FdOrder::Two),
            4 => Some(FdOrder::Four),
            _ => None,
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            FdOrder::Two => 2,
            FdOrder::Four => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub domain: Domain,
    pub resolution: Vec<usize>,
    pub fd_order: FdOrder,
}

impl ChartSpec {
    pub fn circle(n: usize) -> Self {
        ChartSpec {
            domain: Domain::CircleS1,
            resolution: vec![n],
            fd_order: FdOrder::Two,
        }
    }

    pub fn torus(resolution: &[usize]) -> Self {
        ChartSpec {
            domain: Domain::TorusTm(resolution.len()),
            resolution: resolution.to_vec(),
            fd_order: FdOrder::Two,
        }
    }

    /// `j` colatitude rows by `k` longitude columns.
    pub fn sphere(j: usize, k: usize) -> Self {
        ChartSpec {
            domain: Domain::SphereS2,
            resolution: vec![j, k],
            fd_order: FdOrder::Two,
        }
    }

    pub fn interval(lo: f64, hi: f64, n: usize) -> Self {
        ChartSpec {
            domain: Domain::Interval { lo, hi },
            resolution: vec![n],
            fd_order: FdOrder::Two,
        }
    }

    pub fn with_order(mut self, order: FdOrder) -> Self {
        self.fd_order = order;
        self
    }

    /// Same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut s = self.clone();
        for r in &mut s.resolution {
            *r *= factor;
        }
        s
    }

    pub fn dim(&self) -> usize {
        match self.domain {
            Domain::CircleS1 | Domain::Interval { .. } => 1,
            Domain::TorusTm(m) => m,
            Domain::SphereS2 => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if let Domain::TorusTm(mm) = self.domain {
            if !(1..=3).contains(&mm) {
                return Err(Error::Config(format!("torus dimension {mm} outside 1..3")));
            }
        }
        if self.resolution.len() != m {
            return Err(Error::Config(format!(
                "{} chart needs {} resolution entries, got {}",
                self.domain.name(),
                m,
                self.resolution.len()
            )));
        }
        if let Some(&r) = self.resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
            return Err(Error::Config(format!(
                "resolution {r} below minimum {MIN_RESOLUTION}"
            )));
        }
        match self.domain {
            Domain::SphereS2 if self.resolution[1] % 2 != 0 => Err(Error::Config(format!(
                "sphere longitude count {} must be even for the pole ghost rule",
                self.resolution[1]
            ))),
            Domain::Interval { lo, hi } if !(lo.is_finite() && hi.is_finite() && hi > lo) => Err(
                Error::Config(format!("interval [{lo}, {hi}] is empty or non-finite")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    Periodic,
    /// Staggered colatitude; stencils cross the poles through ghosts.
    Colatitude,
    /// Bounded axis with one-sided stencils at the ends.
    Open,
}

#[derive(Debug)]
pub struct Chart {
    spec: ChartSpec,
    dims: Vec<usize>,
    strides: Vec<usize>,
    spacing: Vec<f64>,
    kinds: Vec<AxisKind>,
    coords: Vec<f64>,
    nodes: usize,
}

/// Builds the node set, spacings and neighbor rules for `spec`.
pub fn make_chart(spec: &ChartSpec) -> Result<Arc<Chart>> {
    spec.validate()?;
    let m = spec.dim();
    let dims = spec.resolution.clone();
    let mut strides = vec![1; m];
    for a in (0..m.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let nodes: usize = dims.iter().product();

    let (kinds, spacing, origin): (Vec<AxisKind>, Vec<f64>, Vec<f64>) = match spec.domain {
        Domain::CircleS1 | Domain::TorusTm(_) => (
            vec![AxisKind::Periodic; m],
            dims.iter().map(|&n| 2.0 * PI / n as f64).collect(),
            vec![0.0; m],
        ),
        Domain::SphereS2 => {
            let hth = PI / dims[0] as f64;
            (
                vec![AxisKind::Colatitude, AxisKind::Periodic],
                vec![hth, 2.0 * PI / dims[1] as f64],
                vec![0.5 * hth, 0.0],
            )
        }
        Domain::Interval { lo, hi } => (
            vec![AxisKind::Open],
            vec![(hi - lo) / (dims[0] - 1) as f64],
            vec![lo],
        ),
    };

    let mut coords = Vec::with_capacity(nodes * m);
    for node in 0..nodes {
        for a in 0..m {
            let i = (node / strides[a]) % dims[a];
            coords.push(origin[a] + i as f64 * spacing[a]);
        }
    }
    // Pin the last interval node to `hi` so the ends are exact.
    if let Domain::Interval { hi, .. } = spec.domain {
        coords[nodes - 1] = hi;
    }

    Ok(Arc::new(Chart {
        spec: spec.clone(),
        dims,
        strides,
        spacing,
        kinds,
        coords,
        nodes,
    }))
}

#[derive(Debug, Clone, Copy)]
struct Neighbor {
    node: usize,
    wraps: i64,
    flip: bool,
}

/// Stencil taps as (offset, weight); weights are in units of h^-1 or h^-2.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    taps: [(isize, f64); 5],
    len: usize,
}

impl Stencil {
    fn new(taps: &[(isize, f64)]) -> Self {
        let mut t = [(0, 0.0); 5];
        t[..taps.len()].copy_from_slice(taps);
        Stencil {
            taps: t,
            len: taps.len(),
        }
    }

    fn taps(&self) -> &[(isize, f64)] {
        &self.taps[..self.len]
    }

    fn first(order: FdOrder, kind: AxisKind, i: usize, n: usize) -> Self {
        if kind == AxisKind::Open {
            if i == 0 {
                return Stencil::new(&[(0, -1.5), (1, 2.0), (2, -0.5)]);
            }
            if i == n - 1 {
                return Stencil::new(&[(0, 1.5), (-1, -2.0), (-2, 0.5)]);
            }
            if order == FdOrder::Four && (i == 1 || i == n - 2) {
                return Stencil::new(&[(-1, -0.5), (1, 0.5)]);
            }
        }
        match order {
            FdOrder::Two => Stencil::new(&[(-1, -0.5), (1, 0.5)]),
            FdOrder::Four => Stencil::new(&[
                (-2, 1.0 / 12.0),
                (-1, -2.0 / 3.0),
                (1, 2.0 / 3.0),
                (2, -1.0 / 12.0),
            ]),
        }
    }

    fn second(order: FdOrder, kind: AxisKind, i: usize, n: usize) -> Self {
        if kind == AxisKind::Open {
            if i == 0 {
                return Stencil::new(&[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]);
            }
            if i == n - 1 {
                return Stencil::new(&[(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]);
            }
            if order == FdOrder::Four && (i == 1 || i == n - 2) {
                return Stencil::new(&[(-1, 1.0), (0, -2.0), (1, 1.0)]);
            }
        }
        match order {
            FdOrder::Two => Stencil::new(&[(-1, 1.0), (0, -2.0), (1, 1.0)]),
            FdOrder::Four => Stencil::new(&[
                (-2, -1.0 / 12.0),
                (-1, 4.0 / 3.0),
                (0, -2.5),
                (1, 4.0 / 3.0),
                (2, -1.0 / 12.0),
            ]),
        }
    }
}

impl Chart {
    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        self.spec.domain
    }

    pub fn fd_order(&self) -> FdOrder {
        self.spec.fd_order
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn kind(&self, axis: usize) -> AxisKind {
        self.kinds[axis]
    }

    pub fn coord(&self, node: usize) -> &[f64] {
        let m = self.dim();
        &self.coords[node * m..(node + 1) * m]
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in 0..self.dim() {
            idx[a] = (node / self.strides[a]) % self.dims[a];
        }
        idx
    }

    pub fn node_at(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Quadrature weight of a node: the coordinate cell measure, with
    /// trapezoid halving at interval ends.
    pub fn cell_weight(&self, node: usize) -> f64 {
        let mut w: f64 = self.spacing.iter().product();
        if self.kinds[0] == AxisKind::Open {
            let i = self.multi_index(node)[0];
            if i == 0 || i + 1 == self.dims[0] {
                w *= 0.5;
            }
        }
        w
    }

    /// False within `layer` nodes of an interval end.
    pub fn off_boundary(&self, node: usize, layer: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).all(|a| {
            self.kinds[a] != AxisKind::Open || (idx[a] >= layer && idx[a] + layer < self.dims[a])
        })
    }

    /// False within `layer` nodes of an interval end and inside the sphere's
    /// polar caps, where the coordinate frame degenerates.
    pub fn is_interior(&self, node: usize, layer: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim()).all(|a| match self.kinds[a] {
            AxisKind::Periodic => true,
            AxisKind::Open => idx[a] >= layer && idx[a] + layer < self.dims[a],
            AxisKind::Colatitude => {
                let th = self.coord(node)[a];
                th > POLAR_CAP && th < PI - POLAR_CAP
            }
        })
    }

    /// Width of the end layer contaminated by `depth` nested derivatives.
    pub fn boundary_layer(&self, depth: usize) -> usize {
        if self.kinds.contains(&AxisKind::Open) {
            depth
                * match self.fd_order() {
                    FdOrder::Two => 1,
                    FdOrder::Four => 2,
                }
                + 1
        } else {
            0
        }
    }

    fn same(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || self.spec == other.spec
    }

    fn neighbor(&self, node: usize, idx: &[usize; 3], axis: usize, offset: isize) -> Neighbor {
        let n = self.dims[axis] as isize;
        let stride = self.strides[axis];
        let i = idx[axis] as isize;
        let j = i + offset;
        let base = node - idx[axis] * stride;
        match self.kinds[axis] {
            AxisKind::Periodic => Neighbor {
                node: base + j.rem_euclid(n) as usize * stride,
                wraps: j.div_euclid(n) as i64,
                flip: false,
            },
            AxisKind::Open => {
                debug_assert!((0..n).contains(&j), "open-axis stencil left the interval");
                Neighbor {
                    node: base + j as usize * stride,
                    wraps: 0,
                    flip: false,
                }
            }
            AxisKind::Colatitude => {
                if (0..n).contains(&j) {
                    return Neighbor {
                        node: base + j as usize * stride,
                        wraps: 0,
                        flip: false,
                    };
                }
                // Ghost at (-θ, φ) or (2π-θ, φ) is the node at (θ, φ+π).
                let jj = if j < 0 { -1 - j } else { 2 * n - 1 - j } as usize;
                let k_axis = 1;
                let kdim = self.dims[k_axis];
                let kk = (idx[k_axis] + kdim / 2) % kdim;
                Neighbor {
                    node: jj * stride + kk * self.strides[k_axis],
                    wraps: 0,
                    flip: true,
                }
            }
        }
    }
}

/// Multi-component field sampled on chart nodes, node-major.
#[derive(Debug, Clone)]
pub struct GridField {
    chart: Arc<Chart>,
    ncomp: usize,
    values: Vec<f64>,
    /// `dim × ncomp` wrap shifts, empty when the field is periodic.
    shifts: Vec<f64>,
    /// Per-component pole parity, empty when every component is even.
    odd: Vec<bool>,
}

impl GridField {
    pub fn new(chart: Arc<Chart>, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 {
            return Err(Error::Usage("field needs at least one component".into()));
        }
        if values.len() != ncomp * chart.node_count() {
            return Err(Error::Usage(format!(
                "field has {} values, expected {} components x {} nodes",
                values.len(),
                ncomp,
                chart.node_count()
            )));
        }
        let f = GridField {
            chart,
            ncomp,
            values,
            shifts: Vec::new(),
            odd: Vec::new(),
        };
        f.check_finite("field")?;
        Ok(f)
    }

    pub fn zeros(chart: Arc<Chart>, ncomp: usize) -> Self {
        let values = vec![0.0; ncomp * chart.node_count()];
        GridField {
            chart,
            ncomp,
            values,
            shifts: Vec::new(),
            odd: Vec::new(),
        }
    }

    /// Samples `f` at every node's parameter coordinates.
    pub fn from_fn(
        chart: Arc<Chart>,
        ncomp: usize,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(ncomp * chart.node_count());
        for node in 0..chart.node_count() {
            let v = f(chart.coord(node));
            if v.len() != ncomp {
                return Err(Error::Usage(format!(
                    "sampler returned {} components, expected {ncomp}",
                    v.len()
                )));
            }
            values.extend_from_slice(&v);
        }
        GridField::new(chart, ncomp, values)
    }

    /// Internal constructor for values produced by trusted arithmetic.
    pub(crate) fn from_parts(chart: Arc<Chart>, ncomp: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), ncomp * chart.node_count());
        GridField {
            chart,
            ncomp,
            values,
            shifts: Vec::new(),
            odd: Vec::new(),
        }
    }

    /// Declares `f(x + 2π e_a) = f(x) + shifts[a * ncomp + c]`.
    pub fn with_shifts(mut self, shifts: Vec<f64>) -> Result<Self> {
        if shifts.len() != self.chart.dim() * self.ncomp {
            return Err(Error::Usage(format!(
                "expected {} wrap shifts, got {}",
                self.chart.dim() * self.ncomp,
                shifts.len()
            )));
        }
        if shifts.iter().any(|s| *s != 0.0) {
            for a in 0..self.chart.dim() {
                let nonzero = shifts[a * self.ncomp..(a + 1) * self.ncomp]
                    .iter()
                    .any(|s| *s != 0.0);
                if nonzero && self.chart.kind(a) != AxisKind::Periodic {
                    return Err(Error::Usage(format!("wrap shift on non-periodic axis {a}")));
                }
            }
            self.shifts = shifts;
        } else {
            self.shifts.clear();
        }
        Ok(self)
    }

    pub fn with_pole_parity(mut self, odd: Vec<bool>) -> Self {
        assert_eq!(
            odd.len(),
            self.ncomp,
            "parity length must equal component count"
        );
        if odd.iter().any(|&o| o) {
            self.odd = odd;
        } else {
            self.odd.clear();
        }
        self
    }

    /// Same chart and metadata, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<GridField> {
        if values.len() != self.values.len() {
            return Err(Error::Usage(format!(
                "replacement has {} values, expected {}",
                values.len(),
                self.values.len()
            )));
        }
        let f = GridField {
            values,
            ..self.clone_meta()
        };
        f.check_finite("field")?;
        Ok(f)
    }

    fn clone_meta(&self) -> GridField {
        GridField {
            chart: self.chart.clone(),
            ncomp: self.ncomp,
            values: Vec::new(),
            shifts: self.shifts.clone(),
            odd: self.odd.clone(),
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let c = self.ncomp;
        &mut self.values[node * c..(node + 1) * c]
    }

    /// Wrap shifts as `dim × ncomp`, or `None` for periodic fields.
    pub fn shifts(&self) -> Option<&[f64]> {
        (!self.shifts.is_empty()).then_some(self.shifts.as_slice())
    }

    pub fn is_odd(&self, comp: usize) -> bool {
        !self.odd.is_empty() && self.odd[comp]
    }

    pub fn parity(&self) -> Vec<bool> {
        (0..self.ncomp).map(|c| self.is_odd(c)).collect()
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                what,
                node: i / self.ncomp,
            }),
            None => Ok(()),
        }
    }

    /// Single component as a scalar field, keeping its metadata.
    pub fn component(&self, c: usize) -> GridField {
        let values = self
            .values
            .iter()
            .skip(c)
            .step_by(self.ncomp)
            .copied()
            .collect();
        let mut f = GridField::from_parts(self.chart.clone(), 1, values);
        if let Some(s) = self.shifts() {
            f.shifts = (0..self.chart.dim())
                .map(|a| s[a * self.ncomp + c])
                .collect();
            if f.shifts.iter().all(|s| *s == 0.0) {
                f.shifts.clear();
            }
        }
        if self.is_odd(c) {
            f.odd = vec![true];
        }
        f
    }

    /// Cyclic shift of node indices along a periodic axis:
    /// `out[i] = self[i - by]`. Wrap shifts are applied to keep a
    /// quasi-periodic field consistent.
    pub fn cyclic_shift(&self, axis: usize, by: isize) -> Result<GridField> {
        if self.chart.kind(axis) != AxisKind::Periodic {
            return Err(Error::Usage(format!("axis {axis} is not periodic")));
        }
        let chart = &self.chart;
        let mut out = self.clone();
        for node in 0..chart.node_count() {
            let idx = chart.multi_index(node);
            let nb = chart.neighbor(node, &idx, axis, -by);
            for c in 0..self.ncomp {
                let mut v = self.values[nb.node * self.ncomp + c];
                if nb.wraps != 0 && !self.shifts.is_empty() {
                    v += nb.wraps as f64 * self.shifts[axis * self.ncomp + c];
                }
                out.values[node * self.ncomp + c] = v;
            }
        }
        Ok(out)
    }

    fn sample(&self, nb: Neighbor, axis: usize, c: usize) -> f64 {
        let mut v = self.values[nb.node * self.ncomp + c];
        if nb.wraps != 0 && !self.shifts.is_empty() {
            v += nb.wraps as f64 * self.shifts[axis * self.ncomp + c];
        }
        if nb.flip && self.is_odd(c) {
            v = -v;
        }
        v
    }

    /// Metadata of the result of differentiating `times` times along `axis`.
    fn derived(&self, axis: usize, times: usize, values: Vec<f64>) -> GridField {
        let mut f = GridField::from_parts(self.chart.clone(), self.ncomp, values);
        let flips = self.chart.kind(axis) == AxisKind::Colatitude && times % 2 == 1;
        let odd: Vec<bool> = (0..self.ncomp).map(|c| self.is_odd(c) ^ flips).collect();
        f = f.with_pole_parity(odd);
        f
    }
}

/// Worker threads for per-node loops; 1 keeps everything on the caller.
static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Below this many nodes the stencil loop stays sequential.
const PARALLEL_MIN_NODES: usize = 4096;

/// Caps the per-node worker count. Node results never depend on the
/// partition, so output is identical for every setting.
pub fn set_threads(k: usize) {
    let k = k.max(1);
    if k > 1 {
        // A global pool can only be built once; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    THREADS.store(k, Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

fn apply_stencil(field: &GridField, axis: usize, second: bool) -> GridField {
    let chart = &field.chart;
    let nc = field.ncomp;
    let h = chart.spacing[axis];
    let scale = if second { 1.0 / (h * h) } else { 1.0 / h };
    let n_axis = chart.dims[axis];
    let kind = chart.kinds[axis];
    let order = chart.fd_order();
    let node_into = |node: usize, out: &mut [f64]| {
        let idx = chart.multi_index(node);
        let st = if second {
            Stencil::second(order, kind, idx[axis], n_axis)
        } else {
            Stencil::first(order, kind, idx[axis], n_axis)
        };
        out.iter_mut().for_each(|a| *a = 0.0);
        for &(off, w) in st.taps() {
            let nb = chart.neighbor(node, &idx, axis, off);
            for (c, a) in out.iter_mut().enumerate() {
                *a += w * field.sample(nb, axis, c);
            }
        }
        out.iter_mut().for_each(|a| *a *= scale);
    };
    let mut out = vec![0.0; field.values.len()];
    if threads() > 1 && chart.node_count() >= PARALLEL_MIN_NODES {
        out.par_chunks_mut(nc)
            .enumerate()
            .for_each(|(node, o)| node_into(node, o));
    } else {
        out.chunks_mut(nc)
            .enumerate()
            .for_each(|(node, o)| node_into(node, o));
    }
    field.derived(axis, if second { 2 } else { 1 }, out)
}

/// First partial derivative along `axis`.
pub fn derivative(field: &GridField, axis: usize) -> GridField {
    apply_stencil(field, axis, false)
}

/// Compact second derivative along `axis`.
pub fn second_derivative(field: &GridField, axis: usize) -> GridField {
    apply_stencil(field, axis, true)
}

pub fn first_partials(field: &GridField) -> Vec<GridField> {
    (0..field.chart.dim())
        .map(|a| derivative(field, a))
        .collect()
}

/// First and second partials of a field.
#[derive(Debug, Clone)]
pub struct Partials {
    pub first: Vec<GridField>,
    /// Upper triangle `(a, b)` with `a <= b`, row-major.
    second: Vec<GridField>,
    dim: usize,
}

impl Partials {
    pub fn second(&self, a: usize, b: usize) -> &GridField {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        &self.second[pair_index(self.dim, a, b)]
    }
}

fn pair_index(m: usize, a: usize, b: usize) -> usize {
    a * m - a * (a + 1) / 2 + b
}

/// First partials on every axis plus second partials on every axis pair.
/// Diagonal seconds use the compact stencil; mixed ones apply two first
/// derivative stencils in sequence and are stored once for both orders.
pub fn partials(field: &GridField) -> Result<Partials> {
    field.check_finite("partials input")?;
    let m = field.chart.dim();
    let first = first_partials(field);
    let mut second = Vec::with_capacity(m * (m + 1) / 2);
    for a in 0..m {
        for b in a..m {
            second.push(if a == b {
                second_derivative(field, a)
            } else {
                derivative(&first[a], b)
            });
        }
    }
    Ok(Partials {
        first,
        second,
        dim: m,
    })
}

/// `Σ scalar · density · cell` in lexicographic node order.
pub fn integrate(scalar: &GridField, density: &GridField) -> Result<f64> {
    if !scalar.chart.same(&density.chart) {
        return Err(Error::Usage(
            "integrate: scalar and density live on different charts".into(),
        ));
    }
    if scalar.ncomp != 1 || density.ncomp != 1 {
        return Err(Error::Usage(
            "integrate: expects single-component fields".into(),
        ));
    }
    Ok(integrate_slices(
        &scalar.chart,
        &scalar.values,
        &density.values,
    ))
}

pub(crate) fn integrate_slices(chart: &Chart, scalar: &[f64], density: &[f64]) -> f64 {
    let mut total = 0.0;
    for node in 0..chart.node_count() {
        total += scalar[node] * density[node] * chart.cell_weight(node);
    }
    total
}
