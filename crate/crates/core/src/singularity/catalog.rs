//! Closed-form example immersions and the invariants they are known to have.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{graph_immersion, Immersion};
use crate::grid::{make_chart, ChartSpec, FdOrder, GridField};

pub const EXAMPLE_NAMES: [&str; 9] = [
    "circle",
    "sphere",
    "clifford",
    "grim_reaper",
    "whitney",
    "ellipse",
    "cardioid",
    "product_torus",
    "flat_graph",
];

/// Named numeric parameters plus an optional grid override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub values: BTreeMap<String, f64>,
    pub resolution: Option<Vec<usize>>,
    pub fd_order: Option<FdOrder>,
}

impl ExampleParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn with_resolution(mut self, resolution: &[usize]) -> Self {
        self.resolution = Some(resolution.to_vec());
        self
    }

    pub fn with_order(mut self, order: FdOrder) -> Self {
        self.fd_order = Some(order);
        self
    }
}

/// Parameter lookup that remembers which keys were consumed, so leftovers
/// can be reported as unknown.
struct Reader<'a> {
    name: &'a str,
    p: &'a ExampleParams,
    used: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.used.push(key);
        self.p.values.get(key).copied().unwrap_or(default)
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.bad(key, v, "must be positive"));
        }
        Ok(v)
    }

    fn count(&mut self, key: &'static str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v.fract() != 0.0 || v < lo as f64 || v > hi as f64 {
            return Err(self.bad(key, v, &format!("must be an integer in {lo}..={hi}")));
        }
        Ok(v as usize)
    }

    fn bad(&self, key: &str, v: f64, why: &str) -> Error {
        Error::Config(format!(
            "example '{}': parameter {key} = {v} {why}",
            self.name
        ))
    }

    fn finish(&self) -> Result<()> {
        if let Some(k) = self
            .p
            .values
            .keys()
            .find(|k| !self.used.contains(&k.as_str()))
        {
            return Err(Error::Config(format!(
                "example '{}': unknown parameter '{k}'",
                self.name
            )));
        }
        Ok(())
    }

    fn chart(&self, default: ChartSpec) -> Result<ChartSpec> {
        let mut spec = default;
        if let Some(res) = &self.p.resolution {
            if res.len() != spec.resolution.len() {
                return Err(Error::Config(format!(
                    "example '{}' needs {} resolution entries, got {}",
                    self.name,
                    spec.resolution.len(),
                    res.len()
                )));
            }
            spec.resolution = res.clone();
        }
        if let Some(o) = self.p.fd_order {
            spec.fd_order = o;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Continuum facts about an example, used as test oracles.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Expected {
    /// Exact singular time of the round families.
    pub extinction_time: Option<f64>,
    /// max|F₀|²/(2m) for closed examples.
    pub extinction_bound: Option<f64>,
    pub shrinker: bool,
    pub translator: Option<Vec<f64>>,
    pub stationary: bool,
    pub lagrangian: bool,
    /// Constant |A|² and |H|² where they are constant.
    pub norm_a2: Option<f64>,
    pub norm_h2: Option<f64>,
    /// |A|²/|H|² where it is constant.
    pub pinching_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub imm: Immersion,
    pub expected: Expected,
}

fn pad(mut v: Vec<f64>, n: usize) -> Vec<f64> {
    v.resize(n, 0.0);
    v
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

pub fn make_example(name: &str, params: &ExampleParams) -> Result<Immersion> {
    Ok(example(name, params)?.imm)
}

/// Builds a catalog member together with its expected invariants.
pub fn example(name: &str, params: &ExampleParams) -> Result<Example> {
    let mut r = Reader {
        name,
        p: params,
        used: Vec::new(),
    };
    let (imm, expected) = match name {
        "circle" => {
            let rad = r.positive("radius", 1.0)?;
            let n = r.count("n", 2, 2, 8)?;
            let chart = make_chart(&r.chart(ChartSpec::circle(256))?)?;
            let imm = Immersion::from_fn(chart, n, |x| {
                pad(vec![rad * x[0].cos(), rad * x[0].sin()], n)
            })?;
            let k = 1.0 / (rad * rad);
            let t = rad * rad / 2.0;
            let e = Expected {
                extinction_time: Some(t),
                extinction_bound: Some(t),
                shrinker: close(rad, 1.0),
                norm_a2: Some(k),
                norm_h2: Some(k),
                pinching_ratio: Some(1.0),
                ..Expected::default()
            };
            (imm, e)
        }
        "sphere" => {
            let rad = r.positive("radius", 1.0)?;
            let m = r.count("m", 2, 1, 2)?;
            let n = r.count("n", m + 1, m + 1, 8)?;
            let imm = if m == 1 {
                let chart = make_chart(&r.chart(ChartSpec::circle(256))?)?;
                Immersion::from_fn(chart, n, |x| {
                    pad(vec![rad * x[0].cos(), rad * x[0].sin()], n)
                })?
            } else {
                let chart = make_chart(&r.chart(ChartSpec::sphere(48, 96))?)?;
                Immersion::from_fn(chart, n, |x| {
                    let (st, ct) = x[0].sin_cos();
                    let (sp, cp) = x[1].sin_cos();
                    pad(vec![rad * st * cp, rad * st * sp, rad * ct], n)
                })?
            };
            let mf = m as f64;
            let t = rad * rad / (2.0 * mf);
            let e = Expected {
                extinction_time: Some(t),
                extinction_bound: Some(t),
                shrinker: close(rad * rad, mf),
                norm_a2: Some(mf / (rad * rad)),
                norm_h2: Some(mf * mf / (rad * rad)),
                pinching_ratio: Some(1.0 / mf),
                ..Expected::default()
            };
            (imm, e)
        }
        "clifford" => {
            let rad = r.positive("radius", 1.0)?;
            let chart = make_chart(&r.chart(ChartSpec::torus(&[64, 64]))?)?;
            let imm = Immersion::from_fn(chart, 4, |x| {
                vec![
                    rad * x[0].cos(),
                    rad * x[0].sin(),
                    rad * x[1].cos(),
                    rad * x[1].sin(),
                ]
            })?;
            let k = 2.0 / (rad * rad);
            let t = rad * rad / 2.0;
            let e = Expected {
                extinction_time: Some(t),
                extinction_bound: Some(t),
                shrinker: close(rad, 1.0),
                norm_a2: Some(k),
                norm_h2: Some(k),
                pinching_ratio: Some(1.0),
                ..Expected::default()
            };
            (imm, e)
        }
        "grim_reaper" => {
            let delta = r.positive("delta", 0.05)?;
            if delta >= FRAC_PI_2 {
                return Err(r.bad("delta", delta, "must be below π/2"));
            }
            let lo = -FRAC_PI_2 + delta;
            let chart = make_chart(&r.chart(ChartSpec::interval(lo, -lo, 512))?)?;
            let imm = Immersion::from_fn(chart, 2, |x| vec![x[0], -x[0].cos().ln()])?;
            (
                imm,
                Expected {
                    translator: Some(vec![0.0, 1.0]),
                    ..Expected::default()
                },
            )
        }
        "whitney" => {
            let rad = r.positive("radius", 1.0)?;
            let m = r.count("m", 2, 1, 2)?;
            // z_j = r(1 + i s) x_j / (1 + s²) with s = x^{m+1}; stored as
            // (Re z, Im z).
            let imm = if m == 1 {
                let chart = make_chart(&r.chart(ChartSpec::circle(256))?)?;
                Immersion::from_fn(chart, 2, |x| {
                    let (s, c) = x[0].sin_cos();
                    let w = rad * c / (1.0 + s * s);
                    vec![w, w * s]
                })?
            } else {
                let chart = make_chart(&r.chart(ChartSpec::sphere(48, 96))?)?;
                Immersion::from_fn(chart, 4, |x| {
                    let (st, ct) = x[0].sin_cos();
                    let (sp, cp) = x[1].sin_cos();
                    let w = rad / (1.0 + ct * ct);
                    let (x1, x2) = (st * cp, st * sp);
                    vec![w * x1, w * x2, w * ct * x1, w * ct * x2]
                })?
            };
            let mf = m as f64;
            let e = Expected {
                extinction_bound: Some(rad * rad / (2.0 * mf)),
                lagrangian: true,
                pinching_ratio: Some(3.0 / (mf + 2.0)),
                ..Expected::default()
            };
            (imm, e)
        }
        "ellipse" => {
            let a = r.positive("a", 2.0)?;
            let b = r.positive("b", 1.0)?;
            let chart = make_chart(&r.chart(ChartSpec::circle(256))?)?;
            let imm = Immersion::from_fn(chart, 2, |x| vec![a * x[0].cos(), b * x[0].sin()])?;
            (
                imm,
                Expected {
                    extinction_bound: Some(a.max(b).powi(2) / 2.0),
                    ..Expected::default()
                },
            )
        }
        "cardioid" => {
            // The cardioid r = 1 + cos φ itself has a cusp at φ = π and is
            // not an immersion; r = a + cos φ with a < 1 is the looped
            // limaçon whose inner loop collapses into that cusp.
            let a = r.positive("a", 0.5)?;
            if a >= 1.0 {
                return Err(r.bad("a", a, "must be below 1 (a = 1 is the cusp itself)"));
            }
            let chart = make_chart(&r.chart(ChartSpec::circle(512))?)?;
            let imm = Immersion::from_fn(chart, 2, |x| {
                let rho = a + x[0].cos();
                vec![rho * x[0].cos(), rho * x[0].sin()]
            })?;
            (
                imm,
                Expected {
                    extinction_bound: Some((1.0 + a).powi(2) / 2.0),
                    ..Expected::default()
                },
            )
        }
        "product_torus" => {
            let m = r.count("m", 2, 1, 3)?;
            let k = r.count("k", 1, 1, 4)?;
            let chart = make_chart(&r.chart(ChartSpec::torus(&vec![64; m]))?)?;
            let imm = graph_immersion(&GridField::zeros(chart, k))?;
            let mf = m as f64;
            let e = Expected {
                extinction_time: Some(0.5),
                extinction_bound: Some(0.5),
                shrinker: true,
                norm_a2: Some(mf),
                norm_h2: Some(mf),
                pinching_ratio: Some(1.0),
                ..Expected::default()
            };
            (imm, e)
        }
        "flat_graph" => {
            // F(x) = (x, c, …, c): a flat plane, quasi-periodic over the torus.
            let m = r.count("m", 2, 1, 3)?;
            let k = r.count("k", 1, 1, 4)?;
            let c = r.get("height", 0.0);
            let chart = make_chart(&r.chart(ChartSpec::torus(&vec![32; m]))?)?;
            let n = m + k;
            let pos = GridField::from_fn(chart, n, |x| {
                let mut v = x.to_vec();
                v.resize(n, c);
                v
            })?;
            let mut shifts = vec![0.0; m * n];
            for a in 0..m {
                shifts[a * n + a] = 2.0 * PI;
            }
            let imm = Immersion::new(pos.with_shifts(shifts)?)?;
            let e = Expected {
                stationary: true,
                lagrangian: k == m,
                norm_a2: Some(0.0),
                norm_h2: Some(0.0),
                ..Expected::default()
            };
            (imm, e)
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown example '{name}' (known: {})",
                EXAMPLE_NAMES.join(", ")
            )))
        }
    };
    r.finish()?;
    Ok(Example {
        name: name.to_string(),
        imm,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryBundle;

    fn bundle(name: &str, p: ExampleParams) -> (Example, GeometryBundle) {
        let e = example(name, &p).unwrap();
        let b = GeometryBundle::new(&e.imm).unwrap();
        (e, b)
    }

    #[test]
    fn every_example_builds_with_defaults() {
        for name in EXAMPLE_NAMES {
            let e = example(name, &ExampleParams::new()).unwrap();
            GeometryBundle::new(&e.imm).unwrap();
            if let Some(bound) = e.expected.extinction_bound {
                // Staggered sphere rows miss the Whitney equator by h/2.
                let m = e.imm.m() as f64;
                assert!(
                    (e.imm.max_norm2() / (2.0 * m) - bound).abs() < 5e-3 * bound,
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn constant_curvature_examples_match() {
        let cases = [
            ("circle", ExampleParams::new().with("radius", 2.0)),
            ("sphere", ExampleParams::new()),
            ("clifford", ExampleParams::new()),
            (
                "product_torus",
                ExampleParams::new()
                    .with("m", 1.0)
                    .with_order(FdOrder::Four),
            ),
            ("flat_graph", ExampleParams::new()),
        ];
        for (name, p) in cases {
            let (e, b) = bundle(name, p);
            let a2 = e.expected.norm_a2.unwrap();
            let h2 = e.expected.norm_h2.unwrap();
            for node in (0..b.node_count()).filter(|&i| b.chart().is_interior(i, 0)) {
                assert!(
                    (b.norm_a2(node) - a2).abs() < 2e-2 * a2.max(1.0),
                    "{name} |A|²"
                );
                assert!(
                    (b.norm_h2(node) - h2).abs() < 2e-2 * h2.max(1.0),
                    "{name} |H|²"
                );
            }
        }
    }

    #[test]
    fn whitney_curve_pinching_is_trivial() {
        let (e, b) = bundle("whitney", ExampleParams::new().with("m", 1.0));
        assert_eq!(e.expected.pinching_ratio, Some(1.0));
        for node in 0..b.node_count() {
            assert!((b.norm_a2(node) - b.norm_h2(node)).abs() < 1e-10 * b.norm_a2(node).max(1.0));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            example("torus", &ExampleParams::new()),
            Err(Error::Config(_))
        ));
        assert!(example("circle", &ExampleParams::new().with("radius", -1.0)).is_err());
        assert!(example("circle", &ExampleParams::new().with("radus", 1.0)).is_err());
        assert!(example("cardioid", &ExampleParams::new().with("a", 1.0)).is_err());
        assert!(example("sphere", &ExampleParams::new().with("m", 1.5)).is_err());
        assert!(example("sphere", &ExampleParams::new().with_resolution(&[4, 8])).is_err());
        assert!(example("sphere", &ExampleParams::new().with_resolution(&[48])).is_err());
    }

    #[test]
    fn shrinker_flag_tracks_radius() {
        let s = |r: f64| {
            example("sphere", &ExampleParams::new().with("radius", r))
                .unwrap()
                .expected
                .shrinker
        };
        assert!(s(2f64.sqrt()));
        assert!(!s(1.0));
    }
}
