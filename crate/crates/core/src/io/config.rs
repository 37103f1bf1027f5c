//! Scenario files: flat dotted `key = value` lines, `#` comments, arrays as
//! comma-separated values. Parsing reports every problem it finds, each with
//! its line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Integrator};
use crate::geometry::Immersion;
use crate::grid::{make_chart, ChartSpec, FdOrder, MIN_RESOLUTION};
use crate::lagrangian::{lag_immersion, Potential};
use crate::singularity::{example, DensityParams, ExampleParams, SolitonKind, EXAMPLE_NAMES};

use super::{read_snapshot, read_text};

/// amplitude · sin(k·x + phase), k integral so the term is periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub k: Vec<f64>,
    pub phase: f64,
}

/// u = ½xᵀSx + Σ terms on the torus T^m.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub s: Vec<f64>,
    pub terms: Vec<FourierTerm>,
    pub resolution: Vec<usize>,
    pub fd_order: FdOrder,
}

impl PotentialSpec {
    pub fn m(&self) -> usize {
        self.resolution.len()
    }

    pub fn build(&self) -> Result<Potential> {
        let chart = make_chart(&ChartSpec::torus(&self.resolution).with_order(self.fd_order))?;
        Potential::from_fn(chart, self.s.clone(), |x| {
            self.terms
                .iter()
                .map(|w| {
                    w.amplitude
                        * (w.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + w.phase).sin()
                })
                .sum()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSource {
    Catalog { name: String, params: ExampleParams },
    Potential(PotentialSpec),
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleMode {
    Type1,
    Type2,
}

impl FromStr for RescaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" => Ok(RescaleMode::Type1),
            "type2" => Ok(RescaleMode::Type2),
            _ => Err(Error::Usage(format!(
                "rescale mode '{s}' is not type1 or type2"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    Monotonicity(DensityParams),
    Soliton(SolitonKind),
    /// Type I uses centre `q` (origin when absent); Type II uses `k`.
    Rescale {
        mode: RescaleMode,
        k: usize,
        q: Option<Vec<f64>>,
    },
    Classify,
    LagrangianReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: InitialSource,
    pub flow: FlowConfig,
    pub analyses: Vec<Analysis>,
    pub output: OutputSpec,
    /// Sorted `key=value` lines of everything except `output.*`.
    pub canonical: String,
}

impl Scenario {
    /// The initial immersion and its time (non-zero only for snapshots).
    pub fn initial_immersion(&self) -> Result<(Immersion, f64)> {
        match &self.initial {
            InitialSource::Catalog { name, params } => Ok((example(name, params)?.imm, 0.0)),
            InitialSource::Potential(p) => Ok((lag_immersion(&p.build()?)?, 0.0)),
            InitialSource::Snapshot(path) => read_snapshot(path),
        }
    }

    pub fn hash(&self) -> String {
        super::scenario_hash(&self.canonical)
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
    errors: Vec<(usize, String)>,
}

/// Value types the table understands.
trait Value: Sized {
    const WHAT: &'static str;
    fn parse_value(s: &str) -> Option<Self>;
}

impl Value for f64 {
    const WHAT: &'static str = "a number";
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok().filter(|v: &f64| !v.is_nan())
    }
}

impl Value for usize {
    const WHAT: &'static str = "a nonnegative integer";
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Value for bool {
    const WHAT: &'static str = "true or false";
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Value for String {
    const WHAT: &'static str = "a string";
    fn parse_value(s: &str) -> Option<Self> {
        (!s.is_empty()).then(|| s.to_string())
    }
}

impl<T: Value> Value for Vec<T> {
    const WHAT: &'static str = "a comma-separated list";
    fn parse_value(s: &str) -> Option<Self> {
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
}

impl Fields {
    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn error(&mut self, key: &str, msg: impl Into<String>) {
        let line = self.line(key);
        self.errors.push((line, format!("{key}: {}", msg.into())));
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get<T: Value>(&mut self, key: &str) -> Option<T> {
        let e = self.entries.get_mut(key)?;
        e.used = true;
        let (line, raw) = (e.line, e.value.clone());
        let v = T::parse_value(&raw);
        if v.is_none() {
            self.errors
                .push((line, format!("{key}: expected {}, got '{raw}'", T::WHAT)));
        }
        v
    }

    fn get_or<T: Value>(&mut self, key: &str, default: T) -> T {
        self.get(key).unwrap_or(default)
    }

    /// A number that must satisfy `ok`, else `why` is reported.
    fn checked(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, why: &str) -> f64 {
        match self.get::<f64>(key) {
            Some(v) if ok(v) => v,
            Some(v) => {
                self.error(key, format!("{v} {why}"));
                default
            }
            None => default,
        }
    }
}

fn tokenize(text: &str) -> Fields {
    let mut fields = Fields {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            fields
                .errors
                .push((line, format!("expected 'key = value', got '{body}'")));
            continue;
        };
        let key = k.trim().to_string();
        if key.is_empty() || key.contains(char::is_whitespace) {
            fields
                .errors
                .push((line, format!("malformed key '{}'", k.trim())));
            continue;
        }
        if let Some(prev) = fields.entries.get(&key) {
            let first = prev.line;
            fields.errors.push((
                line,
                format!("{key}: duplicate key (first set on line {first})"),
            ));
            continue;
        }
        fields.entries.insert(
            key,
            Entry {
                line,
                value: v.trim().to_string(),
                used: false,
            },
        );
    }
    fields
}

const POSITIVE: fn(f64) -> bool = |v| v > 0.0 && v.is_finite();

fn parse_flow(f: &mut Fields) -> FlowConfig {
    let d = FlowConfig::default();
    let integrator = match f.get::<String>("flow.integrator").as_deref() {
        None | Some("explicit") => Integrator::ExplicitEuler,
        Some("semi_implicit") => Integrator::SemiImplicit,
        Some(other) => {
            f.error(
                "flow.integrator",
                format!("'{other}' is not explicit or semi_implicit"),
            );
            Integrator::ExplicitEuler
        }
    };
    let cfl_sigma = f.checked(
        "flow.cfl_sigma",
        d.cfl_sigma,
        |v| v > 0.0 && v <= 1.0,
        "outside (0, 1]",
    );
    let curvature_cap_rho = f.checked(
        "flow.curvature_cap_rho",
        d.curvature_cap_rho,
        POSITIVE,
        "must be positive",
    );
    let stop_max_a2 = f.checked(
        "flow.stop_max_A2",
        d.stop_max_a2,
        POSITIVE,
        "must be positive",
    );
    let stop_t_max = f.checked(
        "flow.stop_t_max",
        d.stop_t_max,
        |v| v > 0.0,
        "must be positive",
    );
    let stop_dt_min = f.checked(
        "flow.stop_dt_min",
        d.stop_dt_min,
        POSITIVE,
        "must be positive",
    );
    let record_every = f.get_or("output.record_every", d.record_every);
    if record_every == 0 {
        f.error("output.record_every", "must be at least 1");
    }
    let snapshot_every = f.get_or("output.snapshot_every", d.snapshot_every);
    let monitor = match (
        f.get::<Vec<f64>>("flow.monitor.q"),
        f.get::<f64>("flow.monitor.t0"),
    ) {
        (Some(q), Some(t0)) => Some(DensityParams { q, t0 }),
        (None, None) => None,
        _ => {
            let key = if f.has("flow.monitor.q") {
                "flow.monitor.q"
            } else {
                "flow.monitor.t0"
            };
            f.error(key, "flow.monitor needs both q and t0");
            None
        }
    };
    FlowConfig {
        integrator,
        cfl_sigma,
        curvature_cap_rho,
        stop_max_a2,
        stop_t_max,
        stop_dt_min,
        record_every: record_every.max(1),
        snapshot_every,
        monitor,
    }
}

fn parse_grid(f: &mut Fields) -> (Option<Vec<usize>>, Option<FdOrder>) {
    let resolution = f.get::<Vec<usize>>("grid.resolution");
    if let Some(r) = resolution
        .as_ref()
        .and_then(|r| r.iter().find(|&&r| r < MIN_RESOLUTION))
    {
        f.error(
            "grid.resolution",
            format!("resolution below minimum {MIN_RESOLUTION} (got {r})"),
        );
    }
    let order = f.get::<usize>("grid.fd_order").and_then(|k| {
        let o = FdOrder::from_int(k as i64);
        if o.is_none() {
            f.error("grid.fd_order", format!("{k} is not 2 or 4"));
        }
        o
    });
    (resolution, order)
}

fn parse_potential(
    f: &mut Fields,
    resolution: Option<Vec<usize>>,
    order: Option<FdOrder>,
) -> Option<PotentialSpec> {
    let m = f.get_or::<usize>("initial.potential.m", 2);
    if !(1..=3).contains(&m) {
        f.error("initial.potential.m", format!("{m} outside 1..3"));
        return None;
    }
    let s = f.get_or("initial.potential.s", vec![0.0; m * m]);
    let mut ok = true;
    if s.len() != m * m {
        f.error(
            "initial.potential.s",
            format!("needs {} entries for m = {m}, got {}", m * m, s.len()),
        );
        ok = false;
    } else if (0..m).any(|i| (0..m).any(|j| s[i * m + j] != s[j * m + i])) {
        f.error("initial.potential.s", "must be symmetric");
        ok = false;
    }
    let flat = f.get_or::<Vec<f64>>("initial.potential.terms", Vec::new());
    let mut terms = Vec::new();
    if flat.len() % (m + 2) != 0 {
        f.error(
            "initial.potential.terms",
            format!(
                "length {} is not a multiple of m + 2 = {}",
                flat.len(),
                m + 2
            ),
        );
        ok = false;
    } else {
        for t in flat.chunks(m + 2) {
            let k = t[1..=m].to_vec();
            if k.iter().any(|k| k.fract() != 0.0) {
                f.error("initial.potential.terms", "wave vectors must be integral");
                ok = false;
            }
            terms.push(FourierTerm {
                amplitude: t[0],
                k,
                phase: t[m + 1],
            });
        }
    }
    let resolution = resolution.unwrap_or_else(|| vec![64; m]);
    if resolution.len() != m {
        f.error(
            "grid.resolution",
            format!(
                "potential on T^{m} needs {m} entries, got {}",
                resolution.len()
            ),
        );
        ok = false;
    }
    ok.then(|| PotentialSpec {
        s,
        terms,
        resolution,
        fd_order: order.unwrap_or(FdOrder::Two),
    })
}

fn parse_initial(f: &mut Fields, base: &Path) -> Option<InitialSource> {
    let before = f.errors.len();
    let (resolution, order) = parse_grid(f);
    let grid_ok = f.errors.len() == before;
    let sources: Vec<&str> = ["initial.catalog", "initial.snapshot"]
        .into_iter()
        .filter(|k| f.has(k))
        .chain(
            f.entries
                .keys()
                .any(|k| k.starts_with("initial.potential."))
                .then_some("initial.potential"),
        )
        .collect();
    match sources.as_slice() {
        [] => {
            f.errors.push((
                0,
                "no initial source (set initial.catalog, initial.potential.* or initial.snapshot)"
                    .into(),
            ));
            None
        }
        ["initial.catalog"] => {
            let name: String = f.get("initial.catalog")?;
            if !EXAMPLE_NAMES.contains(&name.as_str()) {
                f.error(
                    "initial.catalog",
                    format!(
                        "unknown example '{name}' (one of {})",
                        EXAMPLE_NAMES.join(", ")
                    ),
                );
                return None;
            }
            let mut params = ExampleParams {
                resolution,
                fd_order: order,
                ..ExampleParams::default()
            };
            let keys: Vec<String> = f
                .entries
                .keys()
                .filter(|k| k.starts_with("initial.") && *k != "initial.catalog")
                .cloned()
                .collect();
            for key in keys {
                if let Some(v) = f.get::<f64>(&key) {
                    params.values.insert(key["initial.".len()..].to_string(), v);
                }
            }
            if !grid_ok {
                return None;
            }
            if let Err(e) = example(&name, &params) {
                f.error("initial.catalog", strip_kind(&e));
                return None;
            }
            Some(InitialSource::Catalog { name, params })
        }
        ["initial.snapshot"] => {
            let p: String = f.get("initial.snapshot")?;
            Some(InitialSource::Snapshot(base.join(p)))
        }
        ["initial.potential"] => {
            parse_potential(f, resolution, order).map(InitialSource::Potential)
        }
        _ => {
            f.errors.push((
                f.line(sources[1]),
                format!("more than one initial source: {}", sources.join(", ")),
            ));
            None
        }
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Usage(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Ambient dimension when it is known without reading files.
fn ambient_dim(initial: &InitialSource) -> Option<usize> {
    match initial {
        InitialSource::Catalog { name, params } => example(name, params).ok().map(|e| e.imm.n()),
        InitialSource::Potential(p) => Some(2 * p.m()),
        InitialSource::Snapshot(_) => None,
    }
}

fn parse_analyses(
    f: &mut Fields,
    initial: Option<&InitialSource>,
    flow: &FlowConfig,
) -> Vec<Analysis> {
    let n = initial.and_then(ambient_dim);
    let mut out = Vec::new();
    let snapshots = flow.snapshot_every > 0;
    if f.has("analysis.monotonicity.q") || f.has("analysis.monotonicity.t0") {
        let q = f.get::<Vec<f64>>("analysis.monotonicity.q");
        let t0 = f.get::<f64>("analysis.monotonicity.t0");
        match (q, t0) {
            (Some(q), Some(t0)) => {
                if n.is_some_and(|n| n != q.len()) {
                    f.error(
                        "analysis.monotonicity.q",
                        format!(
                            "has {} components, ambient dimension is {}",
                            q.len(),
                            n.unwrap_or(0)
                        ),
                    );
                } else if !snapshots {
                    f.error(
                        "analysis.monotonicity.q",
                        "monotonicity needs output.snapshot_every > 0",
                    );
                } else {
                    out.push(Analysis::Monotonicity(DensityParams { q, t0 }));
                }
            }
            (None, None) => {}
            _ => {
                let key = if f.has("analysis.monotonicity.q") {
                    "analysis.monotonicity.q"
                } else {
                    "analysis.monotonicity.t0"
                };
                f.error(key, "monotonicity needs both q and t0");
            }
        }
    }
    if let Some(kind) = f.get::<String>("analysis.soliton.kind") {
        let v = f.get::<Vec<f64>>("analysis.soliton.V");
        match SolitonKind::parse(&kind, v) {
            Ok(k) => out.push(Analysis::Soliton(k)),
            Err(e) => f.error("analysis.soliton.kind", strip_kind(&e)),
        }
    } else if f.has("analysis.soliton.V") {
        f.get::<Vec<f64>>("analysis.soliton.V");
        f.error("analysis.soliton.V", "set analysis.soliton.kind as well");
    }
    if let Some(mode) = f.get::<String>("analysis.rescale") {
        let k = f.get_or::<usize>("analysis.rescale.k", 1);
        let q = f.get::<Vec<f64>>("analysis.rescale.q");
        match mode.parse::<RescaleMode>() {
            Err(e) => f.error("analysis.rescale", strip_kind(&e)),
            Ok(_) if !snapshots => f.error(
                "analysis.rescale",
                "rescaling needs output.snapshot_every > 0",
            ),
            Ok(RescaleMode::Type2) if k == 0 => f.error("analysis.rescale.k", "must be at least 1"),
            Ok(mode) => out.push(Analysis::Rescale { mode, k, q }),
        }
    }
    if f.get_or("analysis.classify", false) {
        out.push(Analysis::Classify);
    }
    if f.get_or("analysis.lagrangian_report", false) {
        if n.is_some_and(|n| n % 2 != 0) {
            f.error(
                "analysis.lagrangian_report",
                format!("needs an even ambient dimension, got {}", n.unwrap_or(0)),
            );
        } else {
            out.push(Analysis::LagrangianReport);
        }
    }
    out
}

/// Parses scenario text. Relative paths are taken relative to `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Scenario> {
    let mut f = tokenize(text);
    let canonical: String = f
        .entries
        .iter()
        .filter(|(k, _)| !k.starts_with("output."))
        .map(|(k, e)| format!("{k}={}\n", e.value))
        .collect();
    let name = f.get_or("name", "scenario".to_string());
    let flow = parse_flow(&mut f);
    let initial = parse_initial(&mut f, base);
    let analyses = parse_analyses(&mut f, initial.as_ref(), &flow);
    let dir = base.join(f.get_or("output.dir", "out".to_string()));
    let checkpoint_every = f.get_or("output.checkpoint_every", 0usize);
    let unknown: Vec<(usize, String)> = f
        .entries
        .iter()
        .filter(|(_, e)| !e.used)
        .map(|(k, e)| (e.line, format!("{k}: unknown key")))
        .collect();
    f.errors.extend(unknown);
    if let Err(e) = flow.validate() {
        f.errors.push((0, strip_kind(&e)));
    }
    match initial {
        Some(initial) if f.errors.is_empty() => Ok(Scenario {
            name,
            initial,
            flow,
            analyses,
            output: OutputSpec {
                dir,
                checkpoint_every,
            },
            canonical,
        }),
        _ => {
            f.errors.sort_by_key(|(l, _)| *l);
            f.errors.dedup();
            let msgs: Vec<String> = f
                .errors
                .iter()
                .map(|(l, m)| {
                    if *l == 0 {
                        m.clone()
                    } else {
                        format!("line {l}: {m}")
                    }
                })
                .collect();
            Err(Error::Config(msgs.join("; ")))
        }
    }
}

pub fn read_config(path: &Path) -> Result<Scenario> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// 0.1(sin x¹ + cos x²) as Fourier terms.
    fn wave_terms() -> Vec<FourierTerm> {
        vec![
            FourierTerm {
                amplitude: 0.1,
                k: vec![1.0, 0.0],
                phase: 0.0,
            },
            FourierTerm {
                amplitude: 0.1,
                k: vec![0.0, 1.0],
                phase: PI / 2.0,
            },
        ]
    }

    fn parse(text: &str) -> Result<Scenario> {
        parse_config(text, Path::new(""))
    }

    fn errors(text: &str) -> String {
        match parse(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn sphere_scenario() {
        let s = parse("initial.catalog = sphere\ninitial.radius = 1.0\ninitial.m = 2\nflow.stop_t_max = 0.3\n").unwrap();
        match &s.initial {
            InitialSource::Catalog { name, params } => {
                assert_eq!(name, "sphere");
                assert_eq!(params.values.get("radius"), Some(&1.0));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.flow.stop_t_max, 0.3);
        assert!(s.analyses.is_empty());
    }

    #[test]
    fn resolution_minimum() {
        let e = errors("initial.catalog = circle\ngrid.resolution = 4\n");
        assert!(
            e.starts_with("line 2: grid.resolution: resolution below minimum 8"),
            "{e}"
        );
    }

    #[test]
    fn missing_initial() {
        assert!(errors("flow.stop_t_max = 1\n").contains("no initial source"));
    }

    #[test]
    fn collects_every_error() {
        let e = errors("initial.catalog = circle\nflow.cfl_sigma = abc\nbogus.key = 1\nflow.stop_max_A2 = -1\n");
        assert!(
            e.contains("line 2: flow.cfl_sigma: expected a number"),
            "{e}"
        );
        assert!(e.contains("line 3: bogus.key: unknown key"), "{e}");
        assert!(e.contains("line 4: flow.stop_max_A2"), "{e}");
        assert!(!e.contains('\n'));
    }

    #[test]
    fn catalog_parameters_are_checked() {
        let e = errors("initial.catalog = circle\ninitial.radius = -1\n");
        assert!(e.starts_with("line 1:"), "{e}");
        let e = errors("initial.catalog = circle\ninitial.colour = 3\n");
        assert!(e.contains("colour"), "{e}");
    }

    #[test]
    fn potential_scenario() {
        let s = parse(
            "initial.potential.m = 2\ninitial.potential.s = 0.5, 0, 0, 0.8\n\
             initial.potential.terms = 0.1, 1, 0, 0, 0.1, 0, 1, 1.5707963267948966\ngrid.resolution = 16, 16\n\
             analysis.lagrangian_report = true\n",
        )
        .unwrap();
        let InitialSource::Potential(p) = &s.initial else {
            panic!()
        };
        assert_eq!(p.terms, wave_terms());
        assert_eq!(s.analyses, vec![Analysis::LagrangianReport]);
        let pot = p.build().unwrap();
        let x = pot.chart().coord(5).to_vec();
        let want = 0.1 * (x[0].sin() + x[1].cos());
        assert!((pot.phi().at(5)[0] - want).abs() < 0.02);
        let e = errors("initial.potential.terms = 0.1, 0.5, 0, 0\n");
        assert!(e.contains("integral"), "{e}");
    }

    #[test]
    fn analyses_are_validated_against_the_initial() {
        let e = errors("initial.catalog = sphere\nanalysis.lagrangian_report = true\n");
        assert!(e.contains("even ambient dimension"), "{e}");
        let e = errors("initial.catalog = circle\nanalysis.monotonicity.q = 0, 0\nanalysis.monotonicity.t0 = 0.5\n");
        assert!(e.contains("snapshot_every"), "{e}");
        let e = errors("initial.catalog = circle\ninitial.snapshot = a.snap\n");
        assert!(e.contains("more than one initial source"), "{e}");
        let s = parse("initial.catalog = circle\noutput.snapshot_every = 1\nanalysis.rescale = type2\nanalysis.rescale.k = 3\nanalysis.classify = true\n").unwrap();
        assert_eq!(
            s.analyses[0],
            Analysis::Rescale {
                mode: RescaleMode::Type2,
                k: 3,
                q: None
            }
        );
        assert_eq!(s.analyses[1], Analysis::Classify);
    }

    #[test]
    fn comments_duplicates_and_hash() {
        let a = parse("# header\ninitial.catalog = circle   # trailing\noutput.dir = a\n").unwrap();
        let b = parse("output.dir = b\ninitial.catalog = circle\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert!(
            errors("initial.catalog = circle\ninitial.catalog = sphere\n")
                .contains("duplicate key")
        );
    }
}
