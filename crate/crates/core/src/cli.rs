//! Command-line front end. `main` returns the process exit code:
//! 0 success, 2 the run stopped at a singularity signal, 3 numerical
//! failure, 4 configuration or usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{
    estimate_singular_time, evolution_residuals, EvolutionReport, Flow, FlowTrace, Termination,
};
use crate::geometry::{structure_residuals, GeometryBundle, Immersion};
use crate::grid::{self, FdOrder};
use crate::io::{
    read_checkpoint, read_config, read_snapshot, write_atomic, write_checkpoint, write_diagnostics,
    write_snapshot, Analysis, Checkpoint, InitialSource, RescaleMode, Scenario,
};
use crate::lagrangian::{
    angle_evolution_residual, lag_immersion, lagrangian_report, lagrangian_residual, ma_run,
    ma_step, mean_curvature_form, pinching_gap, MaConfig,
};
use crate::singularity::{
    classify_blowup, example, hamilton_rescale, monotonicity_check, soliton_residual,
    type1_rescale, BlowupClass, ExampleParams, SolitonKind,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "codimflow",
    version,
    about = "Mean curvature flow in any codimension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and a checkpoint.
    Run {
        config: PathBuf,
        /// Continue from a checkpoint written by an earlier run of the same scenario.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run a scenario and write evolution and structure residual series.
    Verify { config: PathBuf },
    /// Soliton residual of a snapshot.
    Soliton {
        snapshot: PathBuf,
        #[arg(long)]
        kind: String,
        /// Translator velocity, comma separated.
        #[arg(long = "V", value_delimiter = ',', allow_hyphen_values = true)]
        v: Option<Vec<f64>>,
    },
    /// Run a scenario to its singularity and write rescaled frames.
    Rescale {
        config: PathBuf,
        #[arg(long)]
        mode: String,
        /// Hamilton sequence index for type2.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Lagrangian diagnostics and, for potentials, the potential flow.
    Lagrangian { config: PathBuf },
    /// Write a catalog example: `catalog <name> [--param value ...] -o <snapshot>`.
    Catalog {
        name: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn termination_code(t: Option<Termination>) -> i32 {
    match t {
        Some(t) if t.is_singular() => EXIT_SINGULAR,
        Some(t) if t.is_failure() => EXIT_NUMERICAL,
        _ => EXIT_OK,
    }
}

/// One line, suitable for the error stream.
pub fn error_line(e: &Error) -> String {
    format!("error: {}", e.to_string().replace(['\n', '\r'], " "))
}

/// Parses `args` (without the program name), runs the command, prints its
/// JSON summary to stdout and any error as one line on stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("codimflow")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok((code, summary)) => {
            // A closed stdout (e.g. piped into `head`) does not change the outcome.
            let text = serde_json::to_string_pretty(&summary).unwrap_or_default();
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            code
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

/// Reads CODIMFLOW_THREADS (unset or 0 means sequential).
pub fn configure_threads() -> Result<()> {
    match std::env::var("CODIMFLOW_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => {
            let k: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("CODIMFLOW_THREADS = '{v}' is not a count")))?;
            grid::set_threads(k);
            Ok(())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(i32, Value)> {
    match cmd {
        Command::Run { config, resume } => cmd_run(&config, resume.as_deref()),
        Command::Verify { config } => cmd_verify(&config),
        Command::Soliton { snapshot, kind, v } => {
            let (imm, t) = read_snapshot(&snapshot)?;
            let kind = SolitonKind::parse(&kind, v)?;
            let r = soliton_residual(&imm, &kind)?;
            Ok((
                EXIT_OK,
                json!({ "snapshot": snapshot, "t": t, "kind": kind, "linf": r.linf, "l2": r.l2, "argmax": r.argmax }),
            ))
        }
        Command::Rescale { config, mode, k } => cmd_rescale(&config, mode.parse()?, k),
        Command::Lagrangian { config } => cmd_lagrangian(&config),
        Command::Catalog { name, args } => cmd_catalog(&name, &args),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn snapshot_path(dir: &Path, record: usize) -> PathBuf {
    dir.join(format!("snap_{record:06}.snap"))
}

/// Runs the scenario's flow, writing snapshots as they appear and a
/// checkpoint every `output.checkpoint_every` steps.
fn drive(scenario: &Scenario, mut flow: Flow) -> Result<Flow> {
    let dir = &scenario.output.dir;
    let hash = scenario.hash();
    let chunk = (scenario.output.checkpoint_every > 0).then_some(scenario.output.checkpoint_every);
    let mut written = 0;
    loop {
        let done = flow.advance(chunk);
        for s in &flow.trace().snapshots[written..] {
            write_snapshot(&s.imm, s.t, &snapshot_path(dir, s.record))?;
        }
        written = flow.trace().snapshots.len();
        let cp = Checkpoint::capture(flow.state(), flow.trace(), &hash);
        write_checkpoint(&cp, &dir.join("checkpoint.json"))?;
        if done?.is_some() {
            return Ok(flow);
        }
    }
}

fn start_flow(scenario: &Scenario, resume: Option<&Path>) -> Result<Flow> {
    match resume {
        Some(path) => {
            let cp = read_checkpoint(path)?;
            if cp.scenario_hash != scenario.hash() {
                return Err(Error::Usage(format!(
                    "{} was written for a different scenario",
                    path.display()
                )));
            }
            let (state, trace) = cp.restore()?;
            Flow::resume(state, trace, scenario.flow.clone())
        }
        None => Flow::new(scenario.initial_immersion()?.0, scenario.flow.clone()),
    }
}

fn singular_time(trace: &FlowTrace) -> Option<f64> {
    trace.termination.filter(|t| t.is_singular())?;
    estimate_singular_time(trace).ok().map(|e| e.t_hat)
}

fn run_summary(scenario: &Scenario, flow: &Flow) -> Value {
    let trace = flow.trace();
    let last = trace.last();
    json!({
        "name": scenario.name,
        "termination": trace.termination,
        "steps": flow.state().step_index,
        "t": flow.state().t,
        "max_A2": last.map(|r| r.max_a2),
        "volume": last.map(|r| r.volume),
        "records": trace.records.len(),
        "t_hat": singular_time(trace),
    })
}

fn immersion_lagrangian(imm: &Immersion) -> Result<Value> {
    let bundle = GeometryBundle::new(imm)?;
    let mcf = mean_curvature_form(imm, &bundle)?;
    let pinch = pinching_gap(imm, &bundle)?;
    Ok(json!({
        "lagrangian_residual": lagrangian_residual(imm)?,
        "h_symmetry_defect": mcf.symmetry_defect,
        "dH_residual": mcf.closedness,
        "h_omega_defect": mcf.omega_defect,
        "pinching_gap_min": pinch.gap_min,
        "pinching_identity_defect": pinch.identity_defect,
    }))
}

fn run_analysis(a: &Analysis, scenario: &Scenario, flow: &Flow) -> Result<Value> {
    let trace = flow.trace();
    let state = flow.state();
    let t_hat = || {
        singular_time(trace).ok_or_else(|| {
            Error::Usage("analysis needs a run that stopped at a singularity".into())
        })
    };
    match a {
        Analysis::Monotonicity(p) => {
            let r = monotonicity_check(trace, p)?;
            Ok(json!({ "monotonicity": r }))
        }
        Analysis::Soliton(kind) => {
            let r = soliton_residual(&state.imm, kind)?;
            Ok(json!({ "soliton": { "kind": kind, "linf": r.linf, "l2": r.l2 } }))
        }
        Analysis::Classify => {
            let r = classify_blowup(trace, t_hat()?)?;
            Ok(json!({ "classify": r }))
        }
        Analysis::Rescale { mode, k, q } => rescale_frames(
            trace,
            *mode,
            *k,
            q.as_deref(),
            &scenario.output.dir,
            t_hat()?,
        ),
        Analysis::LagrangianReport => {
            let initial = match &scenario.initial {
                InitialSource::Potential(p) => {
                    Some(serde_json::to_value(lagrangian_report(&p.build()?)?).unwrap_or_default())
                }
                _ => None,
            };
            Ok(
                json!({ "lagrangian": { "initial_potential": initial, "final": immersion_lagrangian(&state.imm)? } }),
            )
        }
    }
}

fn rescale_frames(
    trace: &FlowTrace,
    mode: RescaleMode,
    k: usize,
    q: Option<&[f64]>,
    dir: &Path,
    t_hat: f64,
) -> Result<Value> {
    let frames_dir = dir.join("rescaled");
    create_dir(&frames_dir)?;
    match mode {
        RescaleMode::Type1 => {
            let mut frames = Vec::new();
            for s in trace.snapshots.iter().filter(|s| s.t < t_hat) {
                let zero = vec![0.0; s.imm.n()];
                let r = type1_rescale(&s.imm, s.t, q.unwrap_or(&zero), t_hat)?;
                let radii: Vec<f64> = (0..r.imm.node_count())
                    .map(|n| r.imm.position(n).iter().map(|x| x * x).sum::<f64>().sqrt())
                    .collect();
                write_snapshot(
                    &r.imm,
                    r.s,
                    &frames_dir.join(format!("type1_{:06}.snap", s.record)),
                )?;
                frames.push(json!({
                    "record": s.record,
                    "s": r.s,
                    "radius_min": radii.iter().copied().fold(f64::INFINITY, f64::min),
                    "radius_max": radii.iter().copied().fold(0.0, f64::max),
                }));
            }
            Ok(json!({ "rescale": { "mode": "type1", "t_hat": t_hat, "frames": frames } }))
        }
        RescaleMode::Type2 => {
            let h = hamilton_rescale(trace, t_hat, k)?;
            for (i, f) in h.frames.iter().enumerate() {
                write_snapshot(
                    &f.imm,
                    f.tau,
                    &frames_dir.join(format!("type2_k{k}_{i:06}.snap")),
                )?;
            }
            Ok(json!({ "rescale": {
                "mode": "type2", "t_hat": t_hat, "k": k, "record": h.record, "t_k": h.t_k,
                "L_k": h.l_k, "alpha_k": h.alpha_k, "omega_k": h.omega_k, "frames": h.frames.len(),
            } }))
        }
    }
}

fn finish_run(scenario: &Scenario, flow: &Flow) -> Result<(i32, Value)> {
    let dir = &scenario.output.dir;
    write_diagnostics(&flow.trace().records, &dir.join("diagnostics.csv"))?;
    write_snapshot(&flow.state().imm, flow.state().t, &dir.join("final.snap"))?;
    let mut summary = run_summary(scenario, flow);
    let mut failed = None;
    let mut results = Vec::new();
    for a in &scenario.analyses {
        match run_analysis(a, scenario, flow) {
            Ok(v) => results.push(v),
            Err(e) => {
                results.push(json!({ "error": e.to_string() }));
                failed.get_or_insert(e);
            }
        }
    }
    summary["analyses"] = Value::Array(results);
    write_json(&dir.join("report.json"), &summary)?;
    match failed {
        Some(e) => Err(e),
        None => Ok((termination_code(flow.trace().termination), summary)),
    }
}

fn cmd_run(config: &Path, resume: Option<&Path>) -> Result<(i32, Value)> {
    let scenario = read_config(config)?;
    create_dir(&scenario.output.dir)?;
    let flow = drive(&scenario, start_flow(&scenario, resume)?)?;
    finish_run(&scenario, &flow)
}

fn residual_header(names: &[&str]) -> String {
    let mut cols = vec!["t".to_string()];
    for n in names {
        cols.push(format!("{n}_linf"));
        cols.push(format!("{n}_l2"));
    }
    cols.join(",") + "\n"
}

fn residual_row(t: f64, entries: &[(&str, crate::geometry::ResidualNorm)]) -> String {
    let mut cols = vec![format!("{t:.16e}")];
    for (_, r) in entries {
        cols.push(format!("{:.16e}", r.linf));
        cols.push(format!("{:.16e}", r.l2));
    }
    cols.join(",") + "\n"
}

fn cmd_verify(config: &Path) -> Result<(i32, Value)> {
    let scenario = read_config(config)?;
    let dir = &scenario.output.dir;
    create_dir(dir)?;
    let (imm, _) = scenario.initial_immersion()?;
    let mut flow = Flow::new(imm, scenario.flow.clone())?;
    let structure_of =
        |imm: &Immersion, b: &GeometryBundle| structure_residuals(imm, b).map(|r| r.relative());
    let s0 = structure_of(&flow.state().imm, &flow.state().bundle)?;
    let mut structure = residual_header(&s0.entries().map(|e| e.0));
    structure.push_str(&residual_row(0.0, &s0.entries()));
    let mut evolution = residual_header(&EvolutionReport::NAMES);
    let mut worst = serde_json::Map::new();
    let every = scenario.flow.record_every;
    loop {
        let before = flow.state().clone();
        if flow.advance(Some(1))?.is_some() {
            break;
        }
        let after = flow.state();
        if after.step_index % every != 0 {
            continue;
        }
        let r = evolution_residuals(&before, after)?;
        evolution.push_str(&residual_row(after.t, &r.entries()));
        for (name, n) in r.entries() {
            let w = worst.entry(name.to_string()).or_insert(json!(0.0));
            *w = json!(w.as_f64().unwrap_or(0.0).max(n.linf));
        }
        let s = structure_of(&after.imm, &after.bundle)?;
        structure.push_str(&residual_row(after.t, &s.entries()));
    }
    write_atomic(&dir.join("evolution.csv"), evolution.as_bytes())?;
    write_atomic(&dir.join("structure.csv"), structure.as_bytes())?;
    let mut summary = run_summary(&scenario, &flow);
    summary["evolution_max_linf"] = Value::Object(worst);
    summary["structure_initial"] = json!(s0
        .entries()
        .map(|(n, r)| json!({ "name": n, "linf": r.linf })));
    write_diagnostics(&flow.trace().records, &dir.join("diagnostics.csv"))?;
    write_json(&dir.join("report.json"), &summary)?;
    Ok((termination_code(flow.trace().termination), summary))
}

fn cmd_rescale(config: &Path, mode: RescaleMode, k: usize) -> Result<(i32, Value)> {
    let mut scenario = read_config(config)?;
    if scenario.flow.snapshot_every == 0 {
        scenario.flow.snapshot_every = 1;
    }
    create_dir(&scenario.output.dir)?;
    let flow = drive(&scenario, start_flow(&scenario, None)?)?;
    write_diagnostics(
        &flow.trace().records,
        &scenario.output.dir.join("diagnostics.csv"),
    )?;
    let t_hat = singular_time(flow.trace()).ok_or_else(|| {
        Error::Usage(format!(
            "rescaling needs a singular stop, run ended with {:?}",
            flow.trace().termination
        ))
    })?;
    let q = scenario.analyses.iter().find_map(|a| match a {
        Analysis::Rescale { q, .. } => q.clone(),
        _ => None,
    });
    let mut summary = run_summary(&scenario, &flow);
    summary["result"] = rescale_frames(
        flow.trace(),
        mode,
        k,
        q.as_deref(),
        &scenario.output.dir,
        t_hat,
    )?;
    if let Ok(r) = classify_blowup(flow.trace(), t_hat) {
        summary["classification"] = json!(match r.classification {
            BlowupClass::TypeI { .. } => "TypeI",
            BlowupClass::TypeII => "TypeII",
            BlowupClass::Inconclusive => "Inconclusive",
        });
    }
    write_json(&scenario.output.dir.join("report.json"), &summary)?;
    Ok((EXIT_OK, summary))
}

fn cmd_lagrangian(config: &Path) -> Result<(i32, Value)> {
    let scenario = read_config(config)?;
    let dir = &scenario.output.dir;
    create_dir(dir)?;
    let InitialSource::Potential(spec) = &scenario.initial else {
        let (imm, _) = scenario.initial_immersion()?;
        let summary = json!({ "name": scenario.name, "immersion": immersion_lagrangian(&imm)? });
        write_json(&dir.join("report.json"), &summary)?;
        return Ok((EXIT_OK, summary));
    };
    let p0 = spec.build()?;
    let mut summary = json!({ "name": scenario.name, "initial": lagrangian_report(&p0)? });
    if scenario.flow.stop_t_max.is_finite() {
        let cfg = MaConfig {
            cfl_sigma: scenario.flow.cfl_sigma,
            t_max: scenario.flow.stop_t_max,
            record_every: scenario.flow.record_every,
            snapshot_every: scenario.flow.snapshot_every,
        };
        let trace = ma_run(&p0, &cfg)?;
        write_diagnostics(&trace.records, &dir.join("diagnostics.csv"))?;
        for s in &trace.snapshots {
            write_snapshot(
                &lag_immersion(&s.potential)?,
                s.t,
                &snapshot_path(dir, s.record),
            )?;
        }
        let last = &trace.last.potential;
        write_snapshot(&lag_immersion(last)?, trace.last.t, &dir.join("final.snap"))?;
        let dt = cfg.time_step(last.chart());
        let angle = angle_evolution_residual(last, &ma_step(last, dt)?, dt)?;
        let monotone = trace
            .records
            .windows(2)
            .all(|w| match (w[0].alpha, w[1].alpha) {
                (Some(a), Some(b)) => b.1 <= a.1 && b.0 >= a.0,
                _ => true,
            });
        summary["final"] = serde_json::to_value(lagrangian_report(last)?).unwrap_or_default();
        summary["t"] = json!(trace.last.t);
        summary["records"] = json!(trace.records.len());
        summary["angle_equation_linf"] = json!(angle.linf);
        summary["angle_extremes_monotone"] = json!(monotone);
    }
    write_json(&dir.join("report.json"), &summary)?;
    Ok((EXIT_OK, summary))
}

/// `--key value` pairs plus `-o/--output path`; `--resolution a,b` and
/// `--fd-order k` set the grid.
fn cmd_catalog(name: &str, args: &[String]) -> Result<(i32, Value)> {
    let mut params = ExampleParams::new();
    let mut output = None;
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .or_else(|| (flag == "-o").then_some("output"))
            .ok_or_else(|| Error::Usage(format!("expected --key value, got '{flag}'")))?;
        let value = it
            .next()
            .ok_or_else(|| Error::Usage(format!("{flag} needs a value")))?;
        let bad = || Error::Usage(format!("bad value '{value}' for {flag}"));
        match key {
            "output" => output = Some(PathBuf::from(value)),
            "resolution" => {
                let r: Vec<usize> = value
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                params = params.with_resolution(&r);
            }
            "fd-order" => {
                params = params.with_order(
                    value
                        .parse()
                        .ok()
                        .and_then(FdOrder::from_int)
                        .ok_or_else(bad)?,
                )
            }
            _ => params = params.with(key, value.parse().map_err(|_| bad())?),
        }
    }
    let output = output.ok_or_else(|| Error::Usage("catalog needs -o <snapshot>".into()))?;
    let ex = example(name, &params)?;
    write_snapshot(&ex.imm, 0.0, &output)?;
    Ok((
        EXIT_OK,
        json!({ "name": name, "output": output, "m": ex.imm.m(), "n": ex.imm.n(), "expected": ex.expected }),
    ))
}
