use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::flow::{FlowRecord, FlowState, FlowTrace, Termination};
use crate::geometry::Immersion;
use crate::grid::{make_chart, ChartSpec, GridField};

pub const CHECKPOINT_SCHEMA: &str = "codimflow.checkpoint.v1";

/// Enough to continue a run bit-identically: the state and the records
/// so far. Snapshots are not carried; they live in their own files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub scenario_hash: String,
    pub t: f64,
    pub step_index: usize,
    pub chart: ChartSpec,
    pub n: usize,
    pub values: Vec<f64>,
    pub shifts: Option<Vec<f64>>,
    pub records: Vec<FlowRecord>,
    pub termination: Option<Termination>,
}

impl Checkpoint {
    pub fn capture(state: &FlowState, trace: &FlowTrace, scenario_hash: &str) -> Checkpoint {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            scenario_hash: scenario_hash.to_string(),
            t: state.t,
            step_index: state.step_index,
            chart: state.imm.chart().spec().clone(),
            n: state.imm.n(),
            values: state.imm.values().to_vec(),
            shifts: state.imm.field().shifts().map(<[f64]>::to_vec),
            records: trace.records.clone(),
            termination: trace.termination,
        }
    }

    pub fn restore(&self) -> Result<(FlowState, FlowTrace)> {
        let chart = make_chart(&self.chart)?;
        let mut pos = GridField::new(chart, self.n, self.values.clone())?;
        if let Some(s) = &self.shifts {
            pos = pos.with_shifts(s.clone())?;
        }
        let state = FlowState::new(Immersion::new(pos)?, self.t, self.step_index)?;
        let trace = FlowTrace {
            records: self.records.clone(),
            snapshots: Vec::new(),
            termination: self.termination,
        };
        Ok((state, trace))
    }
}

/// SHA-256 of the scenario's canonical text, hex encoded.
pub fn scenario_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    let text = serde_json::to_string(cp).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let cp: Checkpoint = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if cp.schema != CHECKPOINT_SCHEMA {
        return Err(Error::Format(format!(
            "{}: schema '{}', expected {CHECKPOINT_SCHEMA}",
            path.display(),
            cp.schema
        )));
    }
    Ok(cp)
}
