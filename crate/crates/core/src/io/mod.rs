//! Files: scenario configs, diagnostics CSV, plain-text snapshots and
//! resumable checkpoints. Every writer replaces its target atomically.

mod checkpoint;
mod config;
mod csv;
mod snapshot;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use checkpoint::{
    read_checkpoint, scenario_hash, write_checkpoint, Checkpoint, CHECKPOINT_SCHEMA,
};
pub use config::{
    parse_config, read_config, Analysis, FourierTerm, InitialSource, OutputSpec, PotentialSpec,
    RescaleMode, Scenario,
};
pub use csv::{read_diagnostics, write_diagnostics, Diagnostics};
pub use snapshot::{
    format_snapshot, parse_snapshot, read_snapshot, write_snapshot, SNAPSHOT_SCHEMA,
};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Full-precision float text: 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
