use std::path::Path;

use super::{fmt_f64, read_text, write_atomic};
use crate::error::{Error, Result};
use crate::flow::FlowRecord;

const BASE: [&str; 6] = ["t", "dt", "max_A2", "max_H2", "volume", "min_detg"];

/// Renders the diagnostics table. The optional column groups appear when
/// any record carries them; rows lacking a value leave the field empty.
pub fn format_diagnostics(records: &[FlowRecord]) -> String {
    let huisken = records.iter().any(|r| r.huisken.is_some());
    let lagrangian = records
        .iter()
        .any(|r| r.alpha.is_some() || r.hess_phi_inf.is_some());
    let mut header: Vec<&str> = BASE.to_vec();
    if huisken {
        header.push("huisken");
    }
    if lagrangian {
        header.extend(["alpha_min", "alpha_max", "hess_phi_inf"]);
    }
    let mut out = header.join(",");
    out.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in records {
        let mut row: Vec<String> = [r.t, r.dt, r.max_a2, r.max_h2, r.volume, r.min_det_g]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect();
        if huisken {
            row.push(opt(r.huisken));
        }
        if lagrangian {
            row.push(opt(r.alpha.map(|a| a.0)));
            row.push(opt(r.alpha.map(|a| a.1)));
            row.push(opt(r.hess_phi_inf));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(records: &[FlowRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_diagnostics(records).as_bytes())
}

/// A diagnostics file read back: column names and rows (empty fields are NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Diagnostics {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_diagnostics(path: &Path) -> Result<Diagnostics> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty diagnostics file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    if header.len() < BASE.len() || header[..BASE.len()] != BASE {
        return Err(Error::Format(format!(
            "{}: unexpected diagnostics header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                if f.is_empty() {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>()
                }
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Diagnostics { header, rows })
}
