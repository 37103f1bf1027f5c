use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_f64, read_text, write_atomic};
use crate::error::{Error, Result};
use crate::geometry::Immersion;
use crate::grid::{make_chart, ChartSpec, Domain, FdOrder, GridField};

pub const SNAPSHOT_SCHEMA: &str = "codimflow.snapshot.v1";

fn domain_tag(d: Domain) -> String {
    match d {
        Domain::Interval { lo, hi } => format!("interval:{}:{}", fmt_f64(lo), fmt_f64(hi)),
        other => other.name().to_string(),
    }
}

fn parse_domain(tag: &str, dims: usize) -> Result<Domain> {
    let bad = || Error::Format(format!("unknown domain '{tag}'"));
    Ok(match tag {
        "circle" => Domain::CircleS1,
        "sphere" => Domain::SphereS2,
        "torus" => Domain::TorusTm(dims),
        _ => {
            let rest = tag.strip_prefix("interval:").ok_or_else(bad)?;
            let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
            Domain::Interval {
                lo: lo.parse().map_err(|_| bad())?,
                hi: hi.parse().map_err(|_| bad())?,
            }
        }
    })
}

/// Header lines, then one row per node: multi-index, chart coordinates,
/// position. An optional `# shifts=` line records the wrap shifts of
/// quasi-periodic immersions.
pub fn format_snapshot(imm: &Immersion, t: f64) -> String {
    let chart = imm.chart();
    let spec = chart.spec();
    let (m, n) = (imm.m(), imm.n());
    let res: Vec<String> = spec.resolution.iter().map(|r| r.to_string()).collect();
    let mut out = format!(
        "# schema={SNAPSHOT_SCHEMA}\n# t={} m={m} n={n} domain={} resolution={} fd_order={}\n",
        fmt_f64(t),
        domain_tag(spec.domain),
        res.join("x"),
        spec.fd_order.as_int()
    );
    if let Some(s) = imm.field().shifts() {
        let s: Vec<String> = s.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "# shifts={}", s.join(","));
    }
    let mut row = Vec::with_capacity(2 * m + n);
    for node in 0..imm.node_count() {
        row.clear();
        let idx = chart.multi_index(node);
        row.extend(idx[..m].iter().map(|i| i.to_string()));
        row.extend(chart.coord(node).iter().map(|&x| fmt_f64(x)));
        row.extend(imm.position(node).iter().map(|&x| fmt_f64(x)));
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_snapshot(imm: &Immersion, t: f64, path: &Path) -> Result<()> {
    write_atomic(path, format_snapshot(imm, t).as_bytes())
}

fn header_fields(line: &str) -> Result<Vec<(&str, &str)>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing snapshot header".into()))?;
    body.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header field '{kv}'")))
        })
        .collect()
}

/// Parses snapshot text into the immersion and its time.
pub fn parse_snapshot(text: &str) -> Result<(Immersion, f64)> {
    let mut lines = text.lines().peekable();
    let schema = header_fields(lines.next().unwrap_or_default())?;
    if schema != [("schema", SNAPSHOT_SCHEMA)] {
        return Err(Error::Format(format!("expected schema={SNAPSHOT_SCHEMA}")));
    }
    let fields = header_fields(lines.next().unwrap_or_default())?;
    let get = |key: &str| {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Format(format!("snapshot header lacks '{key}'")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("bad header value for '{key}'")))
    };
    let t: f64 = get("t")?
        .parse()
        .map_err(|_| Error::Format("bad header value for 't'".into()))?;
    let (m, n) = (num("m")?, num("n")?);
    let resolution: Vec<usize> = get("resolution")?
        .split('x')
        .map(|r| r.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format("bad resolution".into()))?;
    let fd_order = match fields.iter().find(|(k, _)| *k == "fd_order") {
        Some((_, v)) => v
            .parse()
            .ok()
            .and_then(FdOrder::from_int)
            .ok_or_else(|| Error::Format(format!("bad fd_order '{v}'")))?,
        None => FdOrder::Two,
    };
    let spec = ChartSpec {
        domain: parse_domain(get("domain")?, resolution.len())?,
        resolution,
        fd_order,
    };
    if spec.dim() != m {
        return Err(Error::Format(format!(
            "header says m={m} but the {} chart has dimension {}",
            get("domain")?,
            spec.dim()
        )));
    }
    let chart = make_chart(&spec).map_err(|e| Error::Format(e.to_string()))?;
    let shifts = match lines.peek() {
        Some(l) if l.starts_with("# shifts=") => {
            let l = lines.next().unwrap_or_default();
            let v: Vec<f64> = l["# shifts=".len()..]
                .split(',')
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format("bad shifts".into()))?;
            Some(v)
        }
        _ => None,
    };
    let expected = chart.node_count();
    let mut values = Vec::with_capacity(expected * n);
    let mut found = 0;
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        found += 1;
        if row >= expected {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 * m + n {
            return Err(Error::Format(format!(
                "row {} has {} columns, expected {}",
                row + 1,
                cols.len(),
                2 * m + n
            )));
        }
        let idx = chart.multi_index(row);
        for a in 0..m {
            if cols[a].parse::<usize>().ok() != Some(idx[a]) {
                return Err(Error::Format(format!(
                    "row {} is out of index order",
                    row + 1
                )));
            }
        }
        for c in &cols[2 * m..] {
            values.push(
                c.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad number '{c}'", row + 1)))?,
            );
        }
    }
    if found != expected {
        return Err(Error::RowCount { expected, found });
    }
    let mut pos = GridField::new(chart, n, values)?;
    if let Some(s) = shifts {
        pos = pos.with_shifts(s)?;
    }
    Ok((Immersion::new(pos)?, t))
}

pub fn read_snapshot(path: &Path) -> Result<(Immersion, f64)> {
    parse_snapshot(&read_text(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singularity::{make_example, ExampleParams};

    #[test]
    fn circle_of_eight() {
        let imm = make_example("circle", &ExampleParams::new().with_resolution(&[8])).unwrap();
        let text = format_snapshot(&imm, 0.0);
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.split_whitespace().count() == 4));
        assert!(text.starts_with("# schema=codimflow.snapshot.v1\n# t="));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for (name, p) in [
            ("sphere", ExampleParams::new().with_resolution(&[8, 16])),
            ("grim_reaper", ExampleParams::new().with_resolution(&[16])),
            (
                "flat_graph",
                ExampleParams::new()
                    .with("height", 0.1)
                    .with_resolution(&[8, 8]),
            ),
            (
                "clifford",
                ExampleParams::new()
                    .with_resolution(&[8, 8])
                    .with_order(FdOrder::Four),
            ),
        ] {
            let imm = make_example(name, &p).unwrap();
            let (back, t) = parse_snapshot(&format_snapshot(&imm, 0.125)).unwrap();
            assert_eq!(t, 0.125);
            assert_eq!(back.chart().spec(), imm.chart().spec());
            assert_eq!(back.field().shifts(), imm.field().shifts());
            let same = back
                .values()
                .iter()
                .zip(imm.values())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{name}");
        }
    }

    #[test]
    fn truncated_file_names_counts() {
        let imm = make_example("circle", &ExampleParams::new().with_resolution(&[8])).unwrap();
        let text = format_snapshot(&imm, 0.0);
        let cut: Vec<&str> = text.lines().take(7).collect();
        match parse_snapshot(&cut.join("\n")) {
            Err(Error::RowCount {
                expected: 8,
                found: 5,
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_snapshot(&text.replace("v1", "v2")),
            Err(Error::Format(_))
        ));
    }
}
