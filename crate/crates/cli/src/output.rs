//! File formats: CSV with 17 significant digits, pretty JSON, and the
//! per-run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use magnonlink_core::fitting::{SpectrumTrace, TraceKind};
use magnonlink_core::sweep::{SweepGrid, SweepValues};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Lossless decimal form of an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds a CSV document from a header and rows of numbers.
pub fn csv_table<'a>(header: &[&str], rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Collects output files in memory and writes them, with the manifest,
/// only once the command has succeeded.
pub struct OutputSet {
    dir: PathBuf,
    command: String,
    config_hash: String,
    files: BTreeMap<String, String>,
}

impl OutputSet {
    pub fn new(dir: &Path, command: &str, config_hash: &str) -> Self {
        Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            files: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.insert(name.to_string(), contents);
    }

    pub fn add_json(&mut self, name: &str, v: &Value) {
        self.add(name, json_text(v));
    }

    pub fn write(self) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut listing = Vec::new();
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            listing.push(json!({
                "path": name,
                "sha256": hex::encode(Sha256::digest(contents.as_bytes())),
                "bytes": contents.len(),
            }));
            written.push(path);
        }
        let manifest = json!({
            "generator": concat!("magnonlink ", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config_sha256": self.config_hash,
            "files": listing,
        });
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, json_text(&manifest)).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

pub fn trace_csv(t: &SpectrumTrace<f64>) -> String {
    if t.kind == TraceKind::PowerOnly {
        let rows: Vec<[f64; 2]> = t.freq.iter().zip(&t.value).map(|(&f, v)| [f, v.re]).collect();
        csv_table(&["freq_hz", "power_w"], rows.iter().map(|r| r.as_slice()))
    } else {
        let rows: Vec<[f64; 3]> = t.freq.iter().zip(&t.value).map(|(&f, v)| [f, v.re, v.im]).collect();
        csv_table(&["freq_hz", "re", "im"], rows.iter().map(|r| r.as_slice()))
    }
}

/// JSON form of a trace. Numbers use serde_json's shortest round-trip form.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceJson {
    pub kind: TraceKind,
    pub freq_hz: Vec<f64>,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub fn trace_json(t: &SpectrumTrace<f64>) -> Value {
    let power = t.kind == TraceKind::PowerOnly;
    serde_json::to_value(TraceJson {
        kind: t.kind,
        freq_hz: t.freq.clone(),
        re: t.value.iter().map(|v| v.re).collect(),
        im: (!power).then(|| t.value.iter().map(|v| v.im).collect()),
        meta: t.meta.clone(),
    })
    .expect("trace serializes")
}

/// Reads numeric CSV columns by header name.
pub fn read_columns(path: &Path) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (h, field) in headers.iter().zip(rec.iter()) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {}, column `{h}`: `{field}` is not a number",
                    path.display(),
                    line + 2
                ))
            })?;
            cols.get_mut(h).expect("header present").push(v);
        }
    }
    Ok(cols)
}

pub fn column<'a>(cols: &'a BTreeMap<String, Vec<f64>>, name: &str, path: &Path) -> CliResult<&'a [f64]> {
    cols.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| CliError::Input(format!("{}: missing column `{name}`", path.display())))
}

/// Loads a CSV or JSON trace. CSV complex traces take their kind from
/// `kind_hint` (default S11_HYBRID); `power_w` columns mean POWER_ONLY.
pub fn read_trace(path: &Path, kind_hint: Option<TraceKind>) -> CliResult<SpectrumTrace<f64>> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let trace = if is_json {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let tj: TraceJson = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| CliError::Input(format!("{} {}: {}", path.display(), e.path(), e.inner())))?;
        if let Some(k) = kind_hint {
            if k != tj.kind {
                return Err(CliError::Input(format!(
                    "{}: trace kind {} does not match configured {}",
                    path.display(),
                    tj.kind,
                    k
                )));
            }
        }
        let value: Vec<Complex<f64>> = match (&tj.im, tj.kind) {
            (_, TraceKind::PowerOnly) => tj.re.iter().map(|&r| Complex::new(r, 0.0)).collect(),
            (Some(im), _) if im.len() == tj.re.len() => {
                tj.re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect()
            }
            _ => {
                return Err(CliError::Input(format!(
                    "{}: complex trace needs `im` of matching length",
                    path.display()
                )))
            }
        };
        let mut t = SpectrumTrace {
            freq: tj.freq_hz,
            value,
            kind: tj.kind,
            meta: tj.meta,
        };
        t.validate()?;
        t.meta.insert("path".into(), path.display().to_string());
        t
    } else {
        let cols = read_columns(path)?;
        let freq = column(&cols, "freq_hz", path)?.to_vec();
        let (value, kind) = if cols.contains_key("power_w") {
            let p = column(&cols, "power_w", path)?;
            if kind_hint.is_some_and(|k| k != TraceKind::PowerOnly) {
                return Err(CliError::Input(format!(
                    "{}: power-only trace but fit.kind is complex",
                    path.display()
                )));
            }
            (p.iter().map(|&x| Complex::new(x, 0.0)).collect(), TraceKind::PowerOnly)
        } else {
            let re = column(&cols, "re", path)?;
            let im = column(&cols, "im", path)?;
            let kind = kind_hint.unwrap_or(TraceKind::S11Hybrid);
            if kind == TraceKind::PowerOnly {
                return Err(CliError::Input(format!(
                    "{}: POWER_ONLY needs a `power_w` column",
                    path.display()
                )));
            }
            (re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect(), kind)
        };
        let mut t = SpectrumTrace::new(freq, value, kind)?;
        t.meta.insert("path".into(), path.display().to_string());
        t
    };
    Ok(trace)
}

pub fn grid_csv(g: &SweepGrid<f64>) -> String {
    let mut out = String::new();
    match &g.values {
        SweepValues::Real(v) => {
            out.push_str("current_a,freq_hz,value\n");
            for (i, &c) in g.current_axis.iter().enumerate() {
                for (j, &f) in g.freq_axis.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{}", num(c), num(f), num(v[i][j]));
                }
            }
        }
        SweepValues::Complex(v) => {
            out.push_str("current_a,freq_hz,re,im\n");
            for (i, &c) in g.current_axis.iter().enumerate() {
                for (j, &f) in g.freq_axis.iter().enumerate() {
                    let z = v[i][j];
                    let _ = writeln!(out, "{},{},{},{}", num(c), num(f), num(z.re), num(z.im));
                }
            }
        }
    }
    out
}

pub fn grid_json(g: &SweepGrid<f64>) -> Value {
    let mut v = json!({
        "quantity": g.quantity.as_str(),
        "freq_axis_hz": g.freq_axis,
        "current_axis_a": g.current_axis,
    });
    match &g.values {
        SweepValues::Real(rows) => v["values"] = json!(rows),
        SweepValues::Complex(rows) => {
            v["re"] = json!(rows
                .iter()
                .map(|r| r.iter().map(|z| z.re).collect::<Vec<_>>())
                .collect::<Vec<_>>());
            v["im"] = json!(rows
                .iter()
                .map(|r| r.iter().map(|z| z.im).collect::<Vec<_>>())
                .collect::<Vec<_>>());
        }
    }
    v
}

/// Rebuilds a grid from its long-form CSV.
pub fn read_grid_csv(path: &Path, quantity: magnonlink_core::sweep::SweepQuantity) -> CliResult<SweepGrid<f64>> {
    let cols = read_columns(path)?;
    let cur = column(&cols, "current_a", path)?;
    let freq = column(&cols, "freq_hz", path)?;
    let mut current_axis: Vec<f64> = Vec::new();
    for &c in cur {
        if current_axis.last() != Some(&c) {
            current_axis.push(c);
        }
    }
    let nf = if current_axis.is_empty() {
        0
    } else {
        cur.len() / current_axis.len()
    };
    if nf * current_axis.len() != cur.len() {
        return Err(CliError::Input(format!("{}: grid is not rectangular", path.display())));
    }
    let freq_axis = freq[..nf].to_vec();
    let values = if let Some(v) = cols.get("value") {
        SweepValues::Real(v.chunks(nf).map(<[f64]>::to_vec).collect())
    } else {
        let re = column(&cols, "re", path)?;
        let im = column(&cols, "im", path)?;
        let z: Vec<Complex<f64>> = re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect();
        SweepValues::Complex(z.chunks(nf).map(<[Complex<f64>]>::to_vec).collect())
    };
    let g = SweepGrid {
        freq_axis,
        current_axis,
        quantity,
        values,
    };
    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1.045e10, -2.5e-300, f64::MIN_POSITIVE, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = [[1.0, 2.0], [3.0, 4.0]];
        let s = csv_table(&["a", "b"], rows.iter().map(|r| r.as_slice()));
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("a,b\n"));
    }
}
