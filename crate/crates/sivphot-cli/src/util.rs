//! Shared plumbing: delimited-text files with `#` headers, report
//! rendering, output-path resolution.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sivphot::correlation::G2Histogram;
use sivphot::stream::TimestampStream;

/// Where outputs land: `--output-dir`, else `SIVPHOT_OUTPUT_DIR`, else cwd.
pub fn resolve_out(dir: &Option<PathBuf>, file: &Path) -> PathBuf {
    if file.is_absolute() {
        return file.to_path_buf();
    }
    let base = dir
        .clone()
        .or_else(|| std::env::var_os("SIVPHOT_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    base.join(file)
}

/// Standard header lines: tool id, optional timestamp, resolved config as
/// one JSON line.
pub fn header(tool: &str, config_json: &str, timestamp: bool) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# sivphot {tool} v1");
    if timestamp {
        let now = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_else(|_| "unknown".into());
        let _ = writeln!(h, "# generated = {now}");
    }
    let _ = writeln!(h, "# config = {config_json}");
    h
}

/// Load a timestamp stream, accepting the binary format or the text
/// variant (sniffed by the magic string).
pub fn load_stream(path: &Path) -> Result<TimestampStream> {
    let mut magic = [0u8; 8];
    {
        let mut f = fs::File::open(path).with_context(|| format!("open {}", path.display()))?;
        let n = f.read(&mut magic)?;
        if n < 8 {
            bail!("{} is too short to be a timestamp stream", path.display());
        }
    }
    if &magic == b"SIVTSTRM" {
        Ok(TimestampStream::read_binary(path)?)
    } else {
        Ok(TimestampStream::read_text(path)?)
    }
}

/// Columns of a delimited text file, `#` lines skipped. Returns the rows
/// and any `# key = value` header pairs.
pub fn read_table(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<(String, String)>)> {
    let text = fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .with_context(|| format!("{}:{}: bad number {t:?}", path.display(), i + 1))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok((rows, meta))
}

/// Write a delimited table with named columns under a standard header.
pub fn write_table(
    path: &Path,
    head: &str,
    columns: &[&str],
    extra_meta: &[(&str, String)],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut out = String::from(head);
    for (k, v) in extra_meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let _ = writeln!(out, "# columns: {}", columns.join(" "));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(out, "{}", line.join("\t"));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, out).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

/// Persist a correlation histogram in the text interchange form.
pub fn write_histogram(path: &Path, head: &str, hist: &G2Histogram) -> Result<()> {
    write_table(
        path,
        head,
        &["tau_ns", "g2", "counts"],
        &[
            ("bin_width_ns", format!("{:.12e}", hist.bin_width_ns)),
            ("norm_constant", format!("{:.12e}", hist.norm_constant)),
            ("duration_ns", format!("{:.12e}", hist.duration_ns)),
            ("events_a", hist.events.0.to_string()),
            ("events_b", hist.events.1.to_string()),
        ],
        (0..hist.counts.len())
            .map(|i| vec![hist.tau_at(i), hist.normalized[i], hist.counts[i] as f64]),
    )
}

/// Re-read a histogram written by [`write_histogram`].
pub fn read_histogram(path: &Path) -> Result<G2Histogram> {
    let (rows, meta) = read_table(path)?;
    if rows.is_empty() {
        bail!("{}: empty histogram", path.display());
    }
    let get = |key: &str| -> Result<f64> {
        meta.iter()
            .find(|(k, _)| k == key)
            .with_context(|| format!("{}: missing `# {key} = ...`", path.display()))?
            .1
            .parse::<f64>()
            .with_context(|| format!("{}: bad {key}", path.display()))
    };
    let bin_width_ns = get("bin_width_ns")?;
    let norm_constant = get("norm_constant")?;
    let duration_ns = get("duration_ns")?;
    let n = rows.len();
    if n % 2 == 0 {
        bail!("{}: histogram must have an odd number of bins", path.display());
    }
    let mut counts = Vec::with_capacity(n);
    let mut normalized = Vec::with_capacity(n);
    for row in &rows {
        if row.len() < 3 {
            bail!("{}: expected tau g2 counts", path.display());
        }
        normalized.push(row[1]);
        counts.push(row[2] as u64);
    }
    Ok(G2Histogram {
        bin_width_ns,
        counts,
        normalized,
        norm_constant,
        half_bins: n / 2,
        events: (
            get("events_a").unwrap_or(0.0) as usize,
            get("events_b").unwrap_or(0.0) as usize,
        ),
        duration_ns,
    })
}

/// A flat machine-readable result: names, values, optional uncertainties,
/// plus string annotations. Text and JSON renderings carry the same fields.
#[derive(Debug, Default)]
pub struct Report {
    pub entries: Vec<(String, f64, Option<f64>)>,
    pub notes: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, name: &str, value: f64, sigma: Option<f64>) {
        self.entries.push((name.to_string(), value, sigma));
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.push((key.to_string(), value.into()));
    }

    pub fn render_text(&self, head: &str) -> String {
        let mut out = String::from(head);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k} = {v}");
        }
        for (name, value, sigma) in &self.entries {
            match sigma {
                Some(s) => {
                    let _ = writeln!(out, "{name} = {value:.10e} +- {s:.4e}");
                }
                None => {
                    let _ = writeln!(out, "{name} = {value:.10e}");
                }
            }
        }
        out
    }

    pub fn render_json(&self, tool: &str, config_json: &str) -> String {
        let mut map = serde_json::Map::new();
        map.insert("tool".into(), serde_json::json!(format!("sivphot {tool}")));
        if let Ok(cfg) = serde_json::from_str::<serde_json::Value>(config_json) {
            map.insert("config".into(), cfg);
        }
        for (k, v) in &self.notes {
            map.insert(k.clone(), serde_json::json!(v));
        }
        let mut params = serde_json::Map::new();
        for (name, value, sigma) in &self.entries {
            let mut entry = serde_json::Map::new();
            entry.insert("value".into(), serde_json::json!(value));
            if let Some(s) = sigma {
                entry.insert("sigma".into(), serde_json::json!(s));
            }
            params.insert(name.clone(), serde_json::Value::Object(entry));
        }
        map.insert("parameters".into(), serde_json::Value::Object(params));
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).unwrap()
    }

    /// Write as text or structured JSON; `None` prints to stdout.
    pub fn emit(
        &self,
        out: Option<&Path>,
        structured: bool,
        tool: &str,
        config_json: &str,
        timestamp: bool,
    ) -> Result<()> {
        let body = if structured {
            self.render_json(tool, config_json)
        } else {
            self.render_text(&header(tool, config_json, timestamp))
        };
        match out {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        fs::create_dir_all(parent)?;
                    }
                }
                fs::write(path, body).with_context(|| format!("write {}", path.display()))?;
            }
            None => print!("{body}"),
        }
        Ok(())
    }
}
