//! Two-channel photon timestamp streams and their on-disk formats.
//!
//! Timestamps are unsigned 64-bit picosecond ticks, strictly increasing
//! within each channel. The binary format is a small self-describing header
//! (magic, version, tick size, duration, channel count, optional metadata
//! string) followed by the per-channel sorted tick arrays; a plain-text
//! variant with one `channel<TAB>time_ns` pair per line is accepted for
//! ingestion.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const PS_PER_NS: f64 = 1000.0;
const MAGIC: &[u8; 8] = b"SIVTSTRM";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a timestamp stream file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed stream file: {0}")]
    Malformed(String),
    #[error("text line {line}: {reason}")]
    BadTextLine { line: usize, reason: String },
}

/// Detected photon arrival times on the two detector channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimestampStream {
    /// Sorted, strictly increasing ticks (ps) of channel a.
    pub channel_a: Vec<u64>,
    /// Sorted, strictly increasing ticks (ps) of channel b.
    pub channel_b: Vec<u64>,
    /// Acquisition length (ps); all ticks lie in `[0, duration_ps)`.
    pub duration_ps: u64,
    /// Free-form descriptor (JSON by convention) carried through the file
    /// round trip: the simulation config and seed, or an acquisition note.
    pub metadata: Option<String>,
}

impl TimestampStream {
    pub fn duration_ns(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_NS
    }

    pub fn len(&self) -> usize {
        self.channel_a.len() + self.channel_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_a.is_empty() && self.channel_b.is_empty()
    }

    /// Check the container invariants: sortedness, strict increase, range.
    pub fn validate(&self) -> Result<(), StreamError> {
        for (name, ch) in [("a", &self.channel_a), ("b", &self.channel_b)] {
            for w in ch.windows(2) {
                if w[1] <= w[0] {
                    return Err(StreamError::Malformed(format!(
                        "channel {name} not strictly increasing at tick {}",
                        w[1]
                    )));
                }
            }
            if let Some(&last) = ch.last() {
                if last >= self.duration_ps {
                    return Err(StreamError::Malformed(format!(
                        "channel {name} tick {last} beyond duration {}",
                        self.duration_ps
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_binary(&self, path: &Path) -> Result<(), StreamError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(1)?; // ps per tick
        w.write_u64::<LittleEndian>(self.duration_ps)?;
        w.write_u32::<LittleEndian>(2)?; // channel count
        let meta = self.metadata.as_deref().unwrap_or("");
        w.write_u32::<LittleEndian>(meta.len() as u32)?;
        w.write_all(meta.as_bytes())?;
        for ch in [&self.channel_a, &self.channel_b] {
            w.write_u64::<LittleEndian>(ch.len() as u64)?;
            for &t in ch {
                w.write_u64::<LittleEndian>(t)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self, StreamError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(StreamError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(StreamError::UnsupportedVersion(version));
        }
        let tick_ps = r.read_u64::<LittleEndian>()?;
        if tick_ps != 1 {
            return Err(StreamError::Malformed(format!("unsupported tick size {tick_ps} ps")));
        }
        let duration_ps = r.read_u64::<LittleEndian>()?;
        let channels = r.read_u32::<LittleEndian>()?;
        if channels != 2 {
            return Err(StreamError::Malformed(format!("expected 2 channels, found {channels}")));
        }
        let meta_len = r.read_u32::<LittleEndian>()? as usize;
        let metadata = if meta_len > 0 {
            let mut buf = vec![0u8; meta_len];
            r.read_exact(&mut buf)?;
            Some(String::from_utf8(buf).map_err(|e| StreamError::Malformed(e.to_string()))?)
        } else {
            None
        };
        let mut read_channel = || -> Result<Vec<u64>, StreamError> {
            let n = r.read_u64::<LittleEndian>()? as usize;
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(r.read_u64::<LittleEndian>()?);
            }
            Ok(v)
        };
        let channel_a = read_channel()?;
        let channel_b = read_channel()?;
        let stream = Self { channel_a, channel_b, duration_ps, metadata };
        stream.validate()?;
        Ok(stream)
    }

    /// Write the plain-text form: `# duration_ns = ...` then one
    /// `channel<TAB>time_ns` pair per line in channel order.
    pub fn write_text(&self, path: &Path) -> Result<(), StreamError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# duration_ns = {}", self.duration_ns())?;
        for (label, ch) in [("a", &self.channel_a), ("b", &self.channel_b)] {
            for &t in ch {
                writeln!(w, "{label}\t{}", t as f64 / PS_PER_NS)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Ingest the plain-text form. Channels may be labelled `a`/`b` or
    /// `0`/`1`; times are in ns and need not be sorted. Duplicate ticks
    /// within a channel are dropped.
    pub fn read_text(path: &Path) -> Result<Self, StreamError> {
        let r = BufReader::new(File::open(path)?);
        let mut channel_a = Vec::new();
        let mut channel_b = Vec::new();
        let mut duration_ps: Option<u64> = None;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("duration_ns") {
                    let v = v.trim_start_matches([' ', '=', ':']).trim();
                    let ns: f64 = v.parse().map_err(|_| StreamError::BadTextLine {
                        line: idx + 1,
                        reason: format!("bad duration {v:?}"),
                    })?;
                    duration_ps = Some((ns * PS_PER_NS).round() as u64);
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (ch, t) = match (parts.next(), parts.next()) {
                (Some(c), Some(t)) => (c, t),
                _ => {
                    return Err(StreamError::BadTextLine {
                        line: idx + 1,
                        reason: "expected `channel<TAB>time_ns`".into(),
                    })
                }
            };
            let time_ns: f64 = t.parse().map_err(|_| StreamError::BadTextLine {
                line: idx + 1,
                reason: format!("bad time {t:?}"),
            })?;
            if !time_ns.is_finite() || time_ns < 0.0 {
                return Err(StreamError::BadTextLine {
                    line: idx + 1,
                    reason: format!("time {time_ns} out of range"),
                });
            }
            let tick = (time_ns * PS_PER_NS).round() as u64;
            match ch {
                "a" | "A" | "0" => channel_a.push(tick),
                "b" | "B" | "1" => channel_b.push(tick),
                other => {
                    return Err(StreamError::BadTextLine {
                        line: idx + 1,
                        reason: format!("unknown channel {other:?}"),
                    })
                }
            }
        }
        for ch in [&mut channel_a, &mut channel_b] {
            ch.sort_unstable();
            ch.dedup();
        }
        let max_tick = channel_a.iter().chain(&channel_b).max().copied().unwrap_or(0);
        let duration_ps = duration_ps.unwrap_or(max_tick + 1);
        let stream = Self { channel_a, channel_b, duration_ps, metadata: None };
        stream.validate()?;
        Ok(stream)
    }
}
