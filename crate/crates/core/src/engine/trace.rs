use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use super::SimTime;

pub const TRACE_HEADER: &str = "time_ns,node,event_kind,detail";

/// One line of an event trace: `time_ns,node,event_kind,detail`.
///
/// `detail` is a space-separated list of `key=value` pairs and never
/// contains a comma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: u32,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceParseError {
    #[error("line {line}: expected 4 comma-separated fields")]
    FieldCount { line: usize },
    #[error("line {line}: bad {field}")]
    BadField { line: usize, field: &'static str },
}

impl TraceRecord {
    pub fn new(time: SimTime, node: u32, kind: &str, detail: impl Into<String>) -> Self {
        let mut detail = detail.into();
        if detail.contains(',') {
            detail = detail.replace(',', ";");
        }
        TraceRecord {
            time,
            node,
            kind: kind.to_string(),
            detail,
        }
    }

    /// Value of `key=...` inside the detail field.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.detail.split(' ').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then_some(v)
        })
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.get(key)?.parse().ok()
    }

    fn parse_line(s: &str, line: usize) -> Result<Self, TraceParseError> {
        let mut it = s.splitn(4, ',');
        let (t, n, k, d) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(t), Some(n), Some(k), Some(d)) => (t, n, k, d),
            _ => return Err(TraceParseError::FieldCount { line }),
        };
        let time = t
            .parse()
            .map(SimTime)
            .map_err(|_| TraceParseError::BadField { line, field: "time_ns" })?;
        let node = n
            .parse()
            .map_err(|_| TraceParseError::BadField { line, field: "node" })?;
        if k.is_empty() {
            return Err(TraceParseError::BadField {
                line,
                field: "event_kind",
            });
        }
        Ok(TraceRecord {
            time,
            node,
            kind: k.to_string(),
            detail: d.to_string(),
        })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.time.0, self.node, self.kind, self.detail)
    }
}

impl FromStr for TraceRecord {
    type Err = TraceParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_line(s, 1)
    }
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Parse(#[from] TraceParseError),
}

/// Reads a trace file; the header line is optional.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceReadError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() || (i == 0 && line == TRACE_HEADER) {
            continue;
        }
        out.push(TraceRecord::parse_line(line, i + 1)?);
    }
    Ok(out)
}
