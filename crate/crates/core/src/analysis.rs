//! Queries over simulation traces: per-node timelines, idle gaps between
//! OBSS transmissions and trigger postponement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Duration, SimTime, TraceRecord};
use crate::scenario::REFERENCE_BSS;

/// OBSS transmissions closer than this merge into one busy period.
pub const DEFAULT_MERGE_GAP: Duration = Duration(16_000);
/// Shortest idle interval counted as a usable gap (AIFS of the highest AC).
pub const DEFAULT_MIN_GAP: Duration = Duration(34_000);

pub fn node_timeline(records: &[TraceRecord], node: u32) -> Vec<&TraceRecord> {
    records.iter().filter(|r| r.node == node).collect()
}

/// BSS of every node, read from the `node` records at the head of a trace.
pub fn node_bss(records: &[TraceRecord]) -> HashMap<u32, u32> {
    records
        .iter()
        .filter(|r| r.kind == "node")
        .filter_map(|r| Some((r.node, r.get_u64("bss")? as u32)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Idle gaps between OBSS busy periods during which BSS1 had backlog.
    pub gaps: u64,
    /// Of those, gaps in which some BSS1 node started a transmission.
    pub used: u64,
    pub idle_ns: u64,
}

impl GapReport {
    pub fn utilization(&self) -> f64 {
        if self.gaps == 0 {
            0.0
        } else {
            self.used as f64 / self.gaps as f64
        }
    }
}

/// Scans the idle intervals between OBSS busy periods and counts how many
/// the reference BSS used while it had packets waiting.
pub fn gap_analysis(records: &[TraceRecord], merge_gap: Duration, min_gap: Duration) -> GapReport {
    let bss = node_bss(records);
    let is_ref = |n: u32| bss.get(&n) == Some(&REFERENCE_BSS);

    let mut obss: Vec<(SimTime, SimTime)> = records
        .iter()
        .filter(|r| r.kind == "tx_start" && !is_ref(r.node))
        .filter_map(|r| Some((r.time, SimTime(r.get_u64("end")?))))
        .collect();
    obss.sort_unstable();
    let mut busy: Vec<(SimTime, SimTime)> = Vec::new();
    for (s, e) in obss {
        match busy.last_mut() {
            Some(last) if s <= last.1 + merge_gap => last.1 = last.1.max(e),
            _ => busy.push((s, e)),
        }
    }

    // BSS1 backlog as a step function, and BSS1 transmission starts.
    let mut steps: Vec<(SimTime, i64)> = Vec::new();
    let mut ref_starts: Vec<SimTime> = Vec::new();
    for r in records.iter().filter(|r| is_ref(r.node)) {
        match r.kind.as_str() {
            "arrival" => steps.push((r.time, 1)),
            "delivered" | "dropped" => steps.push((r.time, -1)),
            "tx_start" => ref_starts.push(r.time),
            _ => {}
        }
    }
    steps.sort_by_key(|s| s.0);
    ref_starts.sort_unstable();

    let mut report = GapReport::default();
    let mut backlog = 0i64;
    let mut si = 0;
    for w in busy.windows(2) {
        let (gap_start, gap_end) = (w[0].1, w[1].0);
        if gap_end.since(gap_start.min(gap_end)) < min_gap {
            continue;
        }
        while si < steps.len() && steps[si].0 <= gap_start {
            backlog += steps[si].1;
            si += 1;
        }
        if backlog <= 0 {
            continue;
        }
        report.gaps += 1;
        report.idle_ns += (gap_end - gap_start).0;
        let first = ref_starts.partition_point(|&t| t < gap_start);
        if ref_starts.get(first).is_some_and(|&t| t < gap_end) {
            report.used += 1;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PostponementReport {
    /// Trigger cycles with a BSRP in the trace.
    pub cycles: u64,
    pub postponed: u64,
    pub mean_us: f64,
    pub max_us: f64,
}

/// Delay between each cycle's due time and its first BSRP.
pub fn trigger_postponement(records: &[TraceRecord]) -> PostponementReport {
    let mut seen: HashMap<u64, u64> = HashMap::new();
    for r in records {
        if r.kind != "tx_start" || r.get("frame") != Some("bsrp") {
            continue;
        }
        let (Some(cycle), Some(due)) = (r.get_u64("cycle"), r.get_u64("due")) else {
            continue;
        };
        seen.entry(cycle).or_insert(r.time.0.saturating_sub(due));
    }
    let delays: Vec<u64> = seen.into_values().collect();
    let postponed: Vec<u64> = delays.iter().copied().filter(|&d| d > 0).collect();
    let mean_us = if postponed.is_empty() {
        0.0
    } else {
        postponed.iter().sum::<u64>() as f64 / postponed.len() as f64 / 1e3
    };
    PostponementReport {
        cycles: delays.len() as u64,
        postponed: postponed.len() as u64,
        mean_us,
        max_us: postponed.iter().copied().max().unwrap_or(0) as f64 / 1e3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, node: u32, kind: &str, detail: &str) -> TraceRecord {
        TraceRecord::new(SimTime(t), node, kind, detail)
    }

    fn header() -> Vec<TraceRecord> {
        vec![rec(0, 0, "node", "bss=1 role=ap"), rec(0, 1, "node", "bss=1 role=sta"), rec(0, 5, "node", "bss=2 role=ap")]
    }

    #[test]
    fn gaps_merge_and_usage() {
        let mut t = header();
        t.push(rec(0, 1, "arrival", "packet=0"));
        // OBSS busy [0,100us], [110us,200us] merged; gap to 300us; gap to 340us too short for use
        t.push(rec(0, 5, "tx_start", "frame=data end=100000"));
        t.push(rec(110_000, 5, "tx_start", "frame=data end=200000"));
        t.push(rec(250_000, 1, "tx_start", "frame=data end=260000"));
        t.push(rec(300_000, 5, "tx_start", "frame=data end=400000"));
        t.push(rec(450_000, 5, "tx_start", "frame=data end=500000"));
        let g = gap_analysis(&t, DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP);
        assert_eq!(g.gaps, 2);
        assert_eq!(g.used, 1);
        assert_eq!(g.utilization(), 0.5);
    }

    #[test]
    fn no_backlog_no_gap() {
        let mut t = header();
        t.push(rec(0, 5, "tx_start", "frame=data end=100000"));
        t.push(rec(300_000, 5, "tx_start", "frame=data end=400000"));
        assert_eq!(gap_analysis(&t, DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP).gaps, 0);
    }

    #[test]
    fn postponement_counts_first_attempt_only() {
        let t = vec![
            rec(1_000, 0, "tx_start", "frame=bsrp cycle=0 due=1000"),
            rec(9_000, 0, "tx_start", "frame=bsrp cycle=1 due=5000"),
            rec(20_000, 0, "tx_start", "frame=bsrp cycle=1 due=5000"),
        ];
        let p = trigger_postponement(&t);
        assert_eq!(p.cycles, 2);
        assert_eq!(p.postponed, 1);
        assert!((p.mean_us - 4.0).abs() < 1e-12);
        assert_eq!(trigger_postponement(&[]), PostponementReport::default());
    }
}
