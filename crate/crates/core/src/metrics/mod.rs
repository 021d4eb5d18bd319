//! Per-packet delay records, empirical CDFs and result files.

use std::collections::HashSet;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::numfmt::sig9;
use crate::phy::NodeId;

/// Percentile grid used for dominance checks and summaries.
pub const PERCENTILE_GRID: [f64; 6] = [0.10, 0.25, 0.50, 0.75, 0.90, 0.99];

pub const CDF_CSV_HEADER: &str = "delay_us,cum_fraction";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("duplicate packet id {0}")]
    DuplicatePacket(u64),
    #[error("packet {0} delivered before it was generated")]
    DeliveredBeforeGenerated(u64),
    #[error("no delivered samples")]
    Empty,
    #[error("percentile {0} outside (0, 1]")]
    BadPercentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub packet_id: u64,
    pub source: NodeId,
    pub generated_at: SimTime,
    /// `None` when the packet was dropped.
    pub delivered_at: Option<SimTime>,
    pub retries: u32,
}

impl DelayRecord {
    pub fn delay_ns(&self) -> Option<u64> {
        self.delivered_at.map(|d| d.0 - self.generated_at.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recorded {
    Delivered,
    Dropped,
    WarmupIgnored,
}

/// Gathers delay records of one run, ignoring packets generated during
/// the warm-up.
#[derive(Debug, Clone, Default)]
pub struct DelayCollector {
    warmup_end: SimTime,
    seen: HashSet<u64>,
    records: Vec<DelayRecord>,
    dropped: u64,
}

impl DelayCollector {
    pub fn new(warmup_end: SimTime) -> Self {
        DelayCollector {
            warmup_end,
            ..Default::default()
        }
    }

    pub fn record_delivery(&mut self, rec: DelayRecord) -> Result<Recorded, MetricsError> {
        if let Some(d) = rec.delivered_at {
            if d < rec.generated_at {
                return Err(MetricsError::DeliveredBeforeGenerated(rec.packet_id));
            }
        }
        if rec.generated_at < self.warmup_end {
            return Ok(Recorded::WarmupIgnored);
        }
        if !self.seen.insert(rec.packet_id) {
            return Err(MetricsError::DuplicatePacket(rec.packet_id));
        }
        if rec.delivered_at.is_some() {
            self.records.push(rec);
            Ok(Recorded::Delivered)
        } else {
            self.dropped += 1;
            Ok(Recorded::Dropped)
        }
    }

    pub fn sample_count(&self) -> usize {
        self.records.len()
    }

    pub fn drop_count(&self) -> u64 {
        self.dropped
    }

    pub fn records(&self) -> &[DelayRecord] {
        &self.records
    }

    pub fn count_from(&self, node: NodeId) -> usize {
        self.records.iter().filter(|r| r.source == node).count()
    }

    pub fn ecdf(&self) -> Result<EcdfTable, MetricsError> {
        ecdf(&self.records).map(|t| t.with_drops(self.dropped))
    }
}

/// Sorted delay sample with its drop count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EcdfTable {
    /// Delays in nanoseconds, ascending.
    values: Vec<u64>,
    drops: u64,
}

/// Empirical CDF of the delivered records; dropped ones are only counted.
pub fn ecdf(records: &[DelayRecord]) -> Result<EcdfTable, MetricsError> {
    let mut values: Vec<u64> = records.iter().filter_map(DelayRecord::delay_ns).collect();
    let drops = (records.len() - values.len()) as u64;
    EcdfTable::from_delays_ns(std::mem::take(&mut values)).map(|t| t.with_drops(drops))
}

impl EcdfTable {
    pub fn from_delays_ns(mut values: Vec<u64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::Empty);
        }
        values.sort_unstable();
        Ok(EcdfTable { values, drops: 0 })
    }

    fn with_drops(mut self, drops: u64) -> Self {
        self.drops = drops;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn drop_count(&self) -> u64 {
        self.drops
    }

    pub fn values_ns(&self) -> &[u64] {
        &self.values
    }

    /// `F(x) = #{v ≤ x} / n`.
    pub fn cdf_at(&self, x_ns: u64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x_ns);
        k as f64 / self.values.len() as f64
    }

    /// Nearest-rank percentile: the value at rank `ceil(p·n)`.
    pub fn percentile(&self, p: f64) -> Result<u64, MetricsError> {
        if self.values.is_empty() {
            return Err(MetricsError::Empty);
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(MetricsError::BadPercentile(p));
        }
        let n = self.values.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.values[rank - 1])
    }

    pub fn mean_ns(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Distinct steps `(value, F(value))`, ascending.
    pub fn steps(&self) -> Vec<(u64, f64)> {
        let n = self.values.len() as f64;
        let mut out: Vec<(u64, f64)> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    /// Pools two samples; associative and commutative.
    pub fn merge(&self, other: &EcdfTable) -> EcdfTable {
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        let (mut i, mut j) = (0, 0);
        while i < self.values.len() && j < other.values.len() {
            if self.values[i] <= other.values[j] {
                values.push(self.values[i]);
                i += 1;
            } else {
                values.push(other.values[j]);
                j += 1;
            }
        }
        values.extend_from_slice(&self.values[i..]);
        values.extend_from_slice(&other.values[j..]);
        EcdfTable {
            values,
            drops: self.drops + other.drops,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CDF_CSV_HEADER}")?;
        for (v, f) in self.steps() {
            writeln!(out, "{},{}", format_us(v), sig9(f))?;
        }
        Ok(())
    }

    pub fn summary(&self, scenario: &str, seed: u64) -> Summary {
        Summary {
            scenario: scenario.to_string(),
            seed,
            count: self.values.len() as u64,
            drops: self.drops,
            mean_us: self.mean_ns() * 1e-3,
            percentiles: PERCENTILE_GRID
                .iter()
                .map(|&p| PercentilePoint {
                    p,
                    delay_us: self.percentile(p).expect("nonempty") as f64 * 1e-3,
                })
                .collect(),
        }
    }
}

/// Nanoseconds as microseconds with three decimals, exact.
pub fn format_us(ns: u64) -> String {
    format!("{}.{:03}", ns / 1_000, ns % 1_000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentilePoint {
    pub p: f64,
    pub delay_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub count: u64,
    pub drops: u64,
    pub mean_us: f64,
    pub percentiles: Vec<PercentilePoint>,
}

impl Summary {
    pub fn percentile_us(&self, p: f64) -> Option<f64> {
        self.percentiles
            .iter()
            .find(|x| (x.p - p).abs() < 1e-12)
            .map(|x| x.delay_us)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridComparison {
    pub p: f64,
    pub a_us: f64,
    pub b_us: f64,
    pub a_le_b: bool,
}

/// Percentile-grid comparison of two delay distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub grid: Vec<GridComparison>,
    /// `a` is no worse than `b` at every grid point.
    pub a_dominates: bool,
    pub b_dominates: bool,
}

pub fn compare_runs(a: &EcdfTable, b: &EcdfTable) -> Result<DominanceReport, MetricsError> {
    let mut grid = Vec::with_capacity(PERCENTILE_GRID.len());
    let mut b_le_a = true;
    for &p in &PERCENTILE_GRID {
        let (va, vb) = (a.percentile(p)?, b.percentile(p)?);
        b_le_a &= vb <= va;
        grid.push(GridComparison {
            p,
            a_us: va as f64 * 1e-3,
            b_us: vb as f64 * 1e-3,
            a_le_b: va <= vb,
        });
    }
    Ok(DominanceReport {
        a_dominates: grid.iter().all(|g| g.a_le_b),
        b_dominates: b_le_a,
        grid,
    })
}

/// `<scenario-stem>_seed<seed>` used for result file names.
pub fn result_stem(scenario_stem: &str, seed: u64) -> String {
    format!("{scenario_stem}_seed{seed}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: &[u64]) -> EcdfTable {
        EcdfTable::from_delays_ns(v.iter().map(|x| x * 1_000_000).collect()).unwrap()
    }

    fn rec(id: u64, gen: u64, del: Option<u64>) -> DelayRecord {
        DelayRecord {
            packet_id: id,
            source: 1,
            generated_at: SimTime(gen),
            delivered_at: del.map(SimTime),
            retries: 0,
        }
    }

    #[test]
    fn collector_rules() {
        let mut c = DelayCollector::new(SimTime(100));
        assert_eq!(c.record_delivery(rec(1, 200, Some(300))).unwrap(), Recorded::Delivered);
        assert_eq!(c.sample_count(), 1);
        assert_eq!(c.record_delivery(rec(2, 200, None)).unwrap(), Recorded::Dropped);
        assert_eq!(c.drop_count(), 1);
        assert_eq!(c.record_delivery(rec(3, 50, Some(300))).unwrap(), Recorded::WarmupIgnored);
        assert_eq!(
            c.record_delivery(rec(1, 200, Some(400))),
            Err(MetricsError::DuplicatePacket(1))
        );
        assert!(c.record_delivery(rec(9, 500, Some(400))).is_err());
        let t = c.ecdf().unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.drop_count(), 1);
    }

    #[test]
    fn cdf_and_percentiles() {
        let t = ms(&[1, 2, 3]);
        assert!((t.cdf_at(2_000_000) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.cdf_at(0), 0.0);
        assert_eq!(t.cdf_at(u64::MAX), 1.0);
        let u = ms(&[5, 1, 3]);
        assert_eq!(u.percentile(0.5).unwrap(), 3_000_000);
        assert_eq!(u.percentile(1.0).unwrap(), 5_000_000);
        assert_eq!(u.percentile(1e-9).unwrap(), 1_000_000);
        assert!(u.percentile(0.0).is_err());
        assert!(u.percentile(1.1).is_err());
        let flat = ms(&[4, 4, 4]);
        assert_eq!(flat.steps(), vec![(4_000_000, 1.0)]);
        assert!(EcdfTable::from_delays_ns(vec![]).is_err());
    }

    #[test]
    fn exponential_median() {
        let mut rng = crate::engine::RngStream::new(11, 0);
        let mean_us = 500.0;
        let v: Vec<u64> = (0..10_000)
            .map(|_| (-(1.0 - rng.unit()).ln() * mean_us * 1e3) as u64)
            .collect();
        let t = EcdfTable::from_delays_ns(v).unwrap();
        let median = (mean_us * std::f64::consts::LN_2 * 1e3) as u64;
        assert!((t.cdf_at(median) - 0.5).abs() < 0.02);
    }

    #[test]
    fn dominance() {
        let a = ms(&[1, 2, 3, 4, 5]);
        let same = compare_runs(&a, &a).unwrap();
        assert!(same.a_dominates && same.b_dominates);
        let shifted = ms(&[2, 3, 4, 5, 6]);
        let r = compare_runs(&a, &shifted).unwrap();
        assert!(r.a_dominates && !r.b_dominates);
        assert_eq!(r.grid.len(), 6);
    }

    #[test]
    fn merge_is_pooling() {
        let a = ms(&[1, 5]);
        let b = ms(&[3]);
        let c = ms(&[2, 2]);
        assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        assert_eq!(a.merge(&b), b.merge(&a));
        assert_eq!(a.merge(&b).values_ns(), &[1_000_000, 3_000_000, 5_000_000]);
    }

    #[test]
    fn csv_and_summary() {
        let t = ms(&[1, 1, 2]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "delay_us,cum_fraction\n1000.000,0.666666667\n2000.000,1\n");
        let sum = t.summary("x", 3);
        assert_eq!(sum.count, 3);
        assert_eq!(sum.percentile_us(0.5), Some(1000.0));
        assert_eq!(format_us(80_800), "80.800");
    }
}
