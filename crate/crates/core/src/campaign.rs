//! Single runs with result files, and the seeded batch over the scenario
//! matrix with its comparison report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{gap_analysis, trigger_postponement, GapReport, PostponementReport};
use crate::analysis::{DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP};
use crate::engine::write_trace;
use crate::mac::AcIndex;
use crate::metrics::{compare_runs, result_stem, DominanceReport, EcdfTable, MetricsError, Summary};
use crate::scenario::{scenario_matrix, ObssLoad, ScenarioConfig};
use crate::sim::{simulate, SimError, SimOptions, TriggerStats};
use crate::ProtocolKind;

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const COMPARISON_FILE: &str = "comparison.json";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{scenario} seed {seed}: {source}")]
    Metrics {
        scenario: String,
        seed: u64,
        source: MetricsError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{scenario} seed {seed}: {count} MAC invariant violation(s), first: {first}")]
    Invariant {
        scenario: String,
        seed: u64,
        count: u64,
        first: String,
    },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Directory for the CDF, summary and (optional) trace files.
    pub out_dir: Option<PathBuf>,
    pub write_trace: bool,
    /// Keep a trace in memory for gap and postponement statistics.
    pub analyze: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: String,
    pub protocol: ProtocolKind,
    pub obss_load: ObssLoad,
    pub obss_ac: AcIndex,
    pub seed: u64,
    pub table: EcdfTable,
    pub summary: Summary,
    pub trigger: Option<TriggerStats>,
    pub gaps: Option<GapReport>,
    pub postponement: Option<PostponementReport>,
    pub events: u64,
    pub files: Vec<PathBuf>,
}

/// Runs one scenario, writing `<stem>_seed<seed>_{cdf.csv,summary.json}`
/// (and `_trace.csv`) when an output directory is given. Any MAC invariant
/// violation is an error.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, CampaignError> {
    let want_trace = opts.write_trace || opts.analyze;
    let result = simulate(cfg, &SimOptions { trace: want_trace })?;
    let metrics_err = |source| CampaignError::Metrics {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        source,
    };
    let table = result.delays.ecdf().map_err(metrics_err)?;
    let summary = table.summary(&cfg.name, cfg.seed);
    let (gaps, postponement) = match (&result.trace, opts.analyze) {
        (Some(t), true) => (
            Some(gap_analysis(t, DEFAULT_MERGE_GAP, DEFAULT_MIN_GAP)),
            (cfg.protocol == ProtocolKind::TriggerBased).then(|| trigger_postponement(t)),
        ),
        _ => (None, None),
    };
    let mut files = Vec::new();
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let stem = result_stem(&cfg.file_stem(), cfg.seed);
        let cdf = dir.join(format!("{stem}_cdf.csv"));
        write_with(&cdf, |w| table.write_csv(w))?;
        files.push(cdf);
        let sum = dir.join(format!("{stem}_summary.json"));
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        fs::write(&sum, text).map_err(io_err(&sum))?;
        files.push(sum);
        if opts.write_trace {
            if let Some(t) = &result.trace {
                let path = dir.join(format!("{stem}_trace.csv"));
                write_with(&path, |w| write_trace(t, w))?;
                files.push(path);
            }
        }
    }
    if !result.invariants.is_clean() {
        let first = result
            .invariants
            .violations()
            .first()
            .map(ToString::to_string)
            .unwrap_or_default();
        return Err(CampaignError::Invariant {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            count: result.invariants.total(),
            first,
        });
    }
    Ok(RunOutcome {
        scenario: cfg.name.clone(),
        protocol: cfg.protocol,
        obss_load: cfg.obss_load,
        obss_ac: cfg.obss_ac,
        seed: cfg.seed,
        table,
        summary,
        trigger: result.trigger,
        gaps,
        postponement,
        events: result.events,
        files,
    })
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CampaignError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub protocols: Vec<ProtocolKind>,
    pub seeds: Vec<u64>,
    pub duration_s: Option<f64>,
    /// Concurrent runs; 0 uses one per core.
    pub workers: usize,
    pub run: RunOptions,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            protocols: ProtocolKind::ALL.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            duration_s: None,
            workers: 0,
            run: RunOptions::default(),
        }
    }
}

impl BatchConfig {
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for base in scenario_matrix()
            .into_iter()
            .filter(|c| self.protocols.contains(&c.protocol))
        {
            for &seed in &self.seeds {
                let mut cfg = base.clone().with_seed(seed);
                if let Some(d) = self.duration_s {
                    cfg = cfg.with_duration(d);
                }
                out.push(cfg);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub scenario: String,
    pub seed: u64,
    pub error: String,
    /// The run completed but tripped a MAC invariant.
    pub invariant: bool,
}

#[derive(Debug)]
pub struct BatchReport {
    pub runs: Vec<RunOutcome>,
    pub failures: Vec<RunFailure>,
    pub comparison: ComparisonReport,
}

/// Runs the scenario × seed product on a bounded pool. Results come back
/// in scenario order regardless of scheduling.
pub fn run_batch(batch: &BatchConfig) -> Result<BatchReport, CampaignError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch.workers)
        .build()?;
    let scenarios = batch.scenarios();
    let results: Vec<Result<RunOutcome, CampaignError>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|cfg| {
                let r = run_scenario(cfg, &batch.run);
                match &r {
                    Ok(o) => log::info!("{} seed {}: {} samples", o.scenario, o.seed, o.summary.count),
                    Err(e) => log::error!("{} seed {}: {e}", cfg.name, cfg.seed),
                }
                r
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (cfg, r) in scenarios.iter().zip(results) {
        match r {
            Ok(o) => runs.push(o),
            Err(e) => failures.push(RunFailure {
                scenario: cfg.name.clone(),
                seed: cfg.seed,
                invariant: matches!(e, CampaignError::Invariant { .. }),
                error: e.to_string(),
            }),
        }
    }
    let comparison = ComparisonReport::build(&runs);
    if let Some(dir) = &batch.run.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(COMPARISON_FILE);
        let mut text = serde_json::to_string_pretty(&comparison)?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(BatchReport {
        runs,
        failures,
        comparison,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub obss_load: ObssLoad,
    pub obss_ac: AcIndex,
    pub seed: u64,
    pub report: DominanceReport,
}

impl PairVerdict {
    fn point(&self, p: f64) -> Option<(f64, f64)> {
        self.report
            .grid
            .iter()
            .find(|g| (g.p - p).abs() < 1e-12)
            .map(|g| (g.a_us, g.b_us))
    }

    /// Sharing no worse than EDCA at the median and the 90th percentile.
    pub fn median_and_p90_le(&self) -> bool {
        [0.5, 0.9]
            .iter()
            .all(|&p| self.point(p).is_some_and(|(a, b)| a <= b))
    }

    pub fn p90_strictly_lower(&self) -> bool {
        self.point(0.9).is_some_and(|(a, b)| a < b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcTrend {
    pub protocol: ProtocolKind,
    pub obss_load: ObssLoad,
    pub seed: u64,
    pub p90_ac0_us: f64,
    pub p90_ac3_us: f64,
}

impl AcTrend {
    pub fn holds(&self) -> bool {
        self.p90_ac3_us >= self.p90_ac0_us
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub protocol: ProtocolKind,
    pub obss_load: ObssLoad,
    pub obss_ac: AcIndex,
    pub seed: u64,
    pub gaps: GapReport,
    pub utilization: f64,
    pub postponement: Option<PostponementReport>,
}

/// Cross-run verdicts: sharing against trigger and against EDCA per load,
/// OBSS AC and seed; the OBSS-AC trend; and idle-gap usage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sharing_vs_trigger: Vec<PairVerdict>,
    pub sharing_vs_edca: Vec<PairVerdict>,
    pub ac_trend: Vec<AcTrend>,
    pub gap_usage: Vec<GapRow>,
}

impl ComparisonReport {
    pub fn build(runs: &[RunOutcome]) -> Self {
        let find = |p: ProtocolKind, l: ObssLoad, ac: AcIndex, seed: u64| {
            runs.iter()
                .find(|r| r.protocol == p && r.obss_load == l && r.obss_ac == ac && r.seed == seed)
        };
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut report = ComparisonReport::default();
        for load in ObssLoad::ALL {
            for ac in [AcIndex::AC0, AcIndex::AC3] {
                for &seed in &seeds {
                    let Some(sharing) = find(ProtocolKind::SharingBased, load, ac, seed) else {
                        continue;
                    };
                    for (other, out) in [
                        (ProtocolKind::TriggerBased, &mut report.sharing_vs_trigger),
                        (ProtocolKind::Edca, &mut report.sharing_vs_edca),
                    ] {
                        if let Some(o) = find(other, load, ac, seed) {
                            if let Ok(r) = compare_runs(&sharing.table, &o.table) {
                                out.push(PairVerdict {
                                    obss_load: load,
                                    obss_ac: ac,
                                    seed,
                                    report: r,
                                });
                            }
                        }
                    }
                }
            }
            for protocol in ProtocolKind::ALL {
                for &seed in &seeds {
                    let (Some(a0), Some(a3)) = (
                        find(protocol, load, AcIndex::AC0, seed),
                        find(protocol, load, AcIndex::AC3, seed),
                    ) else {
                        continue;
                    };
                    if let (Some(p0), Some(p3)) =
                        (a0.summary.percentile_us(0.9), a3.summary.percentile_us(0.9))
                    {
                        report.ac_trend.push(AcTrend {
                            protocol,
                            obss_load: load,
                            seed,
                            p90_ac0_us: p0,
                            p90_ac3_us: p3,
                        });
                    }
                }
            }
        }
        for r in runs {
            if let Some(g) = r.gaps {
                report.gap_usage.push(GapRow {
                    protocol: r.protocol,
                    obss_load: r.obss_load,
                    obss_ac: r.obss_ac,
                    seed: r.seed,
                    gaps: g,
                    utilization: g.utilization(),
                    postponement: r.postponement,
                });
            }
        }
        report
    }

    pub fn gap_utilization(&self, p: ProtocolKind, load: ObssLoad, ac: AcIndex, seed: u64) -> Option<f64> {
        self.gap_usage
            .iter()
            .find(|g| g.protocol == p && g.obss_load == load && g.obss_ac == ac && g.seed == seed)
            .map(|g| g.utilization)
    }

    /// Plain-text tables of the verdicts.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let pair = |s: &mut String, title: &str, rows: &[PairVerdict], edca: bool| {
            s.push_str(&format!("## {title}\nload\tac\tseed\tp50 (us)\tp90 (us)\tverdict\n"));
            for r in rows {
                let p50 = r.point(0.5).unwrap_or_default();
                let p90 = r.point(0.9).unwrap_or_default();
                let ok = if edca { r.median_and_p90_le() } else { r.report.a_dominates };
                s.push_str(&format!(
                    "{}\t{}\t{}\t{:.1}/{:.1}\t{:.1}/{:.1}\t{}\n",
                    r.obss_load,
                    r.obss_ac,
                    r.seed,
                    p50.0,
                    p50.1,
                    p90.0,
                    p90.1,
                    if ok { "sharing<=" } else { "sharing>" }
                ));
            }
            s.push('\n');
        };
        pair(&mut s, "sharing vs trigger", &self.sharing_vs_trigger, false);
        pair(&mut s, "sharing vs edca", &self.sharing_vs_edca, true);
        s.push_str("## p90 by OBSS AC\nprotocol\tload\tseed\tac0 (us)\tac3 (us)\n");
        for t in &self.ac_trend {
            s.push_str(&format!(
                "{}\t{}\t{}\t{:.1}\t{:.1}\n",
                t.protocol, t.obss_load, t.seed, t.p90_ac0_us, t.p90_ac3_us
            ));
        }
        if !self.gap_usage.is_empty() {
            s.push_str("\n## idle-gap usage\nprotocol\tload\tac\tseed\tgaps\tused\tratio\tpostponed\n");
            for g in &self.gap_usage {
                let post = g
                    .postponement
                    .map(|p| format!("{}/{}", p.postponed, p.cycles))
                    .unwrap_or_else(|| "-".into());
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{}\n",
                    g.protocol, g.obss_load, g.obss_ac, g.seed, g.gaps.gaps, g.gaps.used, g.utilization, post
                ));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::preset(ProtocolKind::TriggerBased, ObssLoad::Light, AcIndex::AC0)
            .with_seed(3)
            .with_duration(1.0);
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            write_trace: true,
            analyze: true,
        };
        let a = run_scenario(&cfg, &opts).unwrap();
        assert_eq!(a.files.len(), 3);
        let bytes: Vec<Vec<u8>> = a.files.iter().map(|f| fs::read(f).unwrap()).collect();
        let b = run_scenario(&cfg, &opts).unwrap();
        for (f, old) in b.files.iter().zip(&bytes) {
            assert_eq!(&fs::read(f).unwrap(), old, "{}", f.display());
        }
        assert!(a.files[0].ends_with("trigger_obss-light_ac0_seed3_cdf.csv"));
        assert!(a.postponement.is_some() && a.gaps.is_some());
    }

    #[test]
    fn batch_shape() {
        let batch = BatchConfig {
            protocols: vec![ProtocolKind::SharingBased, ProtocolKind::TriggerBased],
            seeds: vec![1],
            duration_s: Some(1.0),
            workers: 2,
            run: RunOptions::default(),
        };
        assert_eq!(batch.scenarios().len(), 12);
        let r = run_batch(&batch).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.runs.len(), 12);
        assert_eq!(r.comparison.sharing_vs_trigger.len(), 6);
        assert!(r.comparison.sharing_vs_edca.is_empty());
        assert!(r.comparison.render().contains("sharing vs trigger"));
    }
}
