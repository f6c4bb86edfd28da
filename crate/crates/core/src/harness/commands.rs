//! The operations behind each command-line subcommand.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::finite_key::{key_length_nonblock, SampleCounts};
use crate::harness::config::{load_config, ExperimentConfig, StationPair};
use crate::harness::experiment::{
    evaluate_cell, normalize_by_altitude, rows_for_cell, run_sweep, run_trace, CellResult,
    ResultRow,
};
use crate::harness::io::{self, PlotData, TraceMeta};
use crate::strategy::{
    aggregate_qber, apply_threshold, evaluate_block, evaluate_nonblock, pick_best, BlockingPolicy,
    FidelityTrace, StrategyOutcome,
};

/// `--altitude` and `--pair` values; empty lists leave the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub altitudes: Vec<f64>,
    pub pairs: Vec<StationPair>,
}

/// Loads `path` (or the built-in defaults) and applies command-line overrides.
pub fn resolve_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if !overrides.altitudes.is_empty() {
        cfg.altitudes = overrides.altitudes.clone();
    }
    if !overrides.pairs.is_empty() {
        cfg.pairs = overrides.pairs.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn altitude_tag(altitude: f64) -> String {
    format!("{}m", altitude)
}

pub fn trace_file_name(pair: &StationPair, altitude: f64) -> String {
    format!("trace_{}_{}.csv", pair.slug(), altitude_tag(altitude))
}

fn minute_file_name(pair: &StationPair, altitude: f64) -> String {
    format!("trace_{}_{}_minute.csv", pair.slug(), altitude_tag(altitude))
}

/// Writes one trace CSV (and its per-minute plot data) per pair and altitude.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let mut written = Vec::new();
    for pair in &cfg.pairs {
        for alt in cfg.altitudes() {
            let trace = run_trace(cfg, pair, alt)?;
            let path = out.join(trace_file_name(pair, alt));
            io::emit_trace_csv(&trace, &path, &TraceMeta::new(hash.clone(), Some(alt)))?;
            written.push(path);
            let path = out.join(minute_file_name(pair, alt));
            io::emit_plotdata(PlotData::Trace(&trace), &path, &hash)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Which strategy `keyrate` evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyChoice {
    NonBlockwise,
    Policy(BlockingPolicy),
    /// The best of the config's policies.
    BestBlockwise,
}

impl FromStr for StrategyChoice {
    type Err = Error;

    /// `non-blockwise`, `2-block`, `3-block`, `best`, or comma-separated boundaries.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "non-blockwise" => StrategyChoice::NonBlockwise,
            "2-block" => StrategyChoice::Policy(BlockingPolicy::two_block()),
            "3-block" => StrategyChoice::Policy(BlockingPolicy::three_block()),
            "best" | "best-blockwise" => StrategyChoice::BestBlockwise,
            other => {
                let bounds = other
                    .split(',')
                    .map(|b| b.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| {
                        Error::validation("strategy", format!("unrecognised strategy `{other}`"))
                    })?;
                StrategyChoice::Policy(BlockingPolicy::new(bounds)?)
            }
        })
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyChoice::NonBlockwise => f.write_str("non-blockwise"),
            StrategyChoice::Policy(p) => f.write_str(&p.label()),
            StrategyChoice::BestBlockwise => f.write_str("best-blockwise"),
        }
    }
}

pub fn evaluate_strategy(
    cfg: &ExperimentConfig,
    trace: &FidelityTrace,
    choice: &StrategyChoice,
) -> Result<StrategyOutcome> {
    let grids = cfg.search_grids()?;
    match choice {
        StrategyChoice::NonBlockwise => evaluate_nonblock(trace, &grids, &cfg.security),
        StrategyChoice::Policy(p) => evaluate_block(trace, p, &grids, &cfg.security),
        StrategyChoice::BestBlockwise => {
            let outcomes = cfg
                .policies
                .iter()
                .map(|p| evaluate_block(trace, p, &grids, &cfg.security))
                .collect::<Result<Vec<_>>>()?;
            pick_best(&outcomes)
                .cloned()
                .ok_or_else(|| Error::validation("policies", "need at least one blocking policy"))
        }
    }
}

/// Key length of a stored trace under one strategy.
pub fn keyrate(cfg: &ExperimentConfig, trace_path: &Path, choice: &StrategyChoice) -> Result<StrategyOutcome> {
    let trace = io::read_trace_csv(trace_path)?;
    evaluate_strategy(cfg, &trace, choice)
}

pub fn format_outcome(outcome: &StrategyOutcome) -> String {
    let mut s = format!("strategy={} secret_bits={}\n", outcome.label, outcome.secret_bits);
    for (i, b) in outcome.per_block.iter().enumerate() {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
        s.push_str(&format!(
            "  block {i} [{}, {}): bucket_bits={} block_bits={} test_bits={} qber={} threshold={} sampling_rate={} secret_bits={}\n",
            b.range.lo,
            b.range.hi,
            b.bucket_bits,
            b.block_bits,
            b.test_bits,
            show(b.qber),
            show(b.threshold),
            show(b.sampling_rate),
            b.secret_bits
        ));
    }
    s
}

pub const OPTIMIZE_HEADER: &str = "threshold,sampling_rate,retained_bits,qber,test_bits,secret_bits";

/// Key length over the full (threshold, sampling rate) grid for a whole trace.
pub fn format_optimize_grid(cfg: &ExperimentConfig, trace: &FidelityTrace) -> Result<String> {
    let grids = cfg.search_grids()?;
    let mut out = format!(
        "# satqkd optimize\n# config_sha256={}\n# pair={}\n{OPTIMIZE_HEADER}\n",
        cfg.hash(),
        trace.pair()
    );
    for &theta in &grids.thresholds {
        let kept = apply_threshold(trace.samples(), theta);
        let agg = match aggregate_qber(&kept) {
            Ok(v) => Some(v),
            Err(Error::NoData(_)) => None,
            Err(e) => return Err(e),
        };
        for &rate in &grids.sampling_rates {
            let line = match agg {
                Some((bits, qber)) if bits >= 2.0 => {
                    let total = bits.floor() as u64;
                    let m = ((rate * total as f64).round() as u64).clamp(1, total - 1);
                    let res = key_length_nonblock(SampleCounts::new(total - m, m)?, qber, &cfg.security)?;
                    format!("{theta},{rate},{bits},{qber},{m},{}", res.secret_bits)
                }
                Some((bits, qber)) => format!("{theta},{rate},{bits},{qber},NA,0"),
                None => format!("{theta},{rate},0,NA,NA,0"),
            };
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn optimize(cfg: &ExperimentConfig, trace_path: &Path, out: &Path) -> Result<PathBuf> {
    let trace = io::read_trace_csv(trace_path)?;
    let text = format_optimize_grid(cfg, &trace)?;
    let path = out.join("optimize.csv");
    io::write_text(&path, &text)?;
    Ok(path)
}

/// Non-blockwise against every configured policy on one stored trace.
/// The altitude recorded in the trace wins over `fallback`; 0 when neither is known.
pub fn compare(
    cfg: &ExperimentConfig,
    trace_path: &Path,
    fallback_altitude: Option<f64>,
    out: &Path,
) -> Result<(CellResult, PathBuf)> {
    let (trace, meta) = io::read_trace_csv_with_meta(trace_path)?;
    let altitude = meta.altitude_m.or(fallback_altitude).unwrap_or(0.0);
    let cell = evaluate_cell(cfg, &trace, altitude)?;
    let mut rows = rows_for_cell(&cell);
    normalize_by_altitude(&mut rows);
    let path = out.join("compare.csv");
    io::emit_results_csv(&rows, &path, &cfg.hash())?;
    Ok((cell, path))
}

/// What `sweep` produced.
#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub files: Vec<PathBuf>,
    /// Cells that failed, with the reason.
    pub failures: Vec<(StationPair, f64, Error)>,
}

/// Full experiment: results CSV plus trace, threshold and improvement plot data.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepOutput> {
    let hash = cfg.hash();
    let report = run_sweep(cfg);
    let mut files = Vec::new();

    let results = out.join("results.csv");
    io::emit_results_csv(&report.rows, &results, &hash)?;
    files.push(results);

    let plot_dir = out.join("plotdata");
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (pair, alt, res) in report.cells {
        match res {
            Ok((trace, cell)) => {
                let path = plot_dir.join(minute_file_name(&pair, alt));
                io::emit_plotdata(PlotData::Trace(&trace), &path, &hash)?;
                files.push(path);
                cells.push(cell);
            }
            Err(e) => failures.push((pair, alt, e)),
        }
    }
    let refs: Vec<&CellResult> = cells.iter().collect();
    let path = plot_dir.join("threshold_sweep.csv");
    io::emit_plotdata(PlotData::Thresholds(&refs), &path, &hash)?;
    files.push(path);
    let path = plot_dir.join("improvement.csv");
    io::emit_plotdata(PlotData::Improvement(&refs), &path, &hash)?;
    files.push(path);

    Ok(SweepOutput {
        rows: report.rows,
        files,
        failures,
    })
}
