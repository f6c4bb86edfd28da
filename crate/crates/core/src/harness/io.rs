//! CSV persistence for traces, results and plot data.
//!
//! Every file starts with `#` comment lines recording the producing config's
//! SHA-256, followed by a fixed header row.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::channel::LinkSample;
use crate::error::{Error, Result};
use crate::harness::experiment::{CellResult, ResultRow};
use crate::orbit::SatId;
use crate::strategy::FidelityTrace;

pub const TRACE_HEADER: &str = "time_s,sat_ring,sat_slot,fidelity,sifted_bits";
pub const RESULTS_HEADER: &str =
    "pair,altitude_m,strategy,secret_bits,threshold,improvement_pct,normalized_bits";
const NA: &str = "NA";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn comment_block(kind: &str, config_hash: &str, extra: &[(&str, String)]) -> String {
    let mut s = format!("# satqkd {kind}\n# config_sha256={config_hash}\n");
    for (k, v) in extra {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

/// Provenance written into, and recovered from, a trace file's comment block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub config_hash: String,
    pub altitude_m: Option<f64>,
}

impl TraceMeta {
    pub fn new(config_hash: impl Into<String>, altitude_m: Option<f64>) -> Self {
        TraceMeta {
            config_hash: config_hash.into(),
            altitude_m,
        }
    }
}

pub fn format_trace_csv(trace: &FidelityTrace, meta: &TraceMeta) -> String {
    let mut extra = vec![
        ("pair", trace.pair().to_string()),
        ("horizon_s", trace.horizon().to_string()),
    ];
    if let Some(alt) = meta.altitude_m {
        extra.push(("altitude_m", alt.to_string()));
    }
    let mut out = comment_block("trace", &meta.config_hash, &extra);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in trace.samples() {
        let (ring, slot) = s
            .sat
            .map_or((String::new(), String::new()), |id| (id.ring.to_string(), id.slot.to_string()));
        let fidelity = s.fidelity.map_or(String::new(), |f| format!("{f:.6}"));
        out.push_str(&format!(
            "{},{ring},{slot},{fidelity},{}\n",
            s.time, s.sifted_bits
        ));
    }
    out
}

pub fn emit_trace_csv(trace: &FidelityTrace, path: impl AsRef<Path>, meta: &TraceMeta) -> Result<()> {
    write_all(path.as_ref(), &format_trace_csv(trace, meta))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<FidelityTrace> {
    read_trace_csv_with_meta(path).map(|(t, _)| t)
}

#[derive(Deserialize)]
struct TraceRow {
    time_s: u64,
    sat_ring: Option<u32>,
    sat_slot: Option<u32>,
    fidelity: Option<f64>,
    sifted_bits: f64,
}

/// Reads a trace CSV; pair, horizon and provenance come from the comment block when present.
pub fn read_trace_csv_with_meta(path: impl AsRef<Path>) -> Result<(FidelityTrace, TraceMeta)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |detail: String| Error::Parse {
        path: path.to_path_buf(),
        detail,
    };

    let mut pair = String::from("unknown");
    let mut horizon = None;
    let mut meta = TraceMeta::default();
    for comment in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let Some((k, v)) = comment.trim().split_once('=') else { continue };
        match k {
            "pair" => pair = v.to_string(),
            "horizon_s" => horizon = Some(v.parse().map_err(|_| parse_err(format!("bad horizon `{v}`")))?),
            "config_sha256" => meta.config_hash = v.to_string(),
            "altitude_m" => {
                meta.altitude_m = Some(v.parse().map_err(|_| parse_err(format!("bad altitude `{v}`")))?)
            }
            _ => {}
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(parse_err(format!("expected header `{TRACE_HEADER}`")));
    }
    let mut samples = Vec::new();
    for row in reader.deserialize::<TraceRow>() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let sat = match (row.sat_ring, row.sat_slot) {
            (None, None) => None,
            (Some(ring), Some(slot)) => Some(SatId { ring, slot }),
            _ => return Err(parse_err(format!("t={}: half-specified satellite", row.time_s))),
        };
        samples.push(LinkSample {
            time: row.time_s,
            fidelity: row.fidelity,
            sifted_bits: row.sifted_bits,
            sat,
        });
    }
    let horizon = horizon.unwrap_or_else(|| samples.last().map_or(0, |s| s.time + 1));
    let trace = FidelityTrace::new(pair, horizon, samples).map_err(|e| parse_err(e.to_string()))?;
    Ok((trace, meta))
}

fn format_thresholds(thresholds: &[Option<f64>]) -> String {
    if thresholds.is_empty() {
        return NA.to_string();
    }
    thresholds
        .iter()
        .map(|t| t.map_or_else(|| "-".to_string(), |x| x.to_string()))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn format_results_csv(rows: &[ResultRow], config_hash: &str) -> String {
    let mut out = comment_block("results", config_hash, &[]);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.pair,
            r.altitude_m,
            r.strategy,
            opt(r.secret_bits),
            format_thresholds(&r.thresholds),
            opt(r.improvement_pct.map(|p| format!("{p:.4}"))),
            opt(r.normalized_bits.map(|n| format!("{n:.6}"))),
        ));
    }
    out
}

pub fn emit_results_csv(rows: &[ResultRow], path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
    write_all(path.as_ref(), &format_results_csv(rows, config_hash))
}

/// Per-minute mean fidelity over the seconds that had a link.
pub fn format_trace_plotdata(trace: &FidelityTrace, config_hash: &str) -> String {
    let mut out = comment_block("trace-plotdata", config_hash, &[("pair", trace.pair().to_string())]);
    out.push_str("minute,mean_fidelity,linked_seconds,sifted_bits\n");
    let mut minute = None;
    let (mut sum, mut linked, mut bits) = (0.0, 0u64, 0.0);
    let flush = |out: &mut String, m: u64, sum: f64, linked: u64, bits: f64| {
        let mean = if linked > 0 {
            format!("{:.6}", sum / linked as f64)
        } else {
            String::new()
        };
        out.push_str(&format!("{m},{mean},{linked},{bits}\n"));
    };
    for s in trace.samples() {
        let m = s.time / 60;
        if minute.is_some_and(|cur| cur != m) {
            flush(&mut out, minute.unwrap(), sum, linked, bits);
            (sum, linked, bits) = (0.0, 0, 0.0);
        }
        minute = Some(m);
        if let Some(f) = s.fidelity {
            sum += f;
            linked += 1;
            bits += s.sifted_bits;
        }
    }
    if let Some(m) = minute {
        flush(&mut out, m, sum, linked, bits);
    }
    out
}

pub fn emit_trace_plotdata(trace: &FidelityTrace, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
    write_all(path.as_ref(), &format_trace_plotdata(trace, config_hash))
}

/// Non-blockwise key length versus threshold, normalised per cell by its maximum.
pub fn format_threshold_plotdata(cells: &[&CellResult], config_hash: &str) -> String {
    let mut out = comment_block("threshold-plotdata", config_hash, &[]);
    out.push_str("pair,altitude_m,threshold,sampling_rate,secret_bits,normalized_bits\n");
    for cell in cells {
        let max = cell
            .threshold_sweep
            .iter()
            .map(|c| c.secret_bits())
            .max()
            .unwrap_or(0);
        for c in &cell.threshold_sweep {
            let norm = if max > 0 {
                format!("{:.6}", c.secret_bits() as f64 / max as f64)
            } else {
                NA.to_string()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.pair,
                cell.altitude,
                c.threshold,
                opt(c.sampling.map(|s| s.rate)),
                c.secret_bits(),
                norm
            ));
        }
    }
    out
}

/// Blockwise gain per cell.
pub fn format_improvement_plotdata(cells: &[&CellResult], config_hash: &str) -> String {
    let mut out = comment_block("improvement-plotdata", config_hash, &[]);
    out.push_str("pair,altitude_m,nonblock_bits,best_policy,best_block_bits,improvement_pct\n");
    for cell in cells {
        let best = cell.best_blocking();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.pair,
            cell.altitude,
            cell.nonblock.secret_bits,
            best.map_or(NA.to_string(), |b| b.label.clone()),
            opt(best.map(|b| b.secret_bits)),
            opt(cell.improvement_pct().map(|p| format!("{p:.4}"))),
        ));
    }
    out
}

pub enum PlotData<'a> {
    Trace(&'a FidelityTrace),
    Thresholds(&'a [&'a CellResult]),
    Improvement(&'a [&'a CellResult]),
}

pub fn emit_plotdata(data: PlotData<'_>, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
    let text = match data {
        PlotData::Trace(t) => format_trace_plotdata(t, config_hash),
        PlotData::Thresholds(c) => format_threshold_plotdata(c, config_hash),
        PlotData::Improvement(c) => format_improvement_plotdata(c, config_hash),
    };
    write_all(path.as_ref(), &text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_all(path.as_ref(), text)
}
