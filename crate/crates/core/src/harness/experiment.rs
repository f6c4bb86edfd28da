//! Pair x altitude experiment cells: trace generation, strategy evaluation,
//! improvement and normalisation.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{link_sample, LinkSample};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, StationPair};
use crate::strategy::{
    evaluate_block, evaluate_nonblock, improvement, pick_best, threshold_sweep, FidelityTrace,
    StrategyOutcome, ThresholdChoice,
};

/// Fidelities are stored at the precision of the trace CSV so that a trace
/// re-read from disk is bit-identical to the one simulated.
fn quantize_fidelity(f: f64) -> f64 {
    (f * 1e6).round() / 1e6
}

/// Simulates one station pair at one altitude over the configured horizon.
pub fn run_trace(config: &ExperimentConfig, pair: &StationPair, altitude: f64) -> Result<FidelityTrace> {
    let (a, b) = config.resolve_pair(pair)?;
    let constellation = config.constellation_at(altitude);
    let model = config.link_model();
    let step = config.time_step;
    let samples: Vec<LinkSample> = (0..config.horizon / step)
        .into_par_iter()
        .map(|i| {
            let mut s = link_sample(i * step, (a, b), &constellation, &model);
            s.fidelity = s.fidelity.map(quantize_fidelity);
            s.sifted_bits *= step as f64;
            s
        })
        .collect();
    FidelityTrace::new(pair.to_string(), config.horizon, samples)
}

/// Everything computed for one (pair, altitude) cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub pair: String,
    pub altitude: f64,
    pub total_bits: f64,
    pub linked_seconds: u64,
    pub nonblock: StrategyOutcome,
    /// One outcome per configured policy, in config order.
    pub policies: Vec<StrategyOutcome>,
    /// Non-blockwise key length at every threshold of the grid.
    pub threshold_sweep: Vec<ThresholdChoice>,
}

impl CellResult {
    pub fn best_blocking(&self) -> Option<&StrategyOutcome> {
        pick_best(&self.policies)
    }

    pub fn improvement_pct(&self) -> Option<f64> {
        self.best_blocking()
            .and_then(|b| improvement(b.secret_bits, self.nonblock.secret_bits))
    }
}

/// Evaluates every strategy on an existing trace.
pub fn evaluate_cell(config: &ExperimentConfig, trace: &FidelityTrace, altitude: f64) -> Result<CellResult> {
    let grids = config.search_grids()?;
    let params = &config.security;
    let nonblock = evaluate_nonblock(trace, &grids, params)?;
    let policies = config
        .policies
        .iter()
        .map(|p| evaluate_block(trace, p, &grids, params))
        .collect::<Result<Vec<_>>>()?;
    let sweep = threshold_sweep(trace.samples(), &grids.thresholds, &grids.sampling_rates, params)?;
    Ok(CellResult {
        pair: trace.pair().to_string(),
        altitude,
        total_bits: trace.total_bits(),
        linked_seconds: trace.samples().iter().filter(|s| s.sat.is_some()).count() as u64,
        nonblock,
        policies,
        threshold_sweep: sweep,
    })
}

pub fn run_cell(config: &ExperimentConfig, pair: &StationPair, altitude: f64) -> Result<(FidelityTrace, CellResult)> {
    let trace = run_trace(config, pair, altitude)?;
    let cell = evaluate_cell(config, &trace, altitude)?;
    Ok((trace, cell))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub pair: String,
    pub altitude_m: f64,
    pub strategy: String,
    /// `None` when the cell failed.
    pub secret_bits: Option<u64>,
    /// Per-block discard thresholds, highest-fidelity block first.
    pub thresholds: Vec<Option<f64>>,
    pub sampling_rates: Vec<Option<f64>>,
    pub improvement_pct: Option<f64>,
    pub normalized_bits: Option<f64>,
}

impl ResultRow {
    fn from_outcome(cell: &CellResult, strategy: String, outcome: &StrategyOutcome) -> Self {
        ResultRow {
            pair: cell.pair.clone(),
            altitude_m: cell.altitude,
            strategy,
            secret_bits: Some(outcome.secret_bits),
            thresholds: outcome.per_block.iter().map(|b| b.threshold).collect(),
            sampling_rates: outcome.per_block.iter().map(|b| b.sampling_rate).collect(),
            improvement_pct: improvement(outcome.secret_bits, cell.nonblock.secret_bits),
            normalized_bits: None,
        }
    }

    fn failed(pair: &StationPair, altitude: f64) -> Self {
        ResultRow {
            pair: pair.to_string(),
            altitude_m: altitude,
            strategy: "failed".to_string(),
            secret_bits: None,
            thresholds: vec![],
            sampling_rates: vec![],
            improvement_pct: None,
            normalized_bits: None,
        }
    }
}

pub const BEST_BLOCKWISE: &str = "best-blockwise";

/// Rows for one cell: non-blockwise, each policy, then the best policy.
pub fn rows_for_cell(cell: &CellResult) -> Vec<ResultRow> {
    let mut rows = vec![ResultRow::from_outcome(cell, cell.nonblock.label.clone(), &cell.nonblock)];
    for outcome in &cell.policies {
        rows.push(ResultRow::from_outcome(cell, outcome.label.clone(), outcome));
    }
    if let Some(best) = cell.best_blocking() {
        rows.push(ResultRow::from_outcome(
            cell,
            format!("{BEST_BLOCKWISE}:{}", best.label),
            best,
        ));
    }
    rows
}

/// Divides each row's key length by the maximum within its altitude group.
pub fn normalize_by_altitude(rows: &mut [ResultRow]) {
    let mut groups: Vec<(f64, u64)> = Vec::new();
    for r in rows.iter() {
        let bits = r.secret_bits.unwrap_or(0);
        match groups.iter_mut().find(|(a, _)| *a == r.altitude_m) {
            Some(g) => g.1 = g.1.max(bits),
            None => groups.push((r.altitude_m, bits)),
        }
    }
    for r in rows.iter_mut() {
        let max = groups
            .iter()
            .find(|(a, _)| *a == r.altitude_m)
            .map_or(0, |g| g.1);
        r.normalized_bits = match (r.secret_bits, max) {
            (Some(b), m) if m > 0 => Some(b as f64 / m as f64),
            (Some(_), _) => Some(0.0),
            (None, _) => None,
        };
    }
}

/// One (pair, altitude) cell of a sweep and what became of it.
pub type CellOutcome = (StationPair, f64, Result<(FidelityTrace, CellResult)>);

/// Output of a full sweep.
#[derive(Debug)]
pub struct SweepReport {
    pub cells: Vec<CellOutcome>,
    pub rows: Vec<ResultRow>,
}

/// Every (pair, altitude) cell, evaluated concurrently, reported in config order.
pub fn run_sweep(config: &ExperimentConfig) -> SweepReport {
    let jobs: Vec<(StationPair, f64)> = config
        .pairs
        .iter()
        .flat_map(|p| config.altitudes().into_iter().map(move |a| (p.clone(), a)))
        .collect();
    let cells: Vec<_> = jobs
        .into_par_iter()
        .map(|(pair, alt)| {
            let res = run_cell(config, &pair, alt);
            (pair, alt, res)
        })
        .collect();
    let mut rows = Vec::new();
    for (pair, alt, res) in &cells {
        match res {
            Ok((_, cell)) => rows.extend(rows_for_cell(cell)),
            Err(_) => rows.push(ResultRow::failed(pair, *alt)),
        }
    }
    normalize_by_altitude(&mut rows);
    SweepReport { cells, rows }
}

pub fn run_experiment(config: &ExperimentConfig) -> Vec<ResultRow> {
    run_sweep(config).rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alt: f64, bits: Option<u64>) -> ResultRow {
        ResultRow {
            pair: "A:B".into(),
            altitude_m: alt,
            strategy: "s".into(),
            secret_bits: bits,
            thresholds: vec![],
            sampling_rates: vec![],
            improvement_pct: None,
            normalized_bits: None,
        }
    }

    #[test]
    fn normalization_groups_by_altitude() {
        let mut rows = vec![
            row(1.0, Some(50)),
            row(1.0, Some(100)),
            row(2.0, Some(0)),
            row(2.0, None),
            row(3.0, Some(7)),
        ];
        normalize_by_altitude(&mut rows);
        let n: Vec<_> = rows.iter().map(|r| r.normalized_bits).collect();
        assert_eq!(n, vec![Some(0.5), Some(1.0), Some(0.0), None, Some(1.0)]);
    }

    #[test]
    fn quantization_matches_decimal_parse() {
        for f in [0.123_456_7, 0.999_999_5, 0.25, 1.0, 0.876_543_21] {
            let q = quantize_fidelity(f);
            let s = format!("{q:.6}");
            assert_eq!(s.parse::<f64>().unwrap(), q);
        }
    }
}
