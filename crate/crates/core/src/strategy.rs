//! Post-processing policies over fidelity traces.
//!
//! A trace is the per-second record of delivered fidelity and sifted bits for
//! one ground-station pair. The non-blockwise strategy discards seconds below
//! a fidelity threshold and distills everything else as a single block. A
//! blockwise policy first partitions the trace by fidelity range and
//! distills each bucket independently, with its own threshold and sampling
//! rate. Both optimise over the same grids.

use serde::{Deserialize, Serialize};

use crate::channel::{qber_of, LinkSample};
use crate::error::{Error, Result};
use crate::finite_key::{key_length_nonblock, KeyLengthResult, SampleCounts, SecurityParams};

/// Lowest fidelity a delivered pair can have (maximally mixed).
pub const FIDELITY_FLOOR: f64 = 0.25;

/// Ordered per-second samples for one station pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTrace {
    pair: String,
    horizon: u64,
    samples: Vec<LinkSample>,
}

impl FidelityTrace {
    pub fn new(pair: impl Into<String>, horizon: u64, samples: Vec<LinkSample>) -> Result<Self> {
        if samples.windows(2).any(|w| w[0].time >= w[1].time) {
            return Err(Error::validation("trace.samples", "times must be strictly increasing"));
        }
        if let Some(bad) = samples.iter().find(|s| match s.fidelity {
            Some(f) => !(FIDELITY_FLOOR..=1.0).contains(&f) || !(s.sifted_bits >= 0.0),
            None => s.sifted_bits != 0.0 || s.sat.is_some(),
        }) {
            return Err(Error::validation(
                "trace.samples",
                format!("sample at t={} violates fidelity/bit invariants", bad.time),
            ));
        }
        Ok(FidelityTrace {
            pair: pair.into(),
            horizon,
            samples,
        })
    }

    /// Piecewise-constant synthetic trace: each plateau is
    /// `(fidelity, sifted bits per second, seconds)`.
    pub fn from_plateaus(pair: impl Into<String>, plateaus: &[(f64, f64, u64)]) -> Result<Self> {
        let mut samples = Vec::new();
        let mut t = 0;
        for &(fidelity, bits, seconds) in plateaus {
            for _ in 0..seconds {
                samples.push(LinkSample {
                    time: t,
                    fidelity: Some(fidelity),
                    sifted_bits: bits,
                    sat: None,
                });
                t += 1;
            }
        }
        FidelityTrace::new(pair, t, samples)
    }

    pub fn pair(&self) -> &str {
        &self.pair
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn samples(&self) -> &[LinkSample] {
        &self.samples
    }

    pub fn total_bits(&self) -> f64 {
        self.samples.iter().map(|s| s.sifted_bits).sum()
    }

    /// Concatenates `copies` back-to-back repetitions of the trace.
    pub fn replicate(&self, copies: u64) -> FidelityTrace {
        let span = self
            .horizon
            .max(self.samples.last().map_or(0, |s| s.time + 1));
        let samples = (0..copies)
            .flat_map(|k| {
                self.samples.iter().map(move |s| LinkSample {
                    time: s.time + k * span,
                    ..*s
                })
            })
            .collect();
        FidelityTrace {
            pair: self.pair.clone(),
            horizon: span * copies,
            samples,
        }
    }
}

/// Fidelity cut-points defining `boundaries.len() + 1` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BlockingPolicy {
    boundaries: Vec<f64>,
}

impl TryFrom<Vec<f64>> for BlockingPolicy {
    type Error = Error;

    fn try_from(boundaries: Vec<f64>) -> Result<Self> {
        BlockingPolicy::new(boundaries)
    }
}

impl From<BlockingPolicy> for Vec<f64> {
    fn from(p: BlockingPolicy) -> Self {
        p.boundaries
    }
}

impl BlockingPolicy {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries
            .iter()
            .any(|b| !(*b > FIDELITY_FLOOR && *b < 1.0))
        {
            return Err(Error::validation("policies", "boundaries must lie in (0.25, 1)"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("policies", "boundaries must be strictly ascending"));
        }
        Ok(BlockingPolicy { boundaries })
    }

    pub fn non_blockwise() -> Self {
        BlockingPolicy { boundaries: vec![] }
    }

    /// `>= 0.98` and the rest.
    pub fn two_block() -> Self {
        BlockingPolicy {
            boundaries: vec![0.98],
        }
    }

    /// `>= 0.98`, `[0.90, 0.98)` and the rest.
    pub fn three_block() -> Self {
        BlockingPolicy {
            boundaries: vec![0.90, 0.98],
        }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn num_blocks(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn label(&self) -> String {
        match self.num_blocks() {
            1 => "non-blockwise".to_string(),
            k => format!("{k}-block"),
        }
    }

    /// Fidelity ranges `[lo, hi)` in descending order; the top range is closed at 1.
    pub fn ranges(&self) -> Vec<FidelityRange> {
        let mut edges = Vec::with_capacity(self.boundaries.len() + 2);
        edges.push(FIDELITY_FLOOR);
        edges.extend_from_slice(&self.boundaries);
        edges.push(1.0);
        edges
            .windows(2)
            .rev()
            .map(|w| FidelityRange { lo: w[0], hi: w[1] })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityRange {
    pub lo: f64,
    pub hi: f64,
}

impl FidelityRange {
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && (f < self.hi || (self.hi == 1.0 && f <= 1.0))
    }
}

/// Grid specification as stored in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub sampling_min: f64,
    pub sampling_max: f64,
    pub sampling_points: usize,
    pub threshold_min: f64,
    pub threshold_max: f64,
    pub threshold_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            sampling_min: 1e-5,
            sampling_max: 0.05,
            sampling_points: 50,
            threshold_min: 0.70,
            threshold_max: 0.90,
            threshold_step: 0.02,
        }
    }
}

/// Sampling-rate and fidelity-threshold grids, both ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchGrids {
    pub sampling_rates: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Default for SearchGrids {
    fn default() -> Self {
        SearchGrids::from_spec(&GridSpec::default()).expect("default grids are valid")
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl SearchGrids {
    pub fn new(sampling_rates: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if sampling_rates.is_empty() || thresholds.is_empty() {
            return Err(Error::validation("grids", "grids must be nonempty"));
        }
        if sampling_rates.iter().any(|r| !(*r > 0.0 && *r < 0.5))
            || sampling_rates.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::validation(
                "grids.sampling",
                "rates must be ascending within (0, 0.5)",
            ));
        }
        if thresholds
            .iter()
            .any(|t| !(FIDELITY_FLOOR..=1.0).contains(t))
            || thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::validation(
                "grids.thresholds",
                "thresholds must be ascending within [0.25, 1]",
            ));
        }
        Ok(SearchGrids {
            sampling_rates,
            thresholds,
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        SearchGrids::new(
            geometric_grid(spec.sampling_min, spec.sampling_max, spec.sampling_points)?,
            arithmetic_grid(spec.threshold_min, spec.threshold_max, spec.threshold_step)?,
        )
    }
}

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn geometric_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min) || points == 0 || (points == 1 && max != min) {
        return Err(Error::validation(
            "grids.sampling",
            "need 0 < min <= max and at least one point",
        ));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let ratio = (max / min).ln();
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => min,
            i if i == points - 1 => max,
            i => min * (ratio * i as f64 / last).exp(),
        })
        .collect())
}

/// `min, min + step, ...` up to `max` inclusive, snapped to 1e-9.
pub fn arithmetic_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && max >= min) {
        return Err(Error::validation(
            "grids.thresholds",
            "need step > 0 and max >= min",
        ));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| snap(min + i as f64 * step)).collect())
}

/// Total sifted bits and bit-weighted mean QBER of a sample set.
pub fn aggregate_qber<'a, I>(samples: I) -> Result<(f64, f64)>
where
    I: IntoIterator<Item = &'a LinkSample>,
{
    let mut bits = 0.0;
    let mut weighted = 0.0;
    for s in samples {
        if let Some(f) = s.fidelity {
            bits += s.sifted_bits;
            weighted += s.sifted_bits * qber_of(f);
        }
    }
    if !(bits > 0.0) {
        return Err(Error::NoData("no sifted bits in sample set".into()));
    }
    Ok((bits, (weighted / bits).clamp(0.0, 0.5)))
}

/// Keeps exactly the samples with fidelity `>= theta`.
pub fn apply_threshold(samples: &[LinkSample], theta: f64) -> Vec<LinkSample> {
    samples
        .iter()
        .filter(|s| s.fidelity.is_some_and(|f| f >= theta))
        .copied()
        .collect()
}

/// Assigns every linked sample to its fidelity bucket (descending order).
pub fn partition(trace: &FidelityTrace, policy: &BlockingPolicy) -> Vec<Vec<LinkSample>> {
    let ranges = policy.ranges();
    let mut buckets = vec![Vec::new(); ranges.len()];
    for s in trace.samples() {
        let Some(f) = s.fidelity else { continue };
        if let Some(idx) = ranges.iter().position(|r| r.contains(f)) {
            buckets[idx].push(*s);
        }
    }
    buckets
}

/// Best sampling rate for one block of material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingChoice {
    pub rate: f64,
    pub counts_total: u64,
    pub test_bits: u64,
    pub result: KeyLengthResult,
}

/// Grid search over sampling rates; ties go to the smaller rate.
pub fn optimize_sampling(
    total_bits: f64,
    qber: f64,
    rates: &[f64],
    params: &SecurityParams,
) -> Result<SamplingChoice> {
    if !(total_bits >= 2.0) {
        return Err(Error::NoData(format!(
            "need at least two sifted bits, got {total_bits}"
        )));
    }
    let total = total_bits.floor() as u64;
    let mut best: Option<SamplingChoice> = None;
    for &rate in rates {
        let m = ((rate * total as f64).round() as u64).clamp(1, total - 1);
        let counts = SampleCounts::new(total - m, m)?;
        let result = key_length_nonblock(counts, qber, params)?;
        let better = match &best {
            None => true,
            Some(b) => result.secret_bits > b.result.secret_bits,
        };
        if better {
            best = Some(SamplingChoice {
                rate,
                counts_total: total,
                test_bits: m,
                result,
            });
        }
    }
    best.ok_or_else(|| Error::validation("grids.sampling", "empty sampling grid"))
}

/// One cell of the threshold search: the filter applied and what it yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub retained_bits: f64,
    pub qber: Option<f64>,
    pub sampling: Option<SamplingChoice>,
}

impl ThresholdChoice {
    pub fn secret_bits(&self) -> u64 {
        self.sampling.map_or(0, |s| s.result.secret_bits)
    }
}

fn evaluate_threshold(
    samples: &[LinkSample],
    theta: f64,
    rates: &[f64],
    params: &SecurityParams,
) -> Result<ThresholdChoice> {
    let kept = apply_threshold(samples, theta);
    let empty = ThresholdChoice {
        threshold: theta,
        retained_bits: 0.0,
        qber: None,
        sampling: None,
    };
    let (bits, qber) = match aggregate_qber(&kept) {
        Ok(v) => v,
        Err(Error::NoData(_)) => return Ok(empty),
        Err(e) => return Err(e),
    };
    let sampling = match optimize_sampling(bits, qber, rates, params) {
        Ok(s) => Some(s),
        Err(Error::NoData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ThresholdChoice {
        threshold: theta,
        retained_bits: bits,
        qber: Some(qber),
        sampling,
    })
}

/// The best key length at every threshold in `thresholds`.
pub fn threshold_sweep(
    samples: &[LinkSample],
    thresholds: &[f64],
    rates: &[f64],
    params: &SecurityParams,
) -> Result<Vec<ThresholdChoice>> {
    thresholds
        .iter()
        .map(|&theta| evaluate_threshold(samples, theta, rates, params))
        .collect()
}

/// Joint grid search over (threshold, sampling rate); ties go to the smaller threshold.
pub fn optimize_threshold(
    samples: &[LinkSample],
    thresholds: &[f64],
    rates: &[f64],
    params: &SecurityParams,
) -> Result<ThresholdChoice> {
    if samples.is_empty() {
        return Err(Error::NoData("empty sample set".into()));
    }
    let sweep = threshold_sweep(samples, thresholds, rates, params)?;
    let mut best: Option<ThresholdChoice> = None;
    for cell in sweep {
        if best.is_none_or(|b| cell.secret_bits() > b.secret_bits()) {
            best = Some(cell);
        }
    }
    best.ok_or_else(|| Error::validation("grids.thresholds", "empty threshold grid"))
}

/// Distillation result for one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockOutcome {
    pub range: FidelityRange,
    /// Sifted bits falling in the bucket before any discard.
    pub bucket_bits: f64,
    /// `B_i`: bits distilled after the threshold.
    pub block_bits: u64,
    /// `m_i`.
    pub test_bits: u64,
    /// `Q_i`.
    pub qber: Option<f64>,
    /// Discard threshold, `None` when nothing in the bucket is discarded.
    pub threshold: Option<f64>,
    pub sampling_rate: Option<f64>,
    /// `l_i`, clamped.
    pub secret_bits: u64,
}

impl BlockOutcome {
    fn empty(range: FidelityRange, bucket_bits: f64) -> Self {
        BlockOutcome {
            range,
            bucket_bits,
            block_bits: 0,
            test_bits: 0,
            qber: None,
            threshold: None,
            sampling_rate: None,
            secret_bits: 0,
        }
    }

    fn from_choice(range: FidelityRange, bucket_bits: f64, choice: &ThresholdChoice) -> Self {
        let mut out = BlockOutcome::empty(range, bucket_bits);
        out.threshold = (choice.threshold > range.lo).then_some(choice.threshold);
        out.qber = choice.qber;
        if let Some(s) = choice.sampling {
            out.block_bits = s.counts_total;
            out.test_bits = s.test_bits;
            out.sampling_rate = Some(s.rate);
            out.secret_bits = s.result.secret_bits;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub label: String,
    pub boundaries: Vec<f64>,
    /// `sum_i l_i` over `per_block`.
    pub secret_bits: u64,
    pub per_block: Vec<BlockOutcome>,
}

impl StrategyOutcome {
    fn assemble(policy: &BlockingPolicy, per_block: Vec<BlockOutcome>) -> Self {
        StrategyOutcome {
            label: policy.label(),
            boundaries: policy.boundaries().to_vec(),
            secret_bits: per_block.iter().map(|b| b.secret_bits).sum(),
            per_block,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.boundaries.len() + 1
    }
}

/// Effective filters for a bucket: each global threshold below the bucket's
/// upper edge, raised to the bucket's lower edge. Thresholds at or above the
/// upper edge would discard the whole bucket and are dropped.
fn bucket_thresholds(range: &FidelityRange, grid: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &theta in grid {
        let keeps_something = theta < range.hi || (range.hi == 1.0 && theta <= 1.0);
        if !keeps_something {
            continue;
        }
        let eff = theta.max(range.lo);
        if out.last() != Some(&eff) {
            out.push(eff);
        }
    }
    out
}

/// Whole trace as one block, threshold and sampling rate optimised jointly.
pub fn evaluate_nonblock(
    trace: &FidelityTrace,
    grids: &SearchGrids,
    params: &SecurityParams,
) -> Result<StrategyOutcome> {
    let policy = BlockingPolicy::non_blockwise();
    let range = policy.ranges()[0];
    let bits = trace.total_bits();
    let block = match optimize_threshold(
        trace.samples(),
        &grids.thresholds,
        &grids.sampling_rates,
        params,
    ) {
        Ok(choice) => BlockOutcome::from_choice(range, bits, &choice),
        Err(Error::NoData(_)) => BlockOutcome::empty(range, bits),
        Err(e) => return Err(e),
    };
    Ok(StrategyOutcome::assemble(&policy, vec![block]))
}

/// Partitions by `policy` and optimises each bucket independently.
pub fn evaluate_block(
    trace: &FidelityTrace,
    policy: &BlockingPolicy,
    grids: &SearchGrids,
    params: &SecurityParams,
) -> Result<StrategyOutcome> {
    let ranges = policy.ranges();
    let buckets = partition(trace, policy);
    let mut per_block = Vec::with_capacity(ranges.len());
    for (range, samples) in ranges.iter().zip(&buckets) {
        let bits: f64 = samples.iter().map(|s| s.sifted_bits).sum();
        let candidates = bucket_thresholds(range, &grids.thresholds);
        if samples.is_empty() || candidates.is_empty() {
            per_block.push(BlockOutcome::empty(*range, bits));
            continue;
        }
        let choice = optimize_threshold(samples, &candidates, &grids.sampling_rates, params)?;
        per_block.push(BlockOutcome::from_choice(*range, bits, &choice));
    }
    Ok(StrategyOutcome::assemble(policy, per_block))
}

/// Highest key length; ties go to fewer blocks, then to earlier entries.
pub fn pick_best(outcomes: &[StrategyOutcome]) -> Option<&StrategyOutcome> {
    let mut best: Option<&StrategyOutcome> = None;
    for o in outcomes {
        best = match best {
            Some(b)
                if b.secret_bits > o.secret_bits
                    || (b.secret_bits == o.secret_bits && b.num_blocks() <= o.num_blocks()) =>
            {
                Some(b)
            }
            _ => Some(o),
        };
    }
    best
}

/// Evaluates every policy and returns the best outcome.
pub fn best_blocking(
    trace: &FidelityTrace,
    policies: &[BlockingPolicy],
    grids: &SearchGrids,
    params: &SecurityParams,
) -> Result<StrategyOutcome> {
    if policies.is_empty() {
        return Err(Error::validation("policies", "need at least one blocking policy"));
    }
    let outcomes = policies
        .iter()
        .map(|p| evaluate_block(trace, p, grids, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_best(&outcomes).cloned().expect("nonempty"))
}

/// Percentage gain of blockwise over non-blockwise; `None` when the latter is zero.
pub fn improvement(l_block: u64, l_nonblock: u64) -> Option<f64> {
    (l_nonblock > 0).then(|| 100.0 * (l_block as f64 - l_nonblock as f64) / l_nonblock as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(time: u64, fidelity: f64, bits: f64) -> LinkSample {
        LinkSample {
            time,
            fidelity: Some(fidelity),
            sifted_bits: bits,
            sat: None,
        }
    }

    fn params() -> SecurityParams {
        SecurityParams::default()
    }

    #[test]
    fn default_grids() {
        let g = SearchGrids::default();
        assert_eq!(g.sampling_rates.len(), 50);
        assert_eq!(g.sampling_rates[0], 1e-5);
        assert_eq!(g.sampling_rates[49], 0.05);
        assert_eq!(
            g.thresholds,
            vec![0.70, 0.72, 0.74, 0.76, 0.78, 0.80, 0.82, 0.84, 0.86, 0.88, 0.90]
        );
    }

    #[test]
    fn grid_validation() {
        assert!(SearchGrids::new(vec![], vec![0.8]).is_err());
        assert!(SearchGrids::new(vec![0.01, 0.001], vec![0.8]).is_err());
        assert!(SearchGrids::new(vec![0.01], vec![0.8, 0.7]).is_err());
        assert!(SearchGrids::new(vec![0.01], vec![1.0 + 1e-9]).is_err());
        assert!(geometric_grid(0.0, 1.0, 3).is_err());
        assert!(arithmetic_grid(0.7, 0.9, 0.0).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let uniform = [sample(0, 0.91, 10.0), sample(1, 0.91, 30.0)];
        let (bits, q) = aggregate_qber(&uniform).unwrap();
        assert_eq!(bits, 40.0);
        assert!((q - qber_of(0.91)).abs() < 1e-15);

        // Q = 0 at F = 1 and Q = 0.2 at F = 0.7.
        let mixed = [sample(0, 1.0, 100.0), sample(1, 0.7, 300.0)];
        let (_, q) = aggregate_qber(&mixed).unwrap();
        assert!((q - 0.15).abs() < 1e-12, "{q}");

        assert!(matches!(aggregate_qber(&[]), Err(Error::NoData(_))));
        assert!(aggregate_qber(&[LinkSample::no_link(3)]).is_err());
    }

    #[test]
    fn threshold_filter() {
        let s = [sample(0, 0.25, 1.0), sample(1, 0.8, 1.0), sample(2, 1.0, 1.0)];
        assert_eq!(apply_threshold(&s, 0.25), s.to_vec());
        assert_eq!(apply_threshold(&s, 1.0), vec![s[2]]);
        assert_eq!(apply_threshold(&s, 0.8).len(), 2);
    }

    #[test]
    fn partition_examples() {
        let trace =
            FidelityTrace::new("x", 3, vec![sample(0, 0.99, 1.0), sample(1, 0.95, 1.0)]).unwrap();
        let b = partition(&trace, &BlockingPolicy::two_block());
        assert_eq!(b.len(), 2);
        assert_eq!(b[0][0].fidelity, Some(0.99));
        assert_eq!(b[1][0].fidelity, Some(0.95));

        let trace = FidelityTrace::new(
            "x",
            3,
            vec![sample(0, 0.99, 1.0), sample(1, 0.95, 1.0), sample(2, 0.80, 1.0)],
        )
        .unwrap();
        let b = partition(&trace, &BlockingPolicy::three_block());
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1, 1]);
        assert_eq!(b[2][0].fidelity, Some(0.80));

        let single = partition(&trace, &BlockingPolicy::non_blockwise());
        assert_eq!(single, vec![trace.samples().to_vec()]);
    }

    #[test]
    fn partition_edges() {
        let trace = FidelityTrace::new(
            "x",
            4,
            vec![
                sample(0, 1.0, 1.0),
                sample(1, 0.98, 1.0),
                sample(2, 0.90, 1.0),
                sample(3, 0.25, 1.0),
            ],
        )
        .unwrap();
        let b = partition(&trace, &BlockingPolicy::three_block());
        assert_eq!(b[0].len(), 2);
        assert_eq!(b[1].len(), 1);
        assert_eq!(b[2].len(), 1);
    }

    #[test]
    fn policy_validation() {
        assert!(BlockingPolicy::new(vec![0.98, 0.9]).is_err());
        assert!(BlockingPolicy::new(vec![0.25]).is_err());
        assert!(BlockingPolicy::new(vec![1.0]).is_err());
        assert_eq!(BlockingPolicy::three_block().label(), "3-block");
        assert_eq!(BlockingPolicy::non_blockwise().label(), "non-blockwise");
    }

    #[test]
    fn bucket_threshold_mapping() {
        let grid = SearchGrids::default().thresholds;
        let top = FidelityRange { lo: 0.98, hi: 1.0 };
        assert_eq!(bucket_thresholds(&top, &grid), vec![0.98]);
        let mid = FidelityRange { lo: 0.90, hi: 0.98 };
        assert_eq!(bucket_thresholds(&mid, &grid), vec![0.90]);
        let low = FidelityRange { lo: 0.25, hi: 0.90 };
        assert_eq!(bucket_thresholds(&low, &grid), grid[..10].to_vec());
        let below = FidelityRange { lo: 0.25, hi: 0.5 };
        assert!(bucket_thresholds(&below, &grid).is_empty());
        let whole = FidelityRange { lo: 0.25, hi: 1.0 };
        assert_eq!(bucket_thresholds(&whole, &grid), grid);
    }

    #[test]
    fn sampling_optimizer_edges() {
        let g = SearchGrids::default();
        let p = params();
        let worthless = optimize_sampling(1e6, 0.5, &g.sampling_rates, &p).unwrap();
        assert_eq!(worthless.result.secret_bits, 0);
        assert_eq!(worthless.rate, g.sampling_rates[0]);
        assert!(matches!(
            optimize_sampling(1.5, 0.01, &g.sampling_rates, &p),
            Err(Error::NoData(_))
        ));
        let tiny = optimize_sampling(2.0, 0.0, &g.sampling_rates, &p).unwrap();
        assert_eq!((tiny.counts_total, tiny.test_bits), (2, 1));
    }

    #[test]
    fn sampling_optimizer_is_interior_for_large_blocks() {
        let g = SearchGrids::default();
        let best = optimize_sampling(1e8, 0.02, &g.sampling_rates, &params()).unwrap();
        let first = *g.sampling_rates.first().unwrap();
        let last = *g.sampling_rates.last().unwrap();
        assert!(best.rate > first && best.rate < last, "{}", best.rate);
        for &r in [first, last].iter() {
            let one = optimize_sampling(1e8, 0.02, &[r], &params()).unwrap();
            assert!(best.result.secret_bits >= one.result.secret_bits);
        }
    }

    #[test]
    fn high_fidelity_trace_prefers_smallest_threshold() {
        let trace = FidelityTrace::from_plateaus("x", &[(0.97, 1e4, 500), (0.95, 1e4, 500)]).unwrap();
        let out = evaluate_nonblock(&trace, &SearchGrids::default(), &params()).unwrap();
        assert!(out.secret_bits > 0);
        assert_eq!(out.per_block[0].threshold, Some(0.70));
    }

    #[test]
    fn bimodal_trace_discards_low_mode() {
        let trace = FidelityTrace::from_plateaus("x", &[(0.95, 1e4, 1000), (0.75, 1e4, 1000)]).unwrap();
        let out = evaluate_nonblock(&trace, &SearchGrids::default(), &params()).unwrap();
        let theta = out.per_block[0].threshold.unwrap();
        assert!(theta > 0.75 && theta <= 0.95, "{theta}");
        assert_eq!(out.per_block[0].block_bits, 10_000_000);
    }

    #[test]
    fn empty_trace_yields_zero() {
        let trace = FidelityTrace::new("x", 10, (0..10).map(LinkSample::no_link).collect()).unwrap();
        let g = SearchGrids::default();
        assert_eq!(evaluate_nonblock(&trace, &g, &params()).unwrap().secret_bits, 0);
        let b = evaluate_block(&trace, &BlockingPolicy::three_block(), &g, &params()).unwrap();
        assert_eq!(b.secret_bits, 0);
        assert_eq!(b.per_block.len(), 3);
    }

    #[test]
    fn best_blocking_ties_prefer_fewer_blocks() {
        let trace = FidelityTrace::from_plateaus("x", &[(0.99, 10.0, 5)]).unwrap();
        let g = SearchGrids::default();
        let best = best_blocking(
            &trace,
            &[BlockingPolicy::three_block(), BlockingPolicy::two_block()],
            &g,
            &params(),
        )
        .unwrap();
        assert_eq!(best.secret_bits, 0);
        assert_eq!(best.label, "2-block");
        assert!(best_blocking(&trace, &[], &g, &params()).is_err());
    }

    #[test]
    fn improvement_metric() {
        assert!((improvement(1086, 1000).unwrap() - 8.6).abs() < 1e-12);
        assert_eq!(improvement(7, 7), Some(0.0));
        assert_eq!(improvement(5, 0), None);
        assert!(improvement(900, 1000).unwrap() < 0.0);
    }

    #[test]
    fn trace_validation() {
        assert!(FidelityTrace::new("x", 2, vec![sample(1, 0.9, 1.0), sample(1, 0.9, 1.0)]).is_err());
        assert!(FidelityTrace::new("x", 2, vec![sample(0, 1.2, 1.0)]).is_err());
        let t = FidelityTrace::from_plateaus("x", &[(0.9, 2.0, 3)]).unwrap();
        let r = t.replicate(3);
        assert_eq!(r.samples().len(), 9);
        assert_eq!(r.horizon(), 9);
        assert_eq!(r.total_bits(), 18.0);
    }
}
