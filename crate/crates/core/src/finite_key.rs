//! Finite-key and asymptotic secret-key lengths for entanglement-based QKD.
//!
//! Every function here is pure. Key lengths are analytic quantities; no bit
//! strings are ever materialised.
//!
//! The non-blockwise length for `n` kept bits, `m` test bits and observed
//! error rate `Q` is
//!
//! ```text
//! l = n (1 - h(Q + mu)) - lambda_EC - log2(2 / (eps_sec^2 eps_cor))
//! mu = sqrt( (n + m)(m + 1) / (n m^2) * ln(2 / eps_sec) )
//! lambda_EC = f * n * h(Q + mu)            (f = 1 by default)
//! ```
//!
//! A block is distilled with the same expression using `n = B - m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Failure budgets for secrecy and correctness, plus the error-correction
/// efficiency multiplier applied to `lambda_EC`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityParams {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub ec_efficiency: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            eps_sec: 1e-9,
            eps_cor: 1e-15,
            ec_efficiency: 1.0,
        }
    }
}

impl SecurityParams {
    pub fn new(eps_sec: f64, eps_cor: f64) -> Result<Self> {
        let params = SecurityParams {
            eps_sec,
            eps_cor,
            ec_efficiency: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_ec_efficiency(mut self, efficiency: f64) -> Result<Self> {
        self.ec_efficiency = efficiency;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sec > 0.0 && self.eps_sec < 1.0) {
            return Err(Error::validation("security.eps_sec", "must lie in (0, 1)"));
        }
        if !(self.eps_cor > 0.0 && self.eps_cor < 1.0) {
            return Err(Error::validation("security.eps_cor", "must lie in (0, 1)"));
        }
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            return Err(Error::validation(
                "security.ec_efficiency",
                "must be a finite value >= 1",
            ));
        }
        Ok(())
    }

    /// The `log2(2 / (eps_sec^2 eps_cor))` privacy-amplification overhead.
    pub fn security_cost(&self) -> f64 {
        // Expanded so that tiny budgets do not underflow the product.
        1.0 - 2.0 * self.eps_sec.log2() - self.eps_cor.log2()
    }
}

/// Split of `N` sifted bits into kept key material and the disclosed test sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCounts {
    n_keep: u64,
    m_test: u64,
}

impl SampleCounts {
    pub fn new(n_keep: u64, m_test: u64) -> Result<Self> {
        if m_test == 0 {
            return Err(Error::domain("SampleCounts", "m_test must be >= 1"));
        }
        Ok(SampleCounts { n_keep, m_test })
    }

    pub fn n_keep(&self) -> u64 {
        self.n_keep
    }

    pub fn m_test(&self) -> u64 {
        self.m_test
    }

    pub fn total(&self) -> u64 {
        self.n_keep + self.m_test
    }
}

/// One independently distilled block: `B_i` sifted bits, `m_i` of them tested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    block_size: u64,
    test_size: u64,
    qber: f64,
}

impl BlockStats {
    pub fn new(block_size: u64, test_size: u64, qber: f64) -> Result<Self> {
        if test_size == 0 || test_size >= block_size {
            return Err(Error::domain(
                "BlockStats",
                format!("need 0 < test_size < block_size, got {test_size} / {block_size}"),
            ));
        }
        check_qber("BlockStats", qber)?;
        Ok(BlockStats {
            block_size,
            test_size,
            qber,
        })
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn test_size(&self) -> u64 {
        self.test_size
    }

    pub fn qber(&self) -> f64 {
        self.qber
    }

    pub fn counts(&self) -> SampleCounts {
        SampleCounts {
            n_keep: self.block_size - self.test_size,
            m_test: self.test_size,
        }
    }
}

/// Key length with the intermediate quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyLengthResult {
    /// `max(0, floor(raw_value))`.
    pub secret_bits: u64,
    pub raw_value: f64,
    pub mu: f64,
    pub ec_leakage: f64,
}

/// Blockwise total, `sum_i l_i`, keeping each block's own result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalKeyLength {
    pub secret_bits: u64,
    pub per_block: Vec<KeyLengthResult>,
}

impl TotalKeyLength {
    pub fn ec_leakage(&self) -> f64 {
        self.per_block.iter().map(|r| r.ec_leakage).sum()
    }
}

fn check_qber(op: &'static str, qber: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::domain(op, format!("qber {qber} outside [0, 0.5]")));
    }
    Ok(())
}

/// Unchecked binary entropy; callers guarantee `x` in `[0, 1]`.
#[inline]
pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    // ln_1p keeps full relative precision of the (1 - x) term for small x.
    -(x * x.log2()) - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2
}

/// `h(x) = -x log2 x - (1 - x) log2(1 - x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("binary_entropy", format!("x = {x} outside [0, 1]")));
    }
    Ok(entropy(x))
}

/// Finite-sampling deviation `mu` for `n` kept and `m` tested bits.
pub fn sampling_deviation(counts: SampleCounts, eps_sec: f64) -> Result<f64> {
    if counts.n_keep == 0 {
        return Err(Error::domain("sampling_deviation", "n_keep must be >= 1"));
    }
    if !(eps_sec > 0.0 && eps_sec < 1.0) {
        return Err(Error::domain("sampling_deviation", "eps_sec must lie in (0, 1)"));
    }
    let n = counts.n_keep as f64;
    let m = counts.m_test as f64;
    let ratio = ((n + m) / n) * ((m + 1.0) / (m * m));
    Ok((ratio * (2.0 / eps_sec).ln()).sqrt())
}

/// `lambda_EC = n h(min(Q + mu, 0.5))` at unit efficiency.
pub fn ec_leakage(n_keep: u64, qber: f64, mu: f64) -> Result<f64> {
    check_qber("ec_leakage", qber)?;
    if !(mu >= 0.0) {
        return Err(Error::domain("ec_leakage", format!("mu = {mu} must be >= 0")));
    }
    Ok(n_keep as f64 * entropy(effective_error(qber, mu)))
}

#[inline]
fn effective_error(qber: f64, mu: f64) -> f64 {
    (qber + mu).min(0.5)
}

fn finish(raw_value: f64, mu: f64, ec_leakage: f64, n_keep: u64) -> KeyLengthResult {
    let secret_bits = if raw_value > 0.0 {
        (raw_value.floor() as u64).min(n_keep)
    } else {
        0
    };
    KeyLengthResult {
        secret_bits,
        raw_value,
        mu,
        ec_leakage,
    }
}

/// Secret-key length when all sifted bits are distilled as one block.
pub fn key_length_nonblock(
    counts: SampleCounts,
    qber: f64,
    params: &SecurityParams,
) -> Result<KeyLengthResult> {
    check_qber("key_length_nonblock", qber)?;
    let mu = sampling_deviation(counts, params.eps_sec)?;
    let n = counts.n_keep as f64;
    let h = entropy(effective_error(qber, mu));
    let leak = params.ec_efficiency * n * h;
    let raw = n * (1.0 - h) - leak - params.security_cost();
    Ok(finish(raw, mu, leak, counts.n_keep))
}

/// Secret-key length `l_i` of one block.
pub fn key_length_block(block: BlockStats, params: &SecurityParams) -> Result<KeyLengthResult> {
    key_length_nonblock(block.counts(), block.qber, params)
}

/// `l_block = sum_i l_i`; each block is clamped at zero before summing.
pub fn key_length_total(blocks: &[BlockStats], params: &SecurityParams) -> Result<TotalKeyLength> {
    let per_block = blocks
        .iter()
        .map(|b| key_length_block(*b, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(TotalKeyLength {
        secret_bits: per_block.iter().map(|r| r.secret_bits).sum(),
        per_block,
    })
}

/// Infinite-data key rate `max(0, 1 - 2 h(Q))`.
pub fn asymptotic_rate_nonblock(qber: f64) -> Result<f64> {
    check_qber("asymptotic_rate_nonblock", qber)?;
    Ok((1.0 - 2.0 * entropy(qber)).max(0.0))
}

/// Infinite-data blockwise rate `sum_i p_i max(0, 1 - 2 h(Q_i))`.
pub fn asymptotic_rate_block(fractions: &[(f64, f64)]) -> Result<f64> {
    let mut mass = 0.0;
    let mut rate = 0.0;
    for &(p, q) in fractions {
        if !(p >= 0.0) {
            return Err(Error::domain(
                "asymptotic_rate_block",
                format!("fraction {p} must be >= 0"),
            ));
        }
        mass += p;
        rate += p * asymptotic_rate_nonblock(q)?;
    }
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::domain(
            "asymptotic_rate_block",
            format!("fractions sum to {mass}, expected 1"),
        ));
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SecurityParams {
        SecurityParams::new(1e-9, 1e-15).unwrap()
    }

    #[test]
    fn entropy_reference_points() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // Frozen from a 256-bit evaluation.
        let h = binary_entropy(0.11).unwrap();
        assert!((h - 0.499_915_958_164_528).abs() < 1e-15, "{h}");
    }

    #[test]
    fn entropy_rejects_out_of_range() {
        assert!(binary_entropy(-1e-12).is_err());
        assert!(binary_entropy(1.0 + 1e-12).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn sampling_deviation_examples() {
        let mu = sampling_deviation(SampleCounts::new(990_000, 10_000).unwrap(), 1e-9).unwrap();
        assert!((mu - 0.046_513_335_395_094_77).abs() < 1e-14, "{mu}");
        let mu = sampling_deviation(SampleCounts::new(1_000_000, 1_000_000).unwrap(), 1e-9).unwrap();
        assert!((mu - 6.544_682_487_931_615e-3).abs() < 1e-16, "{mu}");
        let a = sampling_deviation(SampleCounts::new(1_000_000, 1_000).unwrap(), 1e-9).unwrap();
        let b = sampling_deviation(SampleCounts::new(1_000_000, 2_000).unwrap(), 1e-9).unwrap();
        assert!(b < a);
    }

    #[test]
    fn sampling_deviation_needs_kept_bits() {
        let counts = SampleCounts::new(0, 10).unwrap();
        assert!(sampling_deviation(counts, 1e-9).is_err());
        assert!(SampleCounts::new(10, 0).is_err());
    }

    #[test]
    fn ec_leakage_examples() {
        assert_eq!(ec_leakage(1000, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(ec_leakage(1000, 0.5, 0.0).unwrap(), 1000.0);
        let leak = ec_leakage(990_000, 0.02, 0.04651).unwrap();
        assert!((leak - 349_234.939_017_274).abs() < 1e-6, "{leak}");
        // Q + mu above 0.5 saturates instead of folding back.
        assert_eq!(ec_leakage(100, 0.4, 0.3).unwrap(), 100.0);
    }

    #[test]
    fn nonblock_examples() {
        let r = key_length_nonblock(SampleCounts::new(990_000, 10_000).unwrap(), 0.02, &params())
            .unwrap();
        assert_eq!(r.secret_bits, 291_394);
        assert!((r.raw_value - 291_394.330_493_490_7).abs() < 1e-6, "{}", r.raw_value);

        let r = key_length_nonblock(SampleCounts::new(1000, 10).unwrap(), 0.45, &params()).unwrap();
        assert_eq!(r.secret_bits, 0);

        let small = SampleCounts::new(10, 1).unwrap();
        let r = key_length_nonblock(small, 0.0, &params()).unwrap();
        assert!(r.mu > 0.5);
        assert_eq!(r.secret_bits, 0);
        assert!(r.raw_value < 0.0);
    }

    #[test]
    fn nonblock_equals_two_entropy_form() {
        let counts = SampleCounts::new(5_000_000, 40_000).unwrap();
        let p = params();
        let r = key_length_nonblock(counts, 0.03, &p).unwrap();
        let h = entropy(0.03 + r.mu);
        let alt = 5_000_000.0 * (1.0 - 2.0 * h) - p.security_cost();
        assert!((r.raw_value - alt).abs() <= 1e-9 * alt.abs());
    }

    #[test]
    fn ec_efficiency_scales_leakage() {
        let counts = SampleCounts::new(1_000_000, 10_000).unwrap();
        let base = key_length_nonblock(counts, 0.02, &params()).unwrap();
        let lossy = key_length_nonblock(counts, 0.02, &params().with_ec_efficiency(1.2).unwrap())
            .unwrap();
        assert!((lossy.ec_leakage - 1.2 * base.ec_leakage).abs() < 1e-6);
        assert!(lossy.secret_bits < base.secret_bits);
        assert!(params().with_ec_efficiency(0.9).is_err());
    }

    #[test]
    fn block_examples() {
        let p = params();
        let single = key_length_block(BlockStats::new(1_000_000, 10_000, 0.02).unwrap(), &p).unwrap();
        let nb = key_length_nonblock(SampleCounts::new(990_000, 10_000).unwrap(), 0.02, &p).unwrap();
        assert_eq!(single, nb);

        let tiny = key_length_block(BlockStats::new(100, 50, 0.0).unwrap(), &p).unwrap();
        assert_eq!(tiny.secret_bits, 0);

        let worthless = key_length_block(BlockStats::new(1_000_000, 10_000, 0.5).unwrap(), &p).unwrap();
        assert_eq!(worthless.secret_bits, 0);

        assert!(BlockStats::new(100, 100, 0.0).is_err());
        assert!(BlockStats::new(100, 0, 0.0).is_err());
        assert!(BlockStats::new(100, 10, 0.6).is_err());
    }

    #[test]
    fn total_examples() {
        let p = params();
        assert_eq!(key_length_total(&[], &p).unwrap().secret_bits, 0);

        let good = BlockStats::new(2_000_000, 20_000, 0.01).unwrap();
        let one = key_length_total(&[good], &p).unwrap().secret_bits;
        assert!(one > 0);
        assert_eq!(key_length_total(&[good, good], &p).unwrap().secret_bits, 2 * one);

        let bad = BlockStats::new(1_000, 10, 0.2).unwrap();
        let mixed = key_length_total(&[good, bad], &p).unwrap();
        assert_eq!(mixed.secret_bits, one);
        assert!(mixed.per_block[1].raw_value < 0.0);
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(asymptotic_rate_nonblock(0.0).unwrap(), 1.0);
        assert_eq!(asymptotic_rate_nonblock(0.5).unwrap(), 0.0);
        let r = asymptotic_rate_nonblock(0.11).unwrap();
        assert!((r - 1.680_836_709_440_054e-4).abs() < 1e-15, "{r}");

        let q = 0.07;
        assert_eq!(
            asymptotic_rate_block(&[(1.0, q)]).unwrap(),
            asymptotic_rate_nonblock(q).unwrap()
        );
        assert_eq!(asymptotic_rate_block(&[(0.5, 0.0), (0.5, 0.5)]).unwrap(), 0.5);
        let split = asymptotic_rate_block(&[(0.5, 0.01), (0.5, 0.09)]).unwrap();
        let merged = asymptotic_rate_nonblock(0.05).unwrap();
        assert!(split >= merged, "{split} < {merged}");
    }

    #[test]
    fn asymptotic_block_requires_unit_mass() {
        assert!(asymptotic_rate_block(&[(0.5, 0.01), (0.4, 0.02)]).is_err());
        assert!(asymptotic_rate_block(&[(1.2, 0.01), (-0.2, 0.02)]).is_err());
        assert!(asymptotic_rate_block(&[]).is_err());
    }

    #[test]
    fn security_params_validation() {
        assert!(SecurityParams::new(0.0, 1e-15).is_err());
        assert!(SecurityParams::new(1e-9, 1.0).is_err());
        let p = SecurityParams::new(1e-9, 1e-15).unwrap();
        let direct = (2.0 / (1e-18 * 1e-15_f64)).log2();
        assert!((p.security_cost() - direct).abs() < 1e-12);
    }
}
