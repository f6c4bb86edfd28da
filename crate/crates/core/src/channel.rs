//! Dual-downlink channel model: per-arm transmissivity, background clicks,
//! delivered fidelity and sifted key rate for one second of operation.
//!
//! The source is an ideal pair emitter. Signal coincidences carry the source
//! state; accidental coincidences (a noise click paired with a photon or with
//! another noise click) carry the maximally mixed state. The delivered state
//! is treated as Werner-form, so each basis sees `Q = 2(1 - F)/3`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{
    slant_range_at_elevation, visible_sats, ConstellationConfig, GroundStation, SatId,
    VisibilityRecord,
};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
const INTERVAL_S: f64 = SECONDS_PER_DAY / 4.0;
const MIXED_FIDELITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// Entangled pairs emitted per second.
    pub pair_rate: f64,
    /// Recorded only; the ideal-pair model has no multi-photon terms.
    pub pump_power: f64,
    pub source_fidelity: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            pair_rate: 1e9,
            pump_power: 0.01,
            source_fidelity: 1.0,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate > 0.0 && self.pair_rate.is_finite()) {
            return Err(Error::validation("source.pair_rate", "must be > 0"));
        }
        if !(self.pump_power >= 0.0) {
            return Err(Error::validation("source.pump_power", "must be >= 0"));
        }
        if !(MIXED_FIDELITY..=1.0).contains(&self.source_fidelity) {
            return Err(Error::validation(
                "source.source_fidelity",
                "must lie in [0.25, 1]",
            ));
        }
        Ok(())
    }
}

/// Per-arm optics and detectors; both ground stations share these values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    /// Full-angle beam divergence of each transmitter (rad).
    pub beam_divergence: f64,
    pub rx_aperture_diameter: f64,
    pub rx_efficiency: f64,
    pub zenith_optical_depth: f64,
    /// Intrinsic detector dark counts per second.
    pub dark_rate: f64,
    /// Coincidence gate (s).
    pub gate_time: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        OpticsConfig {
            beam_divergence: 10e-6,
            rx_aperture_diameter: 1.0,
            rx_efficiency: 0.5,
            zenith_optical_depth: 0.3,
            dark_rate: 100.0,
            gate_time: 1e-9,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("optics.beam_divergence", self.beam_divergence),
            ("optics.rx_aperture_diameter", self.rx_aperture_diameter),
            ("optics.gate_time", self.gate_time),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(field, "must be > 0"));
            }
        }
        if !(self.rx_efficiency > 0.0 && self.rx_efficiency <= 1.0) {
            return Err(Error::validation("optics.rx_efficiency", "must lie in (0, 1]"));
        }
        if !(self.zenith_optical_depth >= 0.0 && self.zenith_optical_depth.is_finite()) {
            return Err(Error::validation("optics.zenith_optical_depth", "must be >= 0"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::validation("optics.dark_rate", "must be >= 0"));
        }
        Ok(())
    }
}

/// Sky-background multipliers for the four 6-hour intervals starting at
/// 12am, 6am, 12pm and 6pm. Time zero is midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadianceSchedule {
    pub interval_scales: [f64; 4],
}

impl Default for RadianceSchedule {
    fn default() -> Self {
        RadianceSchedule {
            interval_scales: [1.0, 20.0, 100.0, 1.0],
        }
    }
}

impl RadianceSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.interval_scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::validation(
                "radiance.interval_scales",
                "all four scales must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Index of the 6-hour interval containing `t`.
    pub fn interval(t: f64) -> usize {
        let tod = t.rem_euclid(SECONDS_PER_DAY);
        ((tod / INTERVAL_S) as usize).min(3)
    }

    pub fn scale(&self, t: f64) -> f64 {
        self.interval_scales[Self::interval(t)]
    }
}

/// Everything needed to turn link geometry into a [`LinkSample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub source: SourceConfig,
    pub optics: OpticsConfig,
    pub radiance: RadianceSchedule,
    /// Background photons per second per detector at radiance scale 1.
    pub base_flux: f64,
    /// Probability of choosing the Z basis; sifting keeps `p^2 + (1-p)^2`.
    pub basis_bias: f64,
    pub min_elevation: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            source: SourceConfig::default(),
            optics: OpticsConfig::default(),
            radiance: RadianceSchedule::default(),
            base_flux: 7e3,
            basis_bias: 0.5,
            min_elevation: 20.0,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.optics.validate()?;
        self.radiance.validate()?;
        if !(self.base_flux >= 0.0 && self.base_flux.is_finite()) {
            return Err(Error::validation("radiance.base_flux", "must be >= 0"));
        }
        if !(self.basis_bias > 0.0 && self.basis_bias < 1.0) {
            return Err(Error::validation("basis_bias", "must lie in (0, 1)"));
        }
        if !(0.0..90.0).contains(&self.min_elevation) {
            return Err(Error::validation("min_elevation", "must lie in [0, 90)"));
        }
        Ok(())
    }

    pub fn sifting_factor(&self) -> f64 {
        let p = self.basis_bias;
        p * p + (1.0 - p) * (1.0 - p)
    }
}

/// One second of channel output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub time: u64,
    /// `None` when no satellite serves the pair.
    pub fidelity: Option<f64>,
    /// Sifted bits delivered during the sample interval.
    pub sifted_bits: f64,
    pub sat: Option<SatId>,
}

impl LinkSample {
    pub fn no_link(time: u64) -> Self {
        LinkSample {
            time,
            fidelity: None,
            sifted_bits: 0.0,
            sat: None,
        }
    }
}

/// Per-arm transmissivity: diffraction-limited capture times airmass-scaled
/// extinction times receiver efficiency.
pub fn arm_transmissivity(range: f64, zenith_angle: f64, optics: &OpticsConfig) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::domain("arm_transmissivity", "range must be > 0"));
    }
    if !(0.0..FRAC_PI_2).contains(&zenith_angle) {
        return Err(Error::domain(
            "arm_transmissivity",
            format!("zenith angle {zenith_angle} rad is not above the horizon"),
        ));
    }
    let capture = optics.rx_aperture_diameter / (optics.beam_divergence * range);
    let diffraction = (capture * capture).min(1.0);
    let atmosphere = (-optics.zenith_optical_depth / zenith_angle.cos()).exp();
    Ok(diffraction * atmosphere * optics.rx_efficiency)
}

pub fn pair_delivery_prob(eta_a: f64, eta_b: f64) -> f64 {
    eta_a * eta_b
}

/// Probability of a noise click within one gate at time `t`.
pub fn background_click_prob(
    t: f64,
    schedule: &RadianceSchedule,
    base_flux: f64,
    optics: &OpticsConfig,
) -> f64 {
    let rate = base_flux * schedule.scale(t) + optics.dark_rate;
    -(-rate * optics.gate_time).exp_m1()
}

/// Coincidences involving at least one noise click.
pub fn accidental_prob(pd_a: f64, pd_b: f64, eta_a: f64, eta_b: f64) -> f64 {
    pd_a * eta_b + pd_b * eta_a + pd_a * pd_b
}

pub fn delivered_fidelity(p_signal: f64, p_accidental: f64, source_fidelity: f64) -> Result<f64> {
    if !(p_signal >= 0.0 && p_accidental >= 0.0) {
        return Err(Error::domain(
            "delivered_fidelity",
            "probabilities must be non-negative",
        ));
    }
    let total = p_signal + p_accidental;
    if total <= 0.0 {
        return Err(Error::NoData("no coincidences to form a state".into()));
    }
    // Mixing weight form of (p_s F + p_acc / 4) / (p_s + p_acc); exact when p_acc = 0.
    let f = source_fidelity - (source_fidelity - MIXED_FIDELITY) * (p_accidental / total);
    Ok(f.clamp(MIXED_FIDELITY, 1.0))
}

/// Werner-state error rate per basis.
pub fn fidelity_to_qber(fidelity: f64) -> Result<f64> {
    if !(MIXED_FIDELITY..=1.0).contains(&fidelity) {
        return Err(Error::domain(
            "fidelity_to_qber",
            format!("fidelity {fidelity} outside [0.25, 1]"),
        ));
    }
    Ok(qber_of(fidelity))
}

#[inline]
pub(crate) fn qber_of(fidelity: f64) -> f64 {
    (2.0 * (1.0 - fidelity) / 3.0).clamp(0.0, 0.5)
}

/// Link budget for one candidate satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEstimate {
    pub sat: SatId,
    pub eta_a: f64,
    pub eta_b: f64,
    pub p_signal: f64,
    pub p_accidental: f64,
    pub fidelity: f64,
}

/// Evaluates the link through one visible satellite.
pub fn estimate_link(
    record: &VisibilityRecord,
    altitude: f64,
    model: &LinkModel,
) -> Result<LinkEstimate> {
    let arm = |elev: f64| {
        let range = slant_range_at_elevation(altitude, elev);
        arm_transmissivity(range, (90.0 - elev).to_radians(), &model.optics)
    };
    let eta_a = arm(record.elevation_a)?;
    let eta_b = arm(record.elevation_b)?;
    let pd = background_click_prob(record.time, &model.radiance, model.base_flux, &model.optics);
    let p_signal = pair_delivery_prob(eta_a, eta_b);
    let p_accidental = accidental_prob(pd, pd, eta_a, eta_b);
    let fidelity = delivered_fidelity(p_signal, p_accidental, model.source.source_fidelity)?;
    Ok(LinkEstimate {
        sat: record.sat,
        eta_a,
        eta_b,
        p_signal,
        p_accidental,
        fidelity,
    })
}

fn best_estimate(
    candidates: &[VisibilityRecord],
    altitude: f64,
    model: &LinkModel,
) -> Option<LinkEstimate> {
    let mut best: Option<LinkEstimate> = None;
    for rec in candidates {
        let Ok(est) = estimate_link(rec, altitude, model) else {
            continue;
        };
        best = match best {
            Some(b)
                if b.fidelity > est.fidelity
                    || (b.fidelity == est.fidelity && b.sat <= est.sat) =>
            {
                Some(b)
            }
            _ => Some(est),
        };
    }
    best
}

/// Candidate with the highest estimated delivered fidelity; ties go to the
/// lowest (ring, slot).
pub fn select_best_satellite(
    candidates: &[VisibilityRecord],
    altitude: f64,
    model: &LinkModel,
) -> Option<SatId> {
    best_estimate(candidates, altitude, model).map(|e| e.sat)
}

/// Channel output for one second at time `t`.
pub fn link_sample(
    t: u64,
    pair: (&GroundStation, &GroundStation),
    constellation: &ConstellationConfig,
    model: &LinkModel,
) -> LinkSample {
    let candidates = visible_sats(constellation, t as f64, pair, model.min_elevation);
    match best_estimate(&candidates, constellation.altitude, model) {
        Some(est) => LinkSample {
            time: t,
            fidelity: Some(est.fidelity),
            sifted_bits: model.source.pair_rate
                * (est.p_signal + est.p_accidental)
                * model.sifting_factor(),
            sat: Some(est.sat),
        },
        None => LinkSample::no_link(t),
    }
}
