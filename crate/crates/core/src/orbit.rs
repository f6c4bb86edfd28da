//! Polar LEO constellation on circular two-body orbits over a spherical Earth.
//!
//! Positions are expressed in an Earth-fixed Cartesian frame (meters) whose
//! x axis pierces the Greenwich meridian on the equator. At `t = 0` the
//! inertial frame coincides with the Earth-fixed one, and the ascending node
//! of ring 0 lies on the Greenwich meridian.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Earth gravitational parameter (m^3/s^2).
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Sidereal rotation rate (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

pub type Vec3 = [f64; 3];

#[inline]
fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn cross_norm(a: &Vec3, b: &Vec3) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    norm(&c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStation {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

impl GroundStation {
    pub fn new(name: impl Into<String>, latitude: f64, longitude: f64) -> Result<Self> {
        let gs = GroundStation {
            name: name.into(),
            latitude,
            longitude,
        };
        gs.validate()?;
        Ok(gs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::validation(
                format!("stations.{}.latitude", self.name),
                "must lie in [-90, 90] degrees",
            ));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::validation(
                format!("stations.{}.longitude", self.name),
                "must lie in [-180, 180] degrees",
            ));
        }
        Ok(())
    }

    /// Outward radial unit vector.
    pub fn up(&self) -> Vec3 {
        let (slat, clat) = self.latitude.to_radians().sin_cos();
        let (slon, clon) = self.longitude.to_radians().sin_cos();
        [clat * clon, clat * slon, slat]
    }

    /// Earth-fixed position on the spherical Earth.
    pub fn position(&self) -> Vec3 {
        let u = self.up();
        [u[0] * EARTH_RADIUS_M, u[1] * EARTH_RADIUS_M, u[2] * EARTH_RADIUS_M]
    }

    /// The cities of the reference case study.
    pub fn washington_dc() -> Self {
        GroundStation {
            name: "DC".into(),
            latitude: 38.9072,
            longitude: -77.0369,
        }
    }

    pub fn toronto() -> Self {
        GroundStation {
            name: "Toronto".into(),
            latitude: 43.6532,
            longitude: -79.3832,
        }
    }

    pub fn houston() -> Self {
        GroundStation {
            name: "Houston".into(),
            latitude: 29.7604,
            longitude: -95.3698,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub rings: u32,
    pub sats_per_ring: u32,
    /// Orbit altitude above the spherical Earth (m).
    pub altitude: f64,
    /// Spread of ascending-node longitudes across the rings (rad).
    pub raan_span: f64,
    /// Extra true-anomaly offset per ring index (rad).
    pub interplane_phase: f64,
    /// Test hook; when false the Earth-fixed frame stays inertial.
    pub earth_rotation: bool,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        ConstellationConfig {
            rings: 20,
            sats_per_ring: 20,
            altitude: 500_000.0,
            raan_span: PI,
            interplane_phase: 0.0,
            earth_rotation: true,
        }
    }
}

impl ConstellationConfig {
    pub fn with_altitude(mut self, altitude: f64) -> Self {
        self.altitude = altitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rings == 0 {
            return Err(Error::validation("constellation.rings", "must be >= 1"));
        }
        if self.sats_per_ring == 0 {
            return Err(Error::validation("constellation.sats_per_ring", "must be >= 1"));
        }
        if !(self.altitude > 0.0 && self.altitude.is_finite()) {
            return Err(Error::validation("constellation.altitude", "must be > 0 meters"));
        }
        if !self.raan_span.is_finite() || !self.interplane_phase.is_finite() {
            return Err(Error::validation(
                "constellation.raan_span",
                "angles must be finite",
            ));
        }
        Ok(())
    }

    pub fn orbit_radius(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude
    }

    pub fn len(&self) -> usize {
        self.rings as usize * self.sats_per_ring as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Satellite identifier; ordering is (ring, slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatId {
    pub ring: u32,
    pub slot: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatPosition {
    pub id: SatId,
    pub position: Vec3,
}

/// A satellite visible from both stations of a pair at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityRecord {
    pub time: f64,
    pub sat: SatId,
    pub elevation_a: f64,
    pub elevation_b: f64,
}

/// Circular-orbit period from Kepler's third law.
pub fn kepler_period(altitude: f64) -> f64 {
    let a = EARTH_RADIUS_M + altitude;
    TAU * (a * a * a / EARTH_MU).sqrt()
}

/// Earth-fixed positions of every satellite at time `t` (seconds since epoch).
pub fn propagate(config: &ConstellationConfig, t: f64) -> Vec<SatPosition> {
    let radius = config.orbit_radius();
    let mean_motion = TAU / kepler_period(config.altitude);
    let spin = if config.earth_rotation {
        EARTH_ROTATION_RATE * t
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(config.len());
    for ring in 0..config.rings {
        let node = ring as f64 * config.raan_span / config.rings as f64 - spin;
        let (snode, cnode) = node.sin_cos();
        for slot in 0..config.sats_per_ring {
            let anomaly = TAU * slot as f64 / config.sats_per_ring as f64
                + ring as f64 * config.interplane_phase
                + mean_motion * t;
            let (su, cu) = anomaly.sin_cos();
            // Inclination 90 degrees: the orbit plane contains the polar axis.
            out.push(SatPosition {
                id: SatId { ring, slot },
                position: [radius * cnode * cu, radius * snode * cu, radius * su],
            });
        }
    }
    out
}

/// Elevation of the satellite above the station's local horizon, in degrees.
pub fn elevation(sat: &SatPosition, gs: &GroundStation) -> f64 {
    elevation_from(&sat.position, &gs.position(), &gs.up())
}

#[inline]
fn elevation_from(sat: &Vec3, station: &Vec3, up: &Vec3) -> f64 {
    let d = sub(sat, station);
    let along = dot(&d, up);
    let across = cross_norm(&d, up);
    // Rounding in d leaves a residue of a few ulps across the vertical.
    if across <= 1e-12 * along.abs() {
        return 90f64.copysign(along);
    }
    along.atan2(across).to_degrees()
}

/// Line-of-sight distance station to satellite (m).
pub fn slant_range(sat: &SatPosition, gs: &GroundStation) -> f64 {
    norm(&sub(&sat.position, &gs.position()))
}

/// Slant range implied by an elevation angle on the spherical Earth.
pub fn slant_range_at_elevation(altitude: f64, elevation_deg: f64) -> f64 {
    let r = EARTH_RADIUS_M;
    let a = r + altitude;
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    (a * a - r * r * ce * ce).sqrt() - r * se
}

/// Satellites whose elevation from both stations is at least `min_elevation`.
pub fn visible_sats(
    config: &ConstellationConfig,
    t: f64,
    pair: (&GroundStation, &GroundStation),
    min_elevation: f64,
) -> Vec<VisibilityRecord> {
    let (a, b) = pair;
    let (pa, ua) = (a.position(), a.up());
    let (pb, ub) = (b.position(), b.up());
    propagate(config, t)
        .into_iter()
        .filter_map(|sat| {
            let ea = elevation_from(&sat.position, &pa, &ua);
            if ea < min_elevation {
                return None;
            }
            let eb = elevation_from(&sat.position, &pb, &ub);
            (eb >= min_elevation).then_some(VisibilityRecord {
                time: t,
                sat: sat.id,
                elevation_a: ea,
                elevation_b: eb,
            })
        })
        .collect()
}
