//! Which satellites of the default 20 x 20 constellation both stations of a
//! pair can see, minute by minute over the first hour.
//!
//!     cargo run --example visibility -- [altitude_m]

use satqkd::orbit::{kepler_period, visible_sats, ConstellationConfig, GroundStation};

fn main() {
    let altitude: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("altitude must be a number"))
        .unwrap_or(500_000.0);
    let cfg = ConstellationConfig::default().with_altitude(altitude);
    let (a, b) = (GroundStation::toronto(), GroundStation::washington_dc());
    println!(
        "{} satellites at {} km, period {:.1} s",
        cfg.len(),
        altitude / 1e3,
        kepler_period(altitude)
    );

    let mut covered = 0;
    for minute in 0..60 {
        let t = minute as f64 * 60.0;
        let vis = visible_sats(&cfg, t, (&a, &b), 20.0);
        if vis.is_empty() {
            println!("t={t:>6.0}s  no common view");
            continue;
        }
        covered += 1;
        let best = vis
            .iter()
            .max_by(|x, y| x.elevation_a.min(x.elevation_b).total_cmp(&y.elevation_a.min(y.elevation_b)))
            .unwrap();
        println!(
            "t={t:>6.0}s  {} in view, highest ring {} slot {} at {:.1} / {:.1} deg",
            vis.len(),
            best.sat.ring,
            best.sat.slot,
            best.elevation_a,
            best.elevation_b
        );
    }
    println!("common view in {covered} of 60 minutes");
}
