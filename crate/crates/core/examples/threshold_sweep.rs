//! Non-blockwise key length as a function of the discard threshold on a
//! simulated day, normalised by its maximum.
//!
//!     cargo run --release --example threshold_sweep -- [altitude_m]

use satqkd::harness::{run_trace, ExperimentConfig, StationPair};
use satqkd::strategy::threshold_sweep;

fn main() -> satqkd::Result<()> {
    let altitude: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("altitude must be a number"))
        .unwrap_or(500_000.0);
    let cfg = ExperimentConfig::default();
    let pair = StationPair::new("Toronto", "DC");
    let trace = run_trace(&cfg, &pair, altitude)?;
    let grids = cfg.search_grids()?;
    let sweep = threshold_sweep(trace.samples(), &grids.thresholds, &grids.sampling_rates, &cfg.security)?;

    let max = sweep.iter().map(|c| c.secret_bits()).max().unwrap_or(0).max(1);
    println!("{pair} at {} km", altitude / 1e3);
    println!("{:>6} {:>14} {:>10} {:>12} {:>14}", "theta", "kept bits", "qber", "test rate", "secret bits");
    for c in &sweep {
        let bar = "#".repeat((40.0 * c.secret_bits() as f64 / max as f64) as usize);
        println!(
            "{:>6.2} {:>14.4e} {:>10.5} {:>12.3e} {:>14} {bar}",
            c.threshold,
            c.retained_bits,
            c.qber.unwrap_or(f64::NAN),
            c.sampling.map_or(f64::NAN, |s| s.rate),
            c.secret_bits()
        );
    }
    Ok(())
}
