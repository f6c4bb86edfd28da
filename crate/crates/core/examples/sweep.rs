//! The full experiment for a chosen subset of pairs and altitudes, written
//! to a directory as results CSV plus plot data.
//!
//!     cargo run --release --example sweep -- [out_dir] [A:B] [altitude_m]

use std::path::PathBuf;

use satqkd::harness::commands::{resolve_config, sweep, Overrides};

fn main() -> satqkd::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sweep-out".into()));
    let pair = args.next().unwrap_or_else(|| "Toronto:DC".into()).parse()?;
    let altitude = args
        .next()
        .map(|s| s.parse().expect("altitude must be a number"))
        .unwrap_or(500_000.0);
    let cfg = resolve_config(
        None,
        &Overrides {
            altitudes: vec![altitude],
            pairs: vec![pair],
        },
    )?;
    let report = sweep(&cfg, &out)?;
    for row in &report.rows {
        println!(
            "{} {} km {:<24} {:>12} improvement {}",
            row.pair,
            row.altitude_m / 1e3,
            row.strategy,
            row.secret_bits.map_or("NA".into(), |b| b.to_string()),
            row.improvement_pct.map_or("NA".into(), |p| format!("{p:.3}%"))
        );
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
