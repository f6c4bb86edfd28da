//! One simulated day for a station pair: link availability, sifted bits and
//! mean fidelity in each of the four radiance intervals.
//!
//!     cargo run --release --example channel_trace -- [A:B] [altitude_m]

use satqkd::harness::{run_trace, ExperimentConfig, StationPair};

fn main() -> satqkd::Result<()> {
    let mut args = std::env::args().skip(1);
    let pair: StationPair = args.next().unwrap_or_else(|| "Toronto:DC".into()).parse()?;
    let altitude: f64 = args
        .next()
        .map(|s| s.parse().expect("altitude must be a number"))
        .unwrap_or(500_000.0);
    let cfg = ExperimentConfig::default();
    let trace = run_trace(&cfg, &pair, altitude)?;

    println!("{pair} at {} km: {:.4e} sifted bits", altitude / 1e3, trace.total_bits());
    let names = ["12am-6am", "6am-12pm", "12pm-6pm", "6pm-12am"];
    for (i, name) in names.iter().enumerate() {
        let lo = i as u64 * 21_600;
        let linked: Vec<_> = trace
            .samples()
            .iter()
            .filter(|s| s.time >= lo && s.time < lo + 21_600)
            .filter_map(|s| s.fidelity.map(|f| (f, s.sifted_bits)))
            .collect();
        if linked.is_empty() {
            println!("  {name}: no link");
            continue;
        }
        let mean = linked.iter().map(|(f, _)| f).sum::<f64>() / linked.len() as f64;
        let (min, max) = linked
            .iter()
            .fold((1.0f64, 0.0f64), |(lo, hi), (f, _)| (lo.min(*f), hi.max(*f)));
        let bits: f64 = linked.iter().map(|(_, b)| b).sum();
        println!(
            "  {name}: {:>5} s linked, {bits:.3e} bits, fidelity mean {mean:.4} range [{min:.4}, {max:.4}]",
            linked.len()
        );
    }
    Ok(())
}
