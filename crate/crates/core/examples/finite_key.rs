//! Finite-size key length for one block of sifted bits, and how it
//! approaches the asymptotic rate as the block grows.
//!
//!     cargo run --example finite_key -- [qber]

use satqkd::finite_key::{asymptotic_rate_nonblock, SecurityParams};
use satqkd::strategy::{geometric_grid, optimize_sampling};

fn main() -> satqkd::Result<()> {
    let qber: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("qber must be a number"))
        .unwrap_or(0.02);
    let params = SecurityParams::default();
    let rates = geometric_grid(1e-5, 0.05, 50)?;
    let limit = asymptotic_rate_nonblock(qber)?;

    println!("Q = {qber}, asymptotic rate 1 - 2h(Q) = {limit:.6}");
    println!("{:>12} {:>12} {:>14} {:>10} {:>10}", "bits", "test rate", "secret bits", "l/N", "mu");
    for exp in 3..=11 {
        let n = 10f64.powi(exp);
        let best = optimize_sampling(n, qber, &rates, &params)?;
        println!(
            "{:>12.0e} {:>12.3e} {:>14} {:>10.6} {:>10.3e}",
            n,
            best.rate,
            best.result.secret_bits,
            best.result.secret_bits as f64 / n,
            best.result.mu
        );
    }
    Ok(())
}
