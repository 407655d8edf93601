//! Sampling behavior of the plug-in bounds: endpoint bias and RMSE
//! against the population bounds, and how often the estimated interval
//! brackets the enumerated truth.
//!
//! ```text
//! cargo run --example monte_carlo
//! ```

use spillover_iv::fixtures;
use spillover_iv::montecarlo::{run as monte_carlo, MonteCarloConfig};

pub fn run(n_groups: u64, reps: u32) -> spillover_iv::Result<()> {
    let config = MonteCarloConfig { spec: fixtures::p1(), n_groups, reps, seed: 7 };
    let report = monte_carlo(&config)?;
    println!("{} replicates of {} pairs:", report.reps, report.n_groups);
    for (estimand, s) in &report.estimands {
        let truth = report.truths[estimand]
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "-".into());
        println!("  {estimand} (truth {truth}):");
        println!("    complete {} / failed {}", s.n_complete, s.n_failed);
        if let Some(f) = s.truth_bracketing_freq {
            println!("    truth bracketing frequency {f:.3}");
        }
        if let (Some(l), Some(u)) = (&s.lower, &s.upper) {
            println!(
                "    endpoint bias (L, U) = ({:+.4}, {:+.4}), rmse = ({:.4}, {:.4})",
                l.bias, u.bias, l.rmse, u.rmse
            );
        }
    }
    Ok(())
}

fn main() {
    run(50_000, 100).unwrap();
}
