//! Exact population analysis of the canonical fixtures: true estimand
//! values by enumeration, the identity suite, bound validity, and the
//! interference-blind IV estimand for comparison.
//!
//! ```text
//! cargo run --example population_oracle
//! ```

use spillover_iv::bounds::{all_bounds, iv_estimand, BoundMode, BoundOptions};
use spillover_iv::oracle::{population_moments, true_estimands, verify_bounds, verify_identities};
use spillover_iv::{assumptions, fixtures};

pub fn run() -> spillover_iv::Result<()> {
    for (name, spec) in [
        ("no interference (pairs)", fixtures::p0()),
        ("group compliers (pairs)", fixtures::p1()),
        ("one-sided noncompliance (triads)", fixtures::p2()),
    ] {
        println!("== {name} ==");
        let truths = true_estimands(&spec)?;
        let ms = population_moments(&spec)?;
        let mode = if spec.m == 1 { BoundMode::Pairs } else { BoundMode::Multi };
        let osnc = assumptions::check_osnc(&spec).pass;
        let opts = BoundOptions::population(mode, osnc);
        let intervals = all_bounds(&ms, spec.y_support, &opts)?;
        for iv in &intervals {
            let truth = truths
                .truth(iv.estimand)
                .and_then(|t| t.value)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "does not exist".into());
            match (iv.lower, iv.upper) {
                (Some(l), Some(_)) if iv.point_identified => {
                    println!("  {}: point {l:.6} (truth {truth})", iv.estimand)
                }
                (Some(l), Some(u)) => {
                    println!("  {}: [{l:.6}, {u:.6}] (truth {truth})", iv.estimand)
                }
                _ => println!("  {}: exists={} (truth {truth})", iv.estimand, iv.exists),
            }
        }
        match iv_estimand(&ms) {
            Ok(v) => println!("  naive IV estimand: {v:.6}"),
            Err(e) => println!("  naive IV estimand: {e}"),
        }
        if let Some(late) = truths.late {
            println!("  enumerated IV estimand: {late:.6}");
        }
        let identities = verify_identities(&spec)?;
        println!(
            "  identities: {}/{} hold to {}",
            identities.checks.iter().filter(|c| c.pass).count(),
            identities.checks.len(),
            identities.tolerance
        );
        let validity = verify_bounds(&spec)?;
        println!("  bound validity: {}", if validity.pass { "ok" } else { "VIOLATED" });
        println!();
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
