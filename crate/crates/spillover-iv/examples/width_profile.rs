use spillover_iv::bounds::{all_bounds, BoundMode, BoundOptions};
use spillover_iv::fixtures;
use spillover_iv::oracle::population_moments;

/// How interval width responds to the compliance-type mix: move mass from
/// complier pairs to group-complier pairs and watch the treated-peers
/// direct effect widen while the untreated-peers one stays point
/// identified (its width is driven only by social/peer compliers, which
/// this family never contains).
///
/// ```text
/// cargo run --example width_profile
/// ```
pub fn run() -> spillover_iv::Result<Vec<(f64, f64, f64)>> {
    let opts = BoundOptions::population(BoundMode::Pairs, false);
    let mut rows = Vec::new();
    println!("{:>6}  {:>12}  {:>12}", "eps", "width tauD0", "width tauD1");
    for i in 0..=5 {
        let eps = i as f64 / 100.0;
        let spec = fixtures::p1_epsilon(eps);
        let ms = population_moments(&spec)?;
        let intervals = all_bounds(&ms, spec.y_support, &opts)?;
        let width = |idx: usize| intervals[idx].width().unwrap_or(f64::NAN);
        println!("{eps:>6.2}  {:>12.6}  {:>12.6}", width(0), width(1));
        rows.push((eps, width(0), width(1)));
    }
    Ok(rows)
}

fn main() {
    run().unwrap();
}
