//! Instrumental-variable analysis of peer groups under interference:
//! simulation of compliance-type populations, exact oracles by
//! enumeration, partial-identification bounds for direct and spillover
//! treatment effects, plug-in estimation, and falsification diagnostics.
//!
//! The high-level flow is
//!
//! 1. describe a population ([`model::PopulationSpec`]),
//! 2. either compute exact moments and truths ([`oracle`]) or draw a
//!    finite dataset ([`simulate`]) and estimate moments ([`estimate`]),
//! 3. map moments to interval results for the four estimands ([`bounds`]),
//! 4. test the identifying assumptions against data ([`diagnostics`]).
//!
//! Run `cargo run --example population_oracle` (or any other example) for
//! an end-to-end tour; the `spillover-iv` binary wires the same pieces
//! into batch commands.

pub mod assumptions;
pub mod bounds;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod fixtures;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod rng;
pub mod search;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    ComplianceType, Dataset, Estimand, GroupProfile, IntervalResult, MomentSet,
    OutcomeMeanFunction, PopulationSpec,
};

/// Build a rayon thread pool respecting the `SPILLOVER_IV_THREADS` cap.
/// Results never depend on the worker count; only wall time does.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SPILLOVER_IV_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder.build().expect("thread pool")
}
