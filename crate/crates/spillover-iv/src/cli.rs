//! Batch commands behind the `spillover-iv` binary. All logic lives in
//! the library; each command wires files to one pipeline and reports
//! through exit codes that CI can gate on:
//!
//! * 0 — success
//! * 2 — invalid input (config, data, flags); JSON error on stderr
//! * 3 — an identity or bracketing check failed
//! * 4 — the randomized search produced a counterexample

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::assumptions::{self, BoundMode};
use crate::bounds::{BoundOptions, FallbackPolicy};
use crate::error::{Error, Result};
use crate::estimate;
use crate::model::PopulationSpec;
use crate::montecarlo;
use crate::oracle;
use crate::search;
use crate::simulate;

#[derive(Debug, Parser)]
#[command(
    name = "spillover-iv",
    about = "Direct and spillover treatment-effect bounds for IV designs with peer interference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a seeded dataset from a population config and write it as CSV.
    Simulate(SimulateArgs),
    /// Exact verification: truths, identity suite, and bound validity.
    Oracle(OracleArgs),
    /// Plug-in bounds from a dataset.
    Bounds(BoundsArgs),
    /// Falsification tests and type-share recovery from a dataset.
    Diagnose(DiagnoseArgs),
    /// Randomized counterexample search over valid populations.
    Search(SearchArgs),
    /// Repeated simulate-estimate cycles against the population bounds.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Population spec (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n_groups: u64,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Input dataset (CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Force the one-peer bound formulas (default when the data has one peer).
    #[arg(long, conflicts_with = "multi")]
    pub pairs: bool,
    /// Force the multi-peer formulas (default when the data has several peers).
    #[arg(long)]
    pub multi: bool,
    /// Assert one-sided noncompliance; required for spillover bounds with
    /// several peers and checked against the data.
    #[arg(long)]
    pub osnc: bool,
    /// Policy for degenerate secondary denominators.
    #[arg(long, value_enum, default_value = "support-bounds")]
    pub fallback: FallbackArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FallbackArg {
    Refuse,
    SupportBounds,
    AltPairsThenSupport,
}

impl From<FallbackArg> for FallbackPolicy {
    fn from(a: FallbackArg) -> Self {
        match a {
            FallbackArg::Refuse => FallbackPolicy::Refuse,
            FallbackArg::SupportBounds => FallbackPolicy::SupportBounds,
            FallbackArg::AltPairsThenSupport => FallbackPolicy::AltPairsThenSupport,
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-condition significance level.
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Peer count of the sampled family; several peers imply the
    /// one-sided-noncompliance family.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n_groups: u64,
    #[arg(long)]
    pub reps: u32,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Search(args) => cmd_search(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let payload = json!({ "error": e.to_string() });
            eprintln!("{payload}");
            2
        }
    }
}

fn load_spec(path: &PathBuf) -> Result<PopulationSpec> {
    let text = std::fs::read_to_string(path)?;
    PopulationSpec::from_json(&text)?.validated()
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<i32> {
    let spec = load_spec(&args.config)?;
    for wp in spec.profiles.iter().filter(|wp| wp.prob > 0.0) {
        let report = assumptions::check_irrelevance(&wp.types)?;
        if !report.pass {
            return Err(Error::InvalidSpec(format!(
                "profile {} violates irrelevance: {}",
                wp.types.letters(),
                report.witnesses.join("; ")
            )));
        }
    }
    let config = simulate::SimulationConfig::new(spec, args.n_groups, args.seed)?;
    let dataset = simulate::draw_dataset(&config)?;
    let file = std::fs::File::create(&args.out)?;
    simulate::write_csv(&dataset, std::io::BufWriter::new(file))?;
    println!("spec digest: {}", config.spec.digest());
    let osnc = assumptions::check_osnc(&config.spec);
    println!("assumptions: irrelevance ok, one-sided noncompliance: {}", osnc.pass);
    let chain = assumptions::check_mts_chain(&config.spec)?;
    println!(
        "monotone selection chain (strict): {}",
        if chain.pass { "holds" } else { "violated" }
    );
    println!(
        "wrote {} rows ({} groups) to {}",
        dataset.rows.len(),
        dataset.n_groups(),
        args.out.display()
    );
    Ok(0)
}

pub fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let spec = load_spec(&args.config)?;
    let truths = oracle::true_estimands(&spec)?;
    let identities = oracle::verify_identities(&spec)?;
    let validity = oracle::verify_bounds(&spec)?;
    let report = json!({
        "spec_digest": spec.digest(),
        "truths": truths,
        "identities": identities,
        "bound_validity": validity,
    });
    write_json(&args.out, &report)?;
    println!(
        "identities: {}/{} hold (tolerance {})",
        identities.checks.iter().filter(|c| c.pass).count(),
        identities.checks.len(),
        identities.tolerance
    );
    for failure in identities.failures() {
        println!(
            "  FAILED {}: moment side {} vs enumeration side {}",
            failure.name, failure.moment_side, failure.enumeration_side
        );
    }
    println!(
        "bound validity: {}",
        if validity.pass { "all checks hold" } else { "violations found" }
    );
    for check in validity.checks.iter().filter(|c| !c.pass) {
        println!("  FAILED {}: {}", check.estimand, check.notes.join("; "));
    }
    if identities.pass && validity.pass {
        Ok(0)
    } else {
        Ok(3)
    }
}

pub fn cmd_bounds(args: BoundsArgs) -> Result<i32> {
    let data = estimate::ingest_csv_path(&args.data)?;
    let mode = if args.pairs {
        BoundMode::Pairs
    } else if args.multi {
        BoundMode::Multi
    } else if data.m == 1 {
        BoundMode::Pairs
    } else {
        BoundMode::Multi
    };
    let ms = estimate::sample_moments(&data);
    let mut opts = BoundOptions::sample(mode, args.osnc, ms.min_cell_count().unwrap_or(0));
    opts.fallback_policy = args.fallback.into();
    let report = estimate::plugin_bounds(&data, &opts)?;
    write_json(&args.out, &report)?;
    println!(
        "{:>7}  {:>12}  {:>12}  {:>6}  {:>5}  fallbacks",
        "effect", "lower", "upper", "exists", "point"
    );
    for iv in &report.intervals {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "refused".into(),
        };
        println!(
            "{:>7}  {:>12}  {:>12}  {:>6}  {:>5}  {:?}",
            iv.estimand.id(),
            fmt(iv.lower),
            fmt(iv.upper),
            iv.exists,
            iv.point_identified,
            iv.fallbacks_used
        );
    }
    for s in &report.skipped {
        println!("{:>7}  skipped: {}", s.estimand.id(), s.reason);
    }
    Ok(0)
}

pub fn cmd_diagnose(args: DiagnoseArgs) -> Result<i32> {
    let data = estimate::ingest_csv_path(&args.data)?;
    let ms = estimate::sample_moments(&data);
    if let Some(cell) = crate::model::Cell::ALL.iter().find(|c| !ms.cell(**c).is_populated()) {
        return Err(Error::EmptyCell {
            z_own: cell.z_own as u8,
            z_peers: cell.z_peers as u8,
        });
    }
    let sutva = crate::diagnostics::sutva_test(&data, args.level);
    let irrelevance = crate::diagnostics::irrelevance_test(&data, args.level);
    let shares = crate::diagnostics::type_shares(&ms)?;
    let report = json!({
        "sutva": sutva,
        "irrelevance": irrelevance,
        "type_shares": shares,
    });
    write_json(&args.out, &report)?;
    println!("no-interference deltas: {}", verdict(sutva.pass));
    println!("irrelevance sign conditions: {}", verdict(irrelevance.pass));
    for share in shares.iter().filter(|s| s.value.abs() > 1e-6) {
        println!("  {} = {:.6}  [{}]", share.name, share.value, share.moment);
    }
    Ok(0)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "consistent with the data"
    } else {
        "rejected"
    }
}

pub fn cmd_search(args: SearchArgs) -> Result<i32> {
    if args.trials < 1 {
        return Err(Error::Input("trials must be at least 1".into()));
    }
    if args.m < 1 {
        return Err(Error::Input("m must be at least 1".into()));
    }
    let config = search::SearchConfig {
        trials: args.trials,
        seed: args.seed,
        family: search::Family::for_m(args.m),
    };
    let report = search::run(&config)?;
    write_json(&args.out, &report)?;
    if report.pass() {
        println!("{} trials, no counterexample", report.trials);
        Ok(0)
    } else {
        let first = &report.counterexamples[0];
        println!(
            "counterexample at trial {}: {} (spec in {})",
            first.trial,
            first.what,
            args.out.display()
        );
        Ok(4)
    }
}

pub fn cmd_montecarlo(args: MonteCarloArgs) -> Result<i32> {
    let spec = load_spec(&args.config)?;
    let config = montecarlo::MonteCarloConfig {
        spec,
        n_groups: args.n_groups,
        reps: args.reps,
        seed: args.seed,
    };
    if config.reps < 1 {
        return Err(Error::Input("reps must be at least 1".into()));
    }
    let report = montecarlo::run(&config)?;
    write_json(&args.out, &report)?;
    for (key, s) in &report.estimands {
        let bracket = s
            .truth_bracketing_freq
            .map(|f| format!("{f:.3}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{key}: complete {}, failed {}, truth bracketing {bracket}",
            s.n_complete, s.n_failed
        );
    }
    Ok(0)
}
