//! Randomized falsification: sample valid populations whose outcome
//! tables satisfy the monotone response/selection orderings by
//! construction, then demand that every identity holds and every
//! produced bound brackets the enumerated truth. Any counterexample is
//! either a bug or a disproof, and is written out verbatim.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::admissible_profiles;
use crate::error::{Error, Result};
use crate::model::{
    ComplianceType, GroupProfile, MuRow, OutcomeMeanFunction, PopulationSpec, WeightedProfile,
    ALL_TYPES,
};
use crate::oracle;

/// Which population family to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// One peer, all six compliance types.
    Pairs,
    /// `m` peers under one-sided noncompliance (types C, G, N only),
    /// the regime in which multi-peer spillover bounds exist.
    OneSidedMulti { m: usize },
}

impl Family {
    pub fn for_m(m: usize) -> Self {
        if m == 1 {
            Family::Pairs
        } else {
            Family::OneSidedMulti { m }
        }
    }

    fn m(self) -> usize {
        match self {
            Family::Pairs => 1,
            Family::OneSidedMulti { m } => m,
        }
    }

    fn types(self) -> &'static [ComplianceType] {
        use ComplianceType::*;
        match self {
            Family::Pairs => &ALL_TYPES,
            Family::OneSidedMulti { .. } => &[Complier, GroupComplier, NeverTaker],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub trials: u64,
    pub seed: u64,
    pub family: Family,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub trial: u64,
    pub what: String,
    /// The offending population, verbatim, for replay.
    pub spec: PopulationSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub trials: u64,
    pub seed: u64,
    pub counterexamples: Vec<Counterexample>,
}

impl SearchReport {
    pub fn pass(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Baselines and own-treatment gaps ordered A >= S >= C >= P >= G >= N
/// with nonnegative gaps, plus a common sign-unrestricted peer increment:
/// every selection inequality the bounds cite holds for any mixture
/// weights, and every response inequality holds type by type.
fn random_mu(rng: &mut ChaCha8Rng, m: usize) -> OutcomeMeanFunction {
    use ComplianceType::*;
    let order = [NeverTaker, GroupComplier, PeerComplier, Complier, SocialComplier, AlwaysTaker];
    let mut baseline = rng.gen_range(-1.0..1.0);
    let mut gap = rng.gen_range(0.0..0.5);
    let mut table = std::collections::BTreeMap::new();
    let mut increments = vec![0.0f64];
    for _ in 1..=m {
        increments.push(increments.last().unwrap() + rng.gen_range(-0.5..0.5));
    }
    for ty in order {
        let d0: Vec<f64> = (0..=m).map(|k| baseline + increments[k]).collect();
        let d1: Vec<f64> = (0..=m).map(|k| baseline + gap + increments[k]).collect();
        table.insert(ty, MuRow { d0, d1 });
        baseline += rng.gen_range(0.0..0.8);
        gap += rng.gen_range(0.0..0.5);
    }
    OutcomeMeanFunction::new(table)
}

/// One random valid population: a sparsified Dirichlet over the
/// irrelevance-admissible profiles and a monotone outcome table.
pub fn random_spec(
    admissible: &[GroupProfile],
    family: Family,
    rng: &mut ChaCha8Rng,
) -> PopulationSpec {
    let m = family.m();
    let mut kept: Vec<&GroupProfile> =
        admissible.iter().filter(|_| rng.gen_bool(0.75)).collect();
    if kept.is_empty() {
        kept.push(&admissible[rng.gen_range(0..admissible.len())]);
    }
    // unit-exponential weights normalize to a flat Dirichlet draw
    let weights: Vec<f64> = kept.iter().map(|_| -rng.gen_range(0.0f64..1.0).ln().max(1e-12)).collect();
    let total: f64 = weights.iter().sum();
    let profiles: Vec<WeightedProfile> = kept
        .into_iter()
        .zip(weights)
        .map(|(p, w)| WeightedProfile { types: p.clone(), prob: w / total })
        .collect();
    let mu = random_mu(rng, m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in mu.table.values() {
        for v in row.d0.iter().chain(&row.d1) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let slack = rng.gen_range(0.0..0.3);
    PopulationSpec {
        m,
        p_z: rng.gen_range(0.3..0.7),
        y_support: [lo - slack, hi + slack],
        profiles,
        mu,
        noise_sd: 0.0,
    }
}

fn check_spec(spec: &PopulationSpec) -> Result<Option<String>> {
    let identities = oracle::verify_identities(spec)?;
    if !identities.pass {
        let worst = identities
            .failures()
            .map(|c| format!("{} ({} vs {})", c.name, c.moment_side, c.enumeration_side))
            .collect::<Vec<_>>()
            .join("; ");
        return Ok(Some(format!("identity failure: {worst}")));
    }
    let validity = oracle::verify_bounds(spec)?;
    if !validity.pass {
        let worst = validity
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{}: {}", c.estimand, c.notes.join("; ")))
            .collect::<Vec<_>>()
            .join(" | ");
        return Ok(Some(format!("bound validity failure: {worst}")));
    }
    Ok(None)
}

/// Run the falsification search. Deterministic given the seed; trials run
/// in parallel and are keyed individually.
pub fn run(config: &SearchConfig) -> Result<SearchReport> {
    if config.trials < 1 {
        return Err(Error::Input("trials must be at least 1".into()));
    }
    let admissible = admissible_profiles(config.family.m() + 1, config.family.types())?;
    if admissible.is_empty() {
        return Err(Error::Input("no admissible profiles for this family".into()));
    }
    let results: Vec<Result<Option<Counterexample>>> = crate::worker_pool().install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    config.seed ^ trial.wrapping_mul(0xA24BAED4963EE407),
                );
                let spec = random_spec(&admissible, config.family, &mut rng);
                Ok(check_spec(&spec)?.map(|what| Counterexample { trial, what, spec }))
            })
            .collect()
    });
    let mut counterexamples = Vec::new();
    for r in results {
        if let Some(ce) = r? {
            counterexamples.push(ce);
        }
    }
    Ok(SearchReport { trials: config.trials, seed: config.seed, counterexamples })
}
