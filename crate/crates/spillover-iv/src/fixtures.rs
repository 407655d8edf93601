//! Canonical populations used across tests, examples, and docs.
//!
//! * `p0` — pairs, no interference of any kind (types A, C, N and no
//!   peer term in the outcome). The IV benchmark: both direct effects
//!   equal the LATE of 1.0 and both spillovers are zero.
//! * `p1` — pairs with two-sided noncompliance and group compliers.
//!   Homogeneous effects by construction: own effect 1.0, each treated
//!   peer adds 0.3.
//! * `p2` — triads (m = 2) under one-sided noncompliance (types C, G, N),
//!   own effect 1.0, each treated peer adds 0.25.
//!
//! Every profile in every fixture passes the irrelevance check, and the
//! outcome tables satisfy the monotone response/selection orderings used
//! by the bounds (baselines A=1.0 > C=0.6 > G=0.5 > N=0.2, common own
//! effect, common peer increments).

use crate::model::{
    ComplianceType, GroupProfile, OutcomeMeanFunction, PopulationSpec, WeightedProfile,
};
use ComplianceType::{AlwaysTaker as A, Complier as C, GroupComplier as G, NeverTaker as N};

pub const BASELINE_A: f64 = 1.0;
pub const BASELINE_C: f64 = 0.6;
pub const BASELINE_G: f64 = 0.5;
pub const BASELINE_N: f64 = 0.2;

fn profile(types: &[ComplianceType], prob: f64) -> WeightedProfile {
    WeightedProfile { types: GroupProfile::new(types.to_vec()).unwrap(), prob }
}

/// Pairs without interference: SUTVA holds exactly.
pub fn p0() -> PopulationSpec {
    PopulationSpec {
        m: 1,
        p_z: 0.5,
        y_support: [0.0, 2.5],
        profiles: vec![
            profile(&[C, C], 0.4),
            profile(&[C, N], 0.1),
            profile(&[N, C], 0.1),
            profile(&[N, N], 0.2),
            profile(&[A, A], 0.2),
        ],
        mu: OutcomeMeanFunction::additive(
            &[(A, BASELINE_A), (C, BASELINE_C), (N, BASELINE_N)],
            1.0,
            0.0,
            1,
        ),
        noise_sd: 0.04,
    }
}

/// Pairs with group compliers and two-sided noncompliance.
pub fn p1() -> PopulationSpec {
    PopulationSpec {
        m: 1,
        p_z: 0.5,
        y_support: [0.0, 2.5],
        profiles: vec![
            profile(&[C, C], 0.3),
            profile(&[A, A], 0.1),
            profile(&[N, N], 0.2),
            profile(&[A, C], 0.1),
            profile(&[C, A], 0.1),
            profile(&[N, C], 0.05),
            profile(&[C, N], 0.05),
            profile(&[G, C], 0.05),
            profile(&[C, G], 0.05),
        ],
        mu: OutcomeMeanFunction::additive(
            &[(A, BASELINE_A), (C, BASELINE_C), (G, BASELINE_G), (N, BASELINE_N)],
            1.0,
            0.3,
            1,
        ),
        noise_sd: 0.04,
    }
}

/// The one-parameter family around `p1` that moves mass `eps` from (C,C)
/// to (G,C) and (C,G) in equal halves. Valid for `eps` in [0, 0.3].
pub fn p1_epsilon(eps: f64) -> PopulationSpec {
    assert!((0.0..=0.3).contains(&eps), "eps out of range: {eps}");
    let mut spec = p1();
    spec.profiles[0].prob = 0.3 - eps;
    spec.profiles[7].prob = 0.05 + eps / 2.0;
    spec.profiles[8].prob = 0.05 + eps / 2.0;
    spec
}

/// Triads under one-sided noncompliance.
pub fn p2() -> PopulationSpec {
    PopulationSpec {
        m: 2,
        p_z: 0.5,
        y_support: [0.0, 2.5],
        profiles: vec![
            profile(&[C, C, C], 0.4),
            profile(&[C, C, G], 0.1),
            profile(&[C, G, C], 0.1),
            profile(&[G, C, C], 0.1),
            profile(&[G, G, G], 0.1),
            profile(&[N, N, N], 0.2),
        ],
        mu: OutcomeMeanFunction::additive(
            &[(C, BASELINE_C), (G, BASELINE_G), (N, BASELINE_N)],
            1.0,
            0.25,
            2,
        ),
        noise_sd: 0.04,
    }
}
