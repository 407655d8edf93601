//! Domain types: compliance behavior, peer groups, populations, datasets,
//! and the conditional-moment container shared by the oracle and estimators.
//!
//! Groups are disjoint and fully connected: every member's peer set is the
//! other `m` members. All values are immutable after construction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a unit's treatment responds to its own and its peers' assignments.
///
/// With one peer the six types reproduce the standard taxonomy bit for bit:
///
/// | type | D(1,1) | D(1,0) | D(0,1) | D(0,0) |
/// |------|--------|--------|--------|--------|
/// | A    | 1      | 1      | 1      | 1      |
/// | S    | 1      | 1      | 1      | 0      |
/// | C    | 1      | 1      | 0      | 0      |
/// | P    | 1      | 0      | 1      | 0      |
/// | G    | 1      | 0      | 0      | 0      |
/// | N    | 0      | 0      | 0      | 0      |
///
/// With several peers the spillover-responsive types aggregate peer
/// assignments: social and peer compliers react to *any* assigned peer,
/// group compliers require *all* peers assigned (see [`PEER_AGGREGATION`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplianceType {
    #[serde(rename = "A")]
    AlwaysTaker,
    #[serde(rename = "S")]
    SocialComplier,
    #[serde(rename = "C")]
    Complier,
    #[serde(rename = "P")]
    PeerComplier,
    #[serde(rename = "G")]
    GroupComplier,
    #[serde(rename = "N")]
    NeverTaker,
}

/// Documents the multi-peer semantics of the spillover-responsive types.
/// The one-peer taxonomy does not pin these down; `any` for S and P and
/// `all` for G preserve the verbal definitions ("as soon as themselves or
/// their peer is assigned", "only when they and their peers are assigned")
/// and keep both monotonicity conditions valid by construction.
pub const PEER_AGGREGATION: &str = "S: any(peers), P: any(peers), G: all(peers)";

pub const ALL_TYPES: [ComplianceType; 6] = [
    ComplianceType::AlwaysTaker,
    ComplianceType::SocialComplier,
    ComplianceType::Complier,
    ComplianceType::PeerComplier,
    ComplianceType::GroupComplier,
    ComplianceType::NeverTaker,
];

impl ComplianceType {
    pub fn letter(self) -> char {
        match self {
            ComplianceType::AlwaysTaker => 'A',
            ComplianceType::SocialComplier => 'S',
            ComplianceType::Complier => 'C',
            ComplianceType::PeerComplier => 'P',
            ComplianceType::GroupComplier => 'G',
            ComplianceType::NeverTaker => 'N',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        Ok(match c {
            'A' => ComplianceType::AlwaysTaker,
            'S' => ComplianceType::SocialComplier,
            'C' => ComplianceType::Complier,
            'P' => ComplianceType::PeerComplier,
            'G' => ComplianceType::GroupComplier,
            'N' => ComplianceType::NeverTaker,
            _ => return Err(Error::Input(format!("unknown compliance type letter '{c}'"))),
        })
    }
}

impl fmt::Display for ComplianceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Potential treatment D(z_own, z_peers) for a unit of the given type.
///
/// Monotone nondecreasing in `z_own` and in every peer coordinate.
pub fn potential_treatment(
    ty: ComplianceType,
    z_own: bool,
    z_peers: &[bool],
) -> Result<bool> {
    if z_peers.is_empty() {
        return Err(Error::Input("z_peers must contain at least one peer".into()));
    }
    let any_peer = z_peers.iter().any(|&z| z);
    let all_peers = z_peers.iter().all(|&z| z);
    Ok(match ty {
        ComplianceType::AlwaysTaker => true,
        ComplianceType::SocialComplier => z_own || any_peer,
        ComplianceType::Complier => z_own,
        ComplianceType::PeerComplier => any_peer,
        ComplianceType::GroupComplier => z_own && all_peers,
        ComplianceType::NeverTaker => false,
    })
}

/// An ordered list of compliance types, one per group member. Member i's
/// peers are all other members.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupProfile(pub Vec<ComplianceType>);

impl GroupProfile {
    pub fn new(types: Vec<ComplianceType>) -> Result<Self> {
        if types.len() < 2 {
            return Err(Error::Input(format!(
                "a group profile needs at least 2 members, got {}",
                types.len()
            )));
        }
        Ok(GroupProfile(types))
    }

    pub fn from_letters(s: &str) -> Result<Self> {
        let types = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(ComplianceType::from_letter)
            .collect::<Result<Vec<_>>>()?;
        GroupProfile::new(types)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn types(&self) -> &[ComplianceType] {
        &self.0
    }

    pub fn letters(&self) -> String {
        self.0.iter().map(|t| t.letter()).collect()
    }
}

/// Realized treatments of every member under the assignment `z`.
pub fn group_treatments(profile: &GroupProfile, z: &[bool]) -> Result<Vec<bool>> {
    let g = profile.len();
    if z.len() != g {
        return Err(Error::Input(format!(
            "assignment length {} does not match group size {}",
            z.len(),
            g
        )));
    }
    let mut out = Vec::with_capacity(g);
    let mut peers = Vec::with_capacity(g - 1);
    for i in 0..g {
        peers.clear();
        peers.extend(z.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
        out.push(potential_treatment(profile.0[i], z[i], &peers)?);
    }
    Ok(out)
}

/// Treatments at a corner assignment: member `i` gets `z_own`, every other
/// member gets `z_peers`. Returns member i's treatment and its peers'
/// treatments in member order.
pub fn corner_treatments(
    profile: &GroupProfile,
    i: usize,
    z_own: bool,
    z_peers: bool,
) -> Result<(bool, Vec<bool>)> {
    let g = profile.len();
    let mut z = vec![z_peers; g];
    z[i] = z_own;
    let d = group_treatments(profile, &z)?;
    let own = d[i];
    let peers = d
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, v)| v)
        .collect();
    Ok((own, peers))
}

/// Mean potential outcome by compliance type, exchangeable in peers:
/// mu(type, d_own, k) where k counts treated peers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeMeanFunction {
    /// type letter -> rows for d_own = 0 and d_own = 1, each indexed by k = 0..m.
    pub table: BTreeMap<ComplianceType, MuRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
}

impl OutcomeMeanFunction {
    pub fn new(table: BTreeMap<ComplianceType, MuRow>) -> Self {
        OutcomeMeanFunction { table }
    }

    /// Convenience constructor: mu(t, d, k) = baseline(t) + own_effect * d + peer_effect * k.
    pub fn additive(
        baselines: &[(ComplianceType, f64)],
        own_effect: f64,
        peer_effect: f64,
        m: usize,
    ) -> Self {
        let mut table = BTreeMap::new();
        for &(ty, b) in baselines {
            let d0 = (0..=m).map(|k| b + peer_effect * k as f64).collect();
            let d1 = (0..=m).map(|k| b + own_effect + peer_effect * k as f64).collect();
            table.insert(ty, MuRow { d0, d1 });
        }
        OutcomeMeanFunction { table }
    }

    pub fn mu(&self, ty: ComplianceType, d_own: bool, treated_peers: usize) -> Result<f64> {
        let row = self
            .table
            .get(&ty)
            .ok_or_else(|| Error::Input(format!("mu not defined for type {ty}")))?;
        let v = if d_own { &row.d1 } else { &row.d0 };
        v.get(treated_peers).copied().ok_or_else(|| {
            Error::Input(format!("mu({ty}, d={}, k={treated_peers}) out of range", d_own as u8))
        })
    }
}

/// A population: group size, distribution over type profiles, outcome means,
/// outcome support, and the instrument design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    /// Peer count; groups have m + 1 members.
    pub m: usize,
    /// Instrument assignment probability, i.i.d. across units.
    pub p_z: f64,
    /// Outcome support `[y_min, y_max]`, used by the support fallbacks.
    pub y_support: [f64; 2],
    pub profiles: Vec<WeightedProfile>,
    pub mu: OutcomeMeanFunction,
    /// Zero-mean normal disturbance scale for sampling; draws are truncated
    /// so realized outcomes stay inside the support.
    #[serde(default)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedProfile {
    pub types: GroupProfile,
    pub prob: f64,
}

/// One line per violated invariant; an empty report means the spec passes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every spec invariant and reports all violations; never aborts.
pub fn validate_spec(spec: &PopulationSpec) -> ValidationReport {
    let mut v = Vec::new();
    if spec.m < 1 {
        v.push(format!("m must be >= 1, got {}", spec.m));
    }
    if !(spec.p_z > 0.0 && spec.p_z < 1.0) {
        v.push(format!("p_z must lie strictly in (0, 1), got {}", spec.p_z));
    }
    let [y_min, y_max] = spec.y_support;
    if !(y_min.is_finite() && y_max.is_finite() && y_min <= y_max) {
        v.push(format!("y_support [{y_min}, {y_max}] is not a finite interval"));
    }
    if !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0) {
        v.push(format!("noise_sd must be finite and >= 0, got {}", spec.noise_sd));
    }
    if spec.profiles.is_empty() {
        v.push("profile distribution is empty".into());
    }
    let mut total = 0.0;
    for (idx, wp) in spec.profiles.iter().enumerate() {
        if wp.prob < 0.0 || !wp.prob.is_finite() {
            v.push(format!("profile {idx} has invalid probability {}", wp.prob));
        }
        total += wp.prob;
        if wp.types.len() != spec.m + 1 {
            v.push(format!(
                "profile {idx} ({}) has {} members, expected m+1 = {}",
                wp.types.letters(),
                wp.types.len(),
                spec.m + 1
            ));
        }
    }
    if (total - 1.0).abs() > 1e-12 {
        v.push(format!("profile_dist sums to {total}"));
    }
    // mu coverage and support containment for every type that carries mass
    for wp in spec.profiles.iter().filter(|wp| wp.prob > 0.0) {
        for &ty in wp.types.types() {
            for d in [false, true] {
                for k in 0..=spec.m {
                    match spec.mu.mu(ty, d, k) {
                        Ok(val) if !val.is_finite() => {
                            v.push(format!("mu({ty}, d={}, k={k}) is not finite", d as u8))
                        }
                        Ok(val) if val < y_min - 1e-12 || val > y_max + 1e-12 => v.push(format!(
                            "mu({ty}, d={}, k={k}) = {val} lies outside y_support [{y_min}, {y_max}]",
                            d as u8
                        )),
                        Ok(_) => {}
                        Err(e) => v.push(e.to_string()),
                    }
                }
            }
        }
    }
    let mut report = ValidationReport { violations: v };
    report.violations.dedup();
    report
}

impl PopulationSpec {
    /// Group size m + 1.
    pub fn group_size(&self) -> usize {
        self.m + 1
    }

    /// Validate and return self, or the full violation list as an error.
    pub fn validated(self) -> Result<Self> {
        let report = validate_spec(&self);
        if report.passed() {
            Ok(self)
        } else {
            Err(Error::InvalidSpec(report.violations.join("; ")))
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: PopulationSpec = serde_json::from_str(s)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON encoding; identifies a spec in reports.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_string(self).expect("spec serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Iterate over (unit weight, profile, member index) with weights
    /// summing to one: a unit is a uniformly chosen member of a profile
    /// drawn from the profile distribution.
    pub fn for_each_unit<F: FnMut(f64, &GroupProfile, usize)>(&self, mut f: F) {
        let g = self.group_size() as f64;
        for wp in &self.profiles {
            if wp.prob <= 0.0 {
                continue;
            }
            let w = wp.prob / g;
            for i in 0..wp.types.len() {
                f(w, &wp.types, i);
            }
        }
    }
}

/// One observed unit: group and unit ids, instrument, treatment, outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRow {
    pub group_id: u64,
    pub unit_id: u32,
    pub z: bool,
    pub d: bool,
    pub y: f64,
}

/// Provenance of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub seed: u64,
    pub spec_digest: String,
}

/// Unit-level rows with constant group size m + 1, sorted by (group, unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub m: usize,
    pub rows: Vec<UnitRow>,
    pub sidecar: Option<TruthSidecar>,
}

impl Dataset {
    pub fn new(m: usize, rows: Vec<UnitRow>, sidecar: Option<TruthSidecar>) -> Result<Self> {
        let ds = Dataset { m, rows, sidecar };
        ds.check()?;
        Ok(ds)
    }

    fn check(&self) -> Result<()> {
        let g = self.m + 1;
        if self.rows.len() % g != 0 {
            return Err(Error::Input(format!(
                "row count {} is not a multiple of group size {g}",
                self.rows.len()
            )));
        }
        for chunk in self.rows.chunks(g) {
            let gid = chunk[0].group_id;
            let mut ids: Vec<u32> = chunk.iter().map(|r| r.unit_id).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != g || chunk.iter().any(|r| r.group_id != gid) {
                return Err(Error::Input(format!(
                    "group {gid} does not have {g} rows with distinct unit ids"
                )));
            }
            for r in chunk {
                if !r.y.is_finite() {
                    return Err(Error::Input(format!(
                        "non-finite outcome in group {gid}, unit {}",
                        r.unit_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.rows.len() / (self.m + 1)
    }

    /// Groups as contiguous row slices.
    pub fn groups(&self) -> impl Iterator<Item = &[UnitRow]> {
        self.rows.chunks(self.m + 1)
    }
}

/// An instrument cell: own assignment and the shared assignment of all peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub z_own: bool,
    pub z_peers: bool,
}

impl Cell {
    pub const fn new(z_own: bool, z_peers: bool) -> Self {
        Cell { z_own, z_peers }
    }

    pub fn index(self) -> usize {
        (self.z_own as usize) * 2 + self.z_peers as usize
    }

    pub const ALL: [Cell; 4] = [
        Cell::new(false, false),
        Cell::new(false, true),
        Cell::new(true, false),
        Cell::new(true, true),
    ];
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(Z_i={}, Z_(i)={})", self.z_own as u8, self.z_peers as u8)
    }
}

/// Own-treatment factor of a moment basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwnFactor {
    One,
    Treated,
    Untreated,
}

/// Peer-treatment factor of a moment basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeerFactor {
    One,
    NoneTreated,
    AllTreated,
}

/// A basis function: own factor times peer factor, optionally times Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantity {
    pub own: OwnFactor,
    pub peers: PeerFactor,
    pub with_y: bool,
}

impl Quantity {
    pub const fn of(own: OwnFactor, peers: PeerFactor) -> Self {
        Quantity { own, peers, with_y: false }
    }

    /// The constant 1.
    pub const UNIT: Quantity = Quantity::of(OwnFactor::One, PeerFactor::One);
    /// D_i.
    pub const OWN_TREATED: Quantity = Quantity::of(OwnFactor::Treated, PeerFactor::One);
    /// 1 - D_i.
    pub const OWN_UNTREATED: Quantity = Quantity::of(OwnFactor::Untreated, PeerFactor::One);
    /// No peer treated.
    pub const NO_PEER_TREATED: Quantity = Quantity::of(OwnFactor::One, PeerFactor::NoneTreated);
    /// All peers treated.
    pub const ALL_PEERS_TREATED: Quantity = Quantity::of(OwnFactor::One, PeerFactor::AllTreated);
    /// D_i and no peer treated.
    pub const TREATED_NO_PEERS: Quantity =
        Quantity::of(OwnFactor::Treated, PeerFactor::NoneTreated);
    /// Neither the unit nor any peer treated.
    pub const NOBODY_TREATED: Quantity =
        Quantity::of(OwnFactor::Untreated, PeerFactor::NoneTreated);
    /// The unit and every peer treated.
    pub const EVERYBODY_TREATED: Quantity =
        Quantity::of(OwnFactor::Treated, PeerFactor::AllTreated);
    /// Untreated unit whose peers are all treated.
    pub const UNTREATED_ALL_PEERS: Quantity =
        Quantity::of(OwnFactor::Untreated, PeerFactor::AllTreated);

    pub const fn with_y(self) -> Self {
        Quantity { with_y: true, ..self }
    }

    fn slot(self) -> usize {
        let a = match self.own {
            OwnFactor::One => 0,
            OwnFactor::Treated => 1,
            OwnFactor::Untreated => 2,
        };
        let b = match self.peers {
            PeerFactor::One => 0,
            PeerFactor::NoneTreated => 1,
            PeerFactor::AllTreated => 2,
        };
        a * 3 + b
    }

    pub fn label(self) -> String {
        let own = match self.own {
            OwnFactor::One => "",
            OwnFactor::Treated => "D_i",
            OwnFactor::Untreated => "(1-D_i)",
        };
        let peers = match self.peers {
            PeerFactor::One => "",
            PeerFactor::NoneTreated => "Dvee_(i)",
            PeerFactor::AllTreated => "Dwedge_(i)",
        };
        let body = match (own.is_empty(), peers.is_empty()) {
            (true, true) => "1".to_string(),
            (true, false) => peers.to_string(),
            (false, true) => own.to_string(),
            (false, false) => format!("{own} {peers}"),
        };
        if self.with_y {
            format!("Y {body}")
        } else {
            body
        }
    }

    /// Evaluate at a unit: own treatment, number of treated peers out of m.
    pub fn eval(self, d_own: bool, treated_peers: usize, m: usize, y: f64) -> f64 {
        let a = match self.own {
            OwnFactor::One => 1.0,
            OwnFactor::Treated => d_own as u8 as f64,
            OwnFactor::Untreated => (!d_own) as u8 as f64,
        };
        let b = match self.peers {
            PeerFactor::One => 1.0,
            PeerFactor::NoneTreated => (treated_peers == 0) as u8 as f64,
            PeerFactor::AllTreated => (treated_peers == m) as u8 as f64,
        };
        let base = a * b;
        if self.with_y {
            base * y
        } else {
            base
        }
    }
}

/// Moments of one instrument cell: the 9 indicator products with and
/// without a Y factor, plus the cell's weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    /// Population probability of the cell, or the sample unit count.
    pub weight: f64,
    /// Unit count when the cell came from data; `None` for population cells.
    pub count: Option<u64>,
    pub indicator: [f64; 9],
    pub with_y: [f64; 9],
}

impl CellMoments {
    pub fn empty() -> Self {
        CellMoments { weight: 0.0, count: Some(0), indicator: [f64::NAN; 9], with_y: [f64::NAN; 9] }
    }

    pub fn is_populated(&self) -> bool {
        match self.count {
            Some(n) => n > 0,
            None => true,
        }
    }
}

/// Conditional expectations over the four instrument cells of the
/// treatment-indicator basis, with and without Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m: usize,
    pub cells: [CellMoments; 4],
}

impl MomentSet {
    pub fn cell(&self, c: Cell) -> &CellMoments {
        &self.cells[c.index()]
    }

    /// E[quantity | cell]; errors when the cell has no observations.
    pub fn expectation(&self, q: Quantity, c: Cell) -> Result<f64> {
        let cm = self.cell(c);
        if !cm.is_populated() {
            return Err(Error::EmptyCell { z_own: c.z_own as u8, z_peers: c.z_peers as u8 });
        }
        let arr = if q.with_y { &cm.with_y } else { &cm.indicator };
        Ok(arr[q.slot()])
    }

    /// Smallest populated cell count, if this is a sample moment set.
    pub fn min_cell_count(&self) -> Option<u64> {
        self.cells.iter().map(|c| c.count).collect::<Option<Vec<_>>>().map(|v| {
            v.into_iter().min().unwrap_or(0)
        })
    }

    pub fn is_sample(&self) -> bool {
        self.cells.iter().all(|c| c.count.is_some())
    }
}

/// Identifier of a causal estimand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimand {
    /// Direct effect of own treatment with all peers untreated.
    #[serde(rename = "tauD0")]
    Direct0,
    /// Direct effect of own treatment with all peers treated.
    #[serde(rename = "tauD1")]
    Direct1,
    /// Spillover from induced peers onto untreated units.
    #[serde(rename = "tauS0")]
    Spill0,
    /// Spillover from induced peers onto treated units.
    #[serde(rename = "tauS1")]
    Spill1,
    /// The interference-blind IV estimand.
    #[serde(rename = "late")]
    Late,
}

impl Estimand {
    pub fn id(self) -> &'static str {
        match self {
            Estimand::Direct0 => "tauD0",
            Estimand::Direct1 => "tauD1",
            Estimand::Spill0 => "tauS0",
            Estimand::Spill1 => "tauS1",
            Estimand::Late => "late",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Fallback used for a bound endpoint when a required compliance-type
/// share is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "ymin")]
    YMin,
    #[serde(rename = "ymax")]
    YMax,
    #[serde(rename = "alt_AN_pair")]
    AltAnPair,
    #[serde(rename = "alt_NA_pair")]
    AltNaPair,
}

/// A partially identified estimand: endpoints, existence, point
/// identification, fallback provenance, and every denominator that entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub estimand: Estimand,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub exists: bool,
    pub point_identified: bool,
    pub fallbacks_used: Vec<Fallback>,
    pub denominators: BTreeMap<String, f64>,
}

impl IntervalResult {
    pub fn nonexistent(estimand: Estimand, denominators: BTreeMap<String, f64>) -> Self {
        IntervalResult {
            estimand,
            lower: None,
            upper: None,
            exists: false,
            point_identified: false,
            fallbacks_used: vec![],
            denominators,
        }
    }

    pub fn width(&self) -> Option<f64> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) => Some(u - l),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ComplianceType::*;

    fn b(x: u8) -> bool {
        x != 0
    }

    /// The one-peer table, row for row: A, S, C, P, G, N at
    /// (z_own, z_peer) = (1,1), (1,0), (0,1), (0,0).
    #[test]
    fn one_peer_table_matches_taxonomy() {
        let expected: [(ComplianceType, [u8; 4]); 6] = [
            (AlwaysTaker, [1, 1, 1, 1]),
            (SocialComplier, [1, 1, 1, 0]),
            (Complier, [1, 1, 0, 0]),
            (PeerComplier, [1, 0, 1, 0]),
            (GroupComplier, [1, 0, 0, 0]),
            (NeverTaker, [0, 0, 0, 0]),
        ];
        for (ty, row) in expected {
            let cells = [(true, true), (true, false), (false, true), (false, false)];
            for (want, (zo, zp)) in row.iter().zip(cells) {
                let got = potential_treatment(ty, zo, &[zp]).unwrap();
                assert_eq!(got as u8, *want, "type {ty} at ({}, {})", zo as u8, zp as u8);
            }
        }
    }

    #[test]
    fn multi_peer_aggregators() {
        assert!(potential_treatment(GroupComplier, true, &[true]).unwrap());
        assert!(!potential_treatment(NeverTaker, true, &[true, true, true]).unwrap());
        assert!(potential_treatment(SocialComplier, false, &[false, true]).unwrap());
        assert!(!potential_treatment(GroupComplier, true, &[true, false]).unwrap());
        assert!(potential_treatment(PeerComplier, false, &[false, true, false]).unwrap());
    }

    #[test]
    fn potential_treatment_rejects_empty_peers() {
        assert!(potential_treatment(Complier, true, &[]).is_err());
    }

    /// Flipping any single assignment coordinate 0 -> 1 never decreases any
    /// treatment, for every type and every peer configuration up to m = 4.
    #[test]
    fn exhaustive_monotonicity() {
        for m in 1..=4usize {
            for ty in ALL_TYPES {
                for mask in 0..(1u32 << (m + 1)) {
                    let z_own = b((mask & 1) as u8);
                    let z_peers: Vec<bool> =
                        (0..m).map(|j| mask >> (j + 1) & 1 == 1).collect();
                    let base = potential_treatment(ty, z_own, &z_peers).unwrap();
                    if !z_own {
                        let up = potential_treatment(ty, true, &z_peers).unwrap();
                        assert!(up >= base, "{ty} not monotone in z_own");
                    }
                    for j in 0..m {
                        if !z_peers[j] {
                            let mut zp = z_peers.clone();
                            zp[j] = true;
                            let up = potential_treatment(ty, z_own, &zp).unwrap();
                            assert!(up >= base, "{ty} not monotone in peer {j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn group_treatments_examples() {
        let cc = GroupProfile::from_letters("CC").unwrap();
        assert_eq!(group_treatments(&cc, &[true, false]).unwrap(), vec![true, false]);
        let an = GroupProfile::from_letters("AN").unwrap();
        assert_eq!(group_treatments(&an, &[false, true]).unwrap(), vec![true, false]);
        let ccg = GroupProfile::from_letters("CCG").unwrap();
        assert_eq!(
            group_treatments(&ccg, &[true, true, true]).unwrap(),
            vec![true, true, true]
        );
        assert!(group_treatments(&cc, &[true]).is_err());
    }

    #[test]
    fn validate_spec_reports_probability_sum() {
        let mut spec = crate::fixtures::p1();
        spec.profiles[0].prob -= 0.02;
        let report = validate_spec(&spec);
        assert!(!report.passed());
        assert!(
            report.violations.iter().any(|v| v.contains("profile_dist sums to 0.98")),
            "got {:?}",
            report.violations
        );
    }

    #[test]
    fn validate_spec_flags_mu_outside_support() {
        let mut spec = crate::fixtures::p1();
        spec.y_support = [0.0, 1.5];
        let report = validate_spec(&spec);
        assert!(report.violations.iter().any(|v| v.contains("outside y_support")));
    }

    #[test]
    fn canonical_fixtures_validate() {
        for spec in [crate::fixtures::p0(), crate::fixtures::p1(), crate::fixtures::p2()] {
            let report = validate_spec(&spec);
            assert!(report.passed(), "{:?}", report.violations);
        }
    }

    #[test]
    fn spec_json_schema_round_trip() {
        let spec = crate::fixtures::p1();
        let json = spec.to_json().unwrap();
        let back = PopulationSpec::from_json(&json).unwrap();
        assert_eq!(spec, back);
        // field names are part of the wire format
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["m", "p_z", "y_support", "profiles", "mu", "noise_sd"] {
            assert!(value.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(value["profiles"][0]["types"][0], "C");
        assert!(value["mu"]["C"]["d0"].is_array());
    }

    #[test]
    fn unit_measure_sums_to_one() {
        let spec = crate::fixtures::p1();
        let mut total = 0.0;
        spec.for_each_unit(|w, _, _| total += w);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_rejects_ragged_groups() {
        let rows = vec![
            UnitRow { group_id: 0, unit_id: 0, z: true, d: true, y: 1.0 },
            UnitRow { group_id: 0, unit_id: 1, z: false, d: false, y: 0.5 },
            UnitRow { group_id: 1, unit_id: 0, z: true, d: false, y: 0.2 },
        ];
        assert!(Dataset::new(1, rows, None).is_err());
    }
}
