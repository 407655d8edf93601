//! Finite-sample estimation: CSV ingestion, sample analogues of the
//! conditional moments, plug-in bounds, and a group bootstrap for
//! sampling variability.
//!
//! Moment cells condition on unanimous peer assignments; with more than
//! one peer, rows whose peers have mixed instruments contribute to no
//! cell. Groups are the independent sampling unit, so the bootstrap
//! resamples whole groups.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, BoundMode, BoundOptions};
use crate::error::{Error, Result};
use crate::model::{
    Cell, CellMoments, Dataset, Estimand, IntervalResult, MomentSet, OwnFactor, PeerFactor,
    Quantity, UnitRow,
};

/// Parse the `group_id,unit_id,z,d,y` format produced by the simulator.
/// The peer count is inferred from the (constant) group size.
pub fn ingest_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?;
        let expected = ["group_id", "unit_id", "z", "d", "y"];
        let got: Vec<_> = headers.iter().collect();
        if got != expected {
            return Err(Error::Csv(format!("expected header {expected:?}, got {got:?}")));
        }
    }
    let mut rows: Vec<UnitRow> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        if record.len() != 5 {
            return Err(Error::Csv(format!("line {line}: expected 5 fields, got {}", record.len())));
        }
        let field = |i: usize| record.get(i).unwrap().trim();
        let group_id: u64 = field(0)
            .parse()
            .map_err(|_| Error::Csv(format!("line {line}: bad group_id '{}'", field(0))))?;
        let unit_id: u32 = field(1)
            .parse()
            .map_err(|_| Error::Csv(format!("line {line}: bad unit_id '{}'", field(1))))?;
        let parse_bit = |i: usize, name: &str| -> Result<bool> {
            match field(i) {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Csv(format!("line {line}: {name} must be 0 or 1, got '{other}'"))),
            }
        };
        let z = parse_bit(2, "z")?;
        let d = parse_bit(3, "d")?;
        let y: f64 = field(4)
            .parse()
            .map_err(|_| Error::Csv(format!("line {line}: non-numeric y '{}'", field(4))))?;
        if !y.is_finite() {
            return Err(Error::Csv(format!("line {line}: y is not finite")));
        }
        rows.push(UnitRow { group_id, unit_id, z, d, y });
    }
    if rows.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    // group by id, preserving file order within groups
    let mut by_group: BTreeMap<u64, Vec<UnitRow>> = BTreeMap::new();
    for r in rows {
        by_group.entry(r.group_id).or_default().push(r);
    }
    let sizes: Vec<usize> = by_group.values().map(|g| g.len()).collect();
    let g = sizes[0];
    if let Some(pos) = sizes.iter().position(|&s| s != g) {
        let gid = by_group.keys().nth(pos).unwrap();
        return Err(Error::Csv(format!(
            "inconsistent group size: group {gid} has {} units, expected {g}",
            sizes[pos]
        )));
    }
    if g < 2 {
        return Err(Error::Csv("groups must have at least 2 members".into()));
    }
    let flat: Vec<UnitRow> = by_group.into_values().flatten().collect();
    Dataset::new(g - 1, flat, None)
}

pub fn ingest_csv_path(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    ingest_csv(std::io::BufReader::new(file))
}

/// Per-group sums of the indicator basis by cell; the building block for
/// both sample moments and the bootstrap.
#[derive(Debug, Clone)]
struct GroupPartial {
    count: [u32; 4],
    ind: [[f64; 9]; 4],
    withy: [[f64; 9]; 4],
}

fn group_partial(group: &[UnitRow], m: usize) -> GroupPartial {
    let mut p = GroupPartial { count: [0; 4], ind: [[0.0; 9]; 4], withy: [[0.0; 9]; 4] };
    for (i, r) in group.iter().enumerate() {
        // the cell requires unanimous peer assignments
        let mut peer_z: Option<bool> = None;
        let mut unanimous = true;
        for (j, other) in group.iter().enumerate() {
            if j == i {
                continue;
            }
            match peer_z {
                None => peer_z = Some(other.z),
                Some(v) if v != other.z => {
                    unanimous = false;
                    break;
                }
                _ => {}
            }
        }
        if !unanimous {
            continue;
        }
        let cell = Cell::new(r.z, peer_z.expect("at least one peer"));
        let treated_peers = group
            .iter()
            .enumerate()
            .filter(|&(j, other)| j != i && other.d)
            .count();
        let idx = cell.index();
        p.count[idx] += 1;
        let mut slot = 0;
        for own in [OwnFactor::One, OwnFactor::Treated, OwnFactor::Untreated] {
            for peers in [PeerFactor::One, PeerFactor::NoneTreated, PeerFactor::AllTreated] {
                let q = Quantity::of(own, peers);
                p.ind[idx][slot] += q.eval(r.d, treated_peers, m, r.y);
                p.withy[idx][slot] += q.with_y().eval(r.d, treated_peers, m, r.y);
                slot += 1;
            }
        }
    }
    p
}

fn moments_from_partials<'a, I: Iterator<Item = &'a GroupPartial>>(m: usize, parts: I) -> MomentSet {
    let mut count = [0u64; 4];
    let mut ind = [[0.0f64; 9]; 4];
    let mut withy = [[0.0f64; 9]; 4];
    for p in parts {
        for c in 0..4 {
            count[c] += p.count[c] as u64;
            for s in 0..9 {
                ind[c][s] += p.ind[c][s];
                withy[c][s] += p.withy[c][s];
            }
        }
    }
    let cells = std::array::from_fn(|c| {
        if count[c] == 0 {
            CellMoments::empty()
        } else {
            let n = count[c] as f64;
            CellMoments {
                weight: n,
                count: Some(count[c]),
                indicator: std::array::from_fn(|s| ind[c][s] / n),
                with_y: std::array::from_fn(|s| withy[c][s] / n),
            }
        }
    });
    MomentSet { m, cells }
}

/// Cell means of the full indicator/Y basis, with cell counts recorded
/// for tolerance scaling. Cells without observations are flagged empty;
/// bounds over them report nonexistence downstream.
pub fn sample_moments(data: &Dataset) -> MomentSet {
    let partials: Vec<GroupPartial> = crate::worker_pool().install(|| {
        data.rows
            .par_chunks(data.m + 1)
            .map(|g| group_partial(g, data.m))
            .collect()
    });
    moments_from_partials(data.m, partials.iter())
}

/// The one-sided-noncompliance screen: treated units among the
/// unassigned-with-assigned-peers cell.
#[derive(Debug, Clone, Serialize)]
pub struct OsncScreen {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn osnc_screen(moments: &MomentSet) -> Result<OsncScreen> {
    let c01 = Cell::new(false, true);
    let value =
        moments.expectation(Quantity::of(OwnFactor::Treated, PeerFactor::One), c01)?;
    let count = moments.cell(c01).count.unwrap_or(0).max(1);
    // allow a couple of stray rows before declaring two-sided noncompliance
    let threshold = (2.0 / count as f64).max(1e-9);
    Ok(OsncScreen { value, threshold, pass: value <= threshold })
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedEstimand {
    pub estimand: Estimand,
    pub reason: String,
}

/// Plug-in bounds over a dataset, with the estimands actually applicable
/// to the design: pairs formulas only when m = 1, spillovers in multi
/// mode only after the noncompliance screen passes.
#[derive(Debug, Clone, Serialize)]
pub struct PluginReport {
    pub intervals: Vec<IntervalResult>,
    pub skipped: Vec<SkippedEstimand>,
    pub osnc_screen: Option<OsncScreen>,
    pub n_cells: [u64; 4],
    pub denominator_tolerance: f64,
}

pub fn plugin_bounds(data: &Dataset, opts: &BoundOptions) -> Result<PluginReport> {
    let ms = sample_moments(data);
    plugin_bounds_from_moments(&ms, data, opts)
}

fn plugin_bounds_from_moments(
    ms: &MomentSet,
    data: &Dataset,
    opts: &BoundOptions,
) -> Result<PluginReport> {
    let support = infer_support(data);
    plugin_from_parts(ms, support, opts)
}

fn plugin_from_parts(
    ms: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<PluginReport> {
    if opts.mode == BoundMode::Pairs && ms.m != 1 {
        return Err(Error::Input(format!(
            "pairs mode requires one peer per unit, data has m = {}",
            ms.m
        )));
    }
    let n_cells = std::array::from_fn(|c| ms.cells[c].count.unwrap_or(0));
    let mut intervals = Vec::new();
    let mut skipped = Vec::new();
    let mut screen = None;
    for estimand in [Estimand::Direct0, Estimand::Direct1] {
        match run_bound(ms, support, opts, estimand) {
            Ok(iv) => intervals.push(iv),
            Err(Error::EmptyCell { z_own, z_peers }) => skipped.push(SkippedEstimand {
                estimand,
                reason: format!("empty cell (Z_i={z_own}, Z_(i)={z_peers})"),
            }),
            Err(e) => return Err(e),
        }
    }
    let mut spill_reason: Option<String> = None;
    if opts.mode == BoundMode::Multi {
        if !opts.osnc {
            spill_reason = Some(
                "spillover bounds with m > 1 require the one-sided-noncompliance flag".into(),
            );
        } else {
            match osnc_screen(ms) {
                Ok(s) => {
                    if !s.pass {
                        spill_reason = Some(format!(
                            "one-sided noncompliance rejected by the data: \
                             E[D|Z_i=0,Z_(i)=1] = {} > {}",
                            s.value, s.threshold
                        ));
                    }
                    screen = Some(s);
                }
                Err(Error::EmptyCell { z_own, z_peers }) => {
                    spill_reason =
                        Some(format!("empty cell (Z_i={z_own}, Z_(i)={z_peers}) for the screen"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    for estimand in [Estimand::Spill0, Estimand::Spill1] {
        if let Some(reason) = &spill_reason {
            skipped.push(SkippedEstimand { estimand, reason: reason.clone() });
            continue;
        }
        match run_bound(ms, support, opts, estimand) {
            Ok(iv) => intervals.push(iv),
            Err(Error::EmptyCell { z_own, z_peers }) => skipped.push(SkippedEstimand {
                estimand,
                reason: format!("empty cell (Z_i={z_own}, Z_(i)={z_peers})"),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(PluginReport {
        intervals,
        skipped,
        osnc_screen: screen,
        n_cells,
        denominator_tolerance: opts.denominator_tolerance,
    })
}

fn run_bound(
    ms: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
    estimand: Estimand,
) -> Result<IntervalResult> {
    match estimand {
        Estimand::Direct0 => bounds::bound_direct_0(ms, support, opts),
        Estimand::Direct1 => bounds::bound_direct_1(ms, support, opts),
        Estimand::Spill0 => bounds::bound_spill_0(ms, support, opts),
        Estimand::Spill1 => bounds::bound_spill_1(ms, support, opts),
        Estimand::Late => Err(Error::Input("no interval for the IV estimand".into())),
    }
}

/// Without a declared support, the observed outcome range stands in for
/// it; the support only enters through the fallback anchors.
pub fn infer_support(data: &Dataset) -> [f64; 2] {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &data.rows {
        lo = lo.min(r.y);
        hi = hi.max(r.y);
    }
    [lo, hi]
}

/// Percentile bands for each interval endpoint under group resampling.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapBand {
    pub lower_ci: Option<[f64; 2]>,
    pub upper_ci: Option<[f64; 2]>,
    /// Fraction of replicates where the estimand did not exist or an
    /// endpoint was refused.
    pub fail_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapReport {
    pub n_reps: u32,
    pub seed: u64,
    pub bands: BTreeMap<String, BootstrapBand>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Resample groups with replacement `n_reps` times and report 2.5/97.5
/// percentile bands of each endpoint. Deterministic given the seed.
pub fn bootstrap(
    data: &Dataset,
    opts: &BoundOptions,
    n_reps: u32,
    seed: u64,
) -> Result<BootstrapReport> {
    if n_reps < 2 {
        return Err(Error::Input("bootstrap needs at least 2 replicates".into()));
    }
    let support = infer_support(data);
    let partials: Vec<GroupPartial> = data
        .rows
        .chunks(data.m + 1)
        .map(|g| group_partial(g, data.m))
        .collect();
    let n_groups = partials.len();
    let reports: Vec<Result<PluginReport>> = crate::worker_pool().install(|| {
        (0..n_reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (rep as u64).wrapping_mul(0x9E3779B97F4A7C15));
                let mut count = [0u64; 4];
                let mut ind = [[0.0f64; 9]; 4];
                let mut withy = [[0.0f64; 9]; 4];
                for _ in 0..n_groups {
                    let p = &partials[rng.gen_range(0..n_groups)];
                    for c in 0..4 {
                        count[c] += p.count[c] as u64;
                        for s in 0..9 {
                            ind[c][s] += p.ind[c][s];
                            withy[c][s] += p.withy[c][s];
                        }
                    }
                }
                let cells = std::array::from_fn(|c| {
                    if count[c] == 0 {
                        CellMoments::empty()
                    } else {
                        let n = count[c] as f64;
                        CellMoments {
                            weight: n,
                            count: Some(count[c]),
                            indicator: std::array::from_fn(|s| ind[c][s] / n),
                            with_y: std::array::from_fn(|s| withy[c][s] / n),
                        }
                    }
                });
                plugin_from_parts(&MomentSet { m: data.m, cells }, support, opts)
            })
            .collect()
    });
    let mut lowers: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut uppers: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut fails: BTreeMap<String, u32> = BTreeMap::new();
    let mut seen: BTreeMap<String, u32> = BTreeMap::new();
    for report in reports {
        let report = report?;
        for iv in &report.intervals {
            let key = iv.estimand.id().to_string();
            *seen.entry(key.clone()).or_default() += 1;
            match (iv.exists, iv.lower, iv.upper) {
                (true, Some(l), Some(u)) => {
                    lowers.entry(key.clone()).or_default().push(l);
                    uppers.entry(key).or_default().push(u);
                }
                _ => *fails.entry(key).or_default() += 1,
            }
        }
        for s in &report.skipped {
            let key = s.estimand.id().to_string();
            *seen.entry(key.clone()).or_default() += 1;
            *fails.entry(key).or_default() += 1;
        }
    }
    let mut bands = BTreeMap::new();
    for (key, total) in seen {
        let fail = *fails.get(&key).unwrap_or(&0);
        let band = |v: Option<&Vec<f64>>| {
            v.filter(|v| !v.is_empty()).map(|v| {
                let mut s = v.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                [percentile(&s, 0.025), percentile(&s, 0.975)]
            })
        };
        bands.insert(
            key.clone(),
            BootstrapBand {
                lower_ci: band(lowers.get(&key)),
                upper_ci: band(uppers.get(&key)),
                fail_rate: fail as f64 / total as f64,
            },
        );
    }
    Ok(BootstrapReport { n_reps, seed, bands })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::simulate::{draw_dataset, to_csv_string, SimulationConfig};

    #[test]
    fn csv_round_trip() {
        let config = SimulationConfig::new(fixtures::p1(), 200, 7).unwrap();
        let ds = draw_dataset(&config).unwrap();
        let csv = to_csv_string(&ds).unwrap();
        let back = ingest_csv(csv.as_bytes()).unwrap();
        assert_eq!(back.m, ds.m);
        assert_eq!(back.rows.len(), ds.rows.len());
        for (a, b) in ds.rows.iter().zip(&back.rows) {
            assert_eq!(a.group_id, b.group_id);
            assert_eq!((a.z, a.d), (b.z, b.d));
            assert!((a.y - b.y).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_groups_are_rejected_with_group_id() {
        let csv = "group_id,unit_id,z,d,y\n0,0,1,1,1.0\n0,1,0,0,0.5\n0,2,0,0,0.5\n1,0,1,1,1.0\n1,1,0,0,0.2\n";
        let err = ingest_csv(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("inconsistent group size"), "{err}");
    }

    #[test]
    fn non_binary_z_names_the_line() {
        let csv = "group_id,unit_id,z,d,y\n0,0,1,1,1.0\n0,1,2,0,0.5\n";
        let err = ingest_csv(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("z must be 0 or 1"), "{err}");
    }

    #[test]
    fn weighted_enumeration_reproduces_population_moments() {
        // replicate each profile in proportion to its probability under
        // every unanimous-or-split assignment pattern; the sample moments
        // must then agree with the exact population moments cell by cell
        let spec = fixtures::p1();
        let scale = 20.0;
        let mut rows = Vec::new();
        let mut gid = 0u64;
        for pattern in [[false, false], [true, true], [true, false], [false, true]] {
            for wp in &spec.profiles {
                let copies = (wp.prob * scale).round() as usize;
                for _ in 0..copies {
                    let z = pattern.to_vec();
                    let d = crate::model::group_treatments(&wp.types, &z).unwrap();
                    for i in 0..2 {
                        let k = if d[1 - i] { 1 } else { 0 };
                        let y = spec.mu.mu(wp.types.types()[i], d[i], k).unwrap();
                        rows.push(UnitRow {
                            group_id: gid,
                            unit_id: i as u32,
                            z: z[i],
                            d: d[i],
                            y,
                        });
                    }
                    gid += 1;
                }
            }
        }
        let data = Dataset::new(1, rows, None).unwrap();
        let sample = sample_moments(&data);
        let exact = crate::oracle::population_moments(&spec).unwrap();
        for c in Cell::ALL {
            for own in [OwnFactor::One, OwnFactor::Treated, OwnFactor::Untreated] {
                for peers in [PeerFactor::One, PeerFactor::NoneTreated, PeerFactor::AllTreated] {
                    for with_y in [false, true] {
                        let mut q = Quantity::of(own, peers);
                        if with_y {
                            q = q.with_y();
                        }
                        let a = sample.expectation(q, c).unwrap();
                        let b = exact.expectation(q, c).unwrap();
                        assert!(
                            (a - b).abs() < 1e-12,
                            "{} at {c}: sample {a} vs exact {b}",
                            q.label()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_peer_rows_fall_in_no_cell() {
        // m = 2, peers with split instruments: only the unanimous units count
        let rows = vec![
            UnitRow { group_id: 0, unit_id: 0, z: true, d: true, y: 1.0 },
            UnitRow { group_id: 0, unit_id: 1, z: true, d: true, y: 1.0 },
            UnitRow { group_id: 0, unit_id: 2, z: false, d: false, y: 0.5 },
        ];
        let data = Dataset::new(2, rows, None).unwrap();
        let ms = sample_moments(&data);
        // unit 0 sees peers (1, 0): mixed; unit 1 likewise; unit 2 sees (1, 1)
        let total: u64 = (0..4).map(|c| ms.cells[c].count.unwrap()).sum();
        assert_eq!(total, 1);
        assert_eq!(ms.cell(Cell::new(false, true)).count, Some(1));
    }

    #[test]
    fn all_assigned_dataset_flags_three_empty_cells() {
        let rows: Vec<UnitRow> = (0..4)
            .map(|g| {
                (0..2).map(move |i| UnitRow {
                    group_id: g,
                    unit_id: i,
                    z: true,
                    d: true,
                    y: 1.0,
                })
            })
            .flatten()
            .collect();
        let data = Dataset::new(1, rows, None).unwrap();
        let ms = sample_moments(&data);
        let empty = (0..4).filter(|&c| !ms.cells[c].is_populated()).count();
        assert_eq!(empty, 3);
        let opts = BoundOptions::sample(BoundMode::Pairs, false, 0);
        let report = plugin_from_parts(&ms, [0.0, 2.0], &opts).unwrap();
        assert!(report.intervals.is_empty());
        assert_eq!(report.skipped.len(), 4);
    }

    #[test]
    fn sample_moments_match_population_within_three_se() {
        let spec = fixtures::p1();
        let config = SimulationConfig::new(spec.clone(), 200_000, 7).unwrap();
        let data = draw_dataset(&config).unwrap();
        let ms = sample_moments(&data);
        let exact = crate::oracle::population_moments(&spec).unwrap();
        let y_scale = spec.y_support[1] - spec.y_support[0];
        for c in Cell::ALL {
            let n = ms.cell(c).count.unwrap() as f64;
            for own in [OwnFactor::One, OwnFactor::Treated, OwnFactor::Untreated] {
                for peers in [PeerFactor::One, PeerFactor::NoneTreated, PeerFactor::AllTreated] {
                    for with_y in [false, true] {
                        let mut q = Quantity::of(own, peers);
                        if with_y {
                            q = q.with_y();
                        }
                        let got = ms.expectation(q, c).unwrap();
                        let want = exact.expectation(q, c).unwrap();
                        // crude but valid bound on the moment's standard
                        // deviation: indicators by 1/2, Y-weighted terms
                        // by the support diameter
                        let sd = if with_y { y_scale } else { 0.5 };
                        let se = sd / n.sqrt();
                        assert!(
                            (got - want).abs() <= 3.0 * se,
                            "{} at {c}: {got} vs {want} (3se = {})",
                            q.label(),
                            3.0 * se
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn p2_spillover_point_estimate_within_bootstrap_error_of_truth() {
        let spec = fixtures::p2();
        let truth = crate::oracle::true_estimands(&spec).unwrap().tau_s0.value.unwrap();
        let config = SimulationConfig::new(spec, 20_000, 31).unwrap();
        let data = draw_dataset(&config).unwrap();
        let ms = sample_moments(&data);
        let opts = BoundOptions::sample(BoundMode::Multi, true, ms.min_cell_count().unwrap());
        let report = plugin_bounds(&data, &opts).unwrap();
        let s0 = report
            .intervals
            .iter()
            .find(|iv| iv.estimand == Estimand::Spill0)
            .unwrap();
        assert!(s0.point_identified);
        let bands = bootstrap(&data, &opts, 200, 13).unwrap();
        let [lo, hi] = bands.bands["tauS0"].lower_ci.unwrap();
        let se = (hi - lo) / 3.92;
        assert!(
            (s0.lower.unwrap() - truth).abs() <= 3.0 * se,
            "estimate {} vs truth {truth}, bootstrap se {se}",
            s0.lower.unwrap()
        );
    }

    #[test]
    fn plugin_close_to_population_on_p1() {
        let spec = fixtures::p1();
        let config = SimulationConfig::new(spec.clone(), 200_000, 7).unwrap();
        let data = draw_dataset(&config).unwrap();
        let ms = sample_moments(&data);
        let opts = BoundOptions::sample(BoundMode::Pairs, false, ms.min_cell_count().unwrap());
        let report = plugin_bounds(&data, &opts).unwrap();
        let exact_ms = crate::oracle::population_moments(&spec).unwrap();
        let popts = BoundOptions::population(BoundMode::Pairs, false);
        let pop = bounds::all_bounds(&exact_ms, spec.y_support, &popts).unwrap();
        for (got, want) in report.intervals.iter().zip(&pop) {
            assert_eq!(got.estimand, want.estimand);
            assert!(got.exists && want.exists);
            let dl = (got.lower.unwrap() - want.lower.unwrap()).abs();
            let du = (got.upper.unwrap() - want.upper.unwrap()).abs();
            assert!(dl < 0.02 && du < 0.02, "{}: dl={dl}, du={du}", got.estimand);
        }
    }

    #[test]
    fn multi_spillovers_require_flag_and_screen() {
        let config = SimulationConfig::new(fixtures::p2(), 5_000, 21).unwrap();
        let data = draw_dataset(&config).unwrap();
        let no_flag = BoundOptions::sample(BoundMode::Multi, false, 1_000);
        let report = plugin_bounds(&data, &no_flag).unwrap();
        assert_eq!(report.intervals.len(), 2);
        assert!(report
            .skipped
            .iter()
            .all(|s| s.reason.contains("one-sided-noncompliance flag")));

        let flagged = BoundOptions::sample(BoundMode::Multi, true, 1_000);
        let report = plugin_bounds(&data, &flagged).unwrap();
        assert_eq!(report.intervals.len(), 4);
        assert!(report.osnc_screen.unwrap().pass);
    }

    #[test]
    fn osnc_screen_rejects_two_sided_data() {
        // p1 has always-takers, so treated-unassigned units appear
        let mut spec = fixtures::p1();
        spec.profiles.swap(0, 1); // irrelevant reorder, keeps the spec valid
        let config = SimulationConfig::new(spec, 5_000, 3).unwrap();
        let data = draw_dataset(&config).unwrap();
        let ms = sample_moments(&data);
        assert!(!osnc_screen(&ms).unwrap().pass);
    }

    #[test]
    fn bootstrap_is_deterministic_and_brackets_population() {
        let config = SimulationConfig::new(fixtures::p1(), 20_000, 7).unwrap();
        let data = draw_dataset(&config).unwrap();
        let ms = sample_moments(&data);
        let opts = BoundOptions::sample(BoundMode::Pairs, false, ms.min_cell_count().unwrap());
        let a = bootstrap(&data, &opts, 200, 5).unwrap();
        let b = bootstrap(&data, &opts, 200, 5).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // percentile bands should cover the wide-interval population endpoints
        let spec = fixtures::p1();
        let exact = crate::oracle::population_moments(&spec).unwrap();
        let popts = BoundOptions::population(BoundMode::Pairs, false);
        let d1 = bounds::bound_direct_1(&exact, spec.y_support, &popts).unwrap();
        let band = &a.bands["tauD1"];
        let [lo, hi] = band.lower_ci.unwrap();
        assert!(lo <= d1.lower.unwrap() && d1.lower.unwrap() <= hi, "{band:?}");
        assert!((band.fail_rate - 0.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_two_reps_is_degenerate_but_defined() {
        let config = SimulationConfig::new(fixtures::p1(), 500, 7).unwrap();
        let data = draw_dataset(&config).unwrap();
        let opts = BoundOptions::sample(BoundMode::Pairs, false, 200);
        let report = bootstrap(&data, &opts, 2, 1).unwrap();
        assert!(report.bands["tauD0"].lower_ci.is_some());
        assert!(bootstrap(&data, &opts, 1, 1).is_err());
    }
}
