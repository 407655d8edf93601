//! Data-based falsification: the two no-interference deltas, the eight
//! irrelevance sign conditions, the one-sided-noncompliance screen, and
//! recovery of the compliance-type shares identified by the bound
//! denominators.
//!
//! Test statistics are plain normal approximations with group-clustered
//! variance; they are plumbing around the population-level conditions,
//! which this module also evaluates exactly on population moments.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::model::{Cell, Dataset, MomentSet, Quantity};

const C00: Cell = Cell::new(false, false);
const C01: Cell = Cell::new(false, true);
const C10: Cell = Cell::new(true, false);
const C11: Cell = Cell::new(true, true);

/// One tested condition. `stderr` is absent in population mode, where the
/// value is exact and the comparison is against zero directly.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub test: String,
    /// Significance level of the per-condition tests; absent in
    /// population mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub conditions: Vec<ConditionReport>,
    /// Overall verdict: false when any condition rejects.
    pub pass: bool,
}

/// Delta of a cell-mean quantity with a group-clustered standard error.
fn clustered_delta(
    data: &Dataset,
    quantity: Quantity,
    cell_a: Cell,
    cell_b: Cell,
) -> Option<(f64, f64)> {
    let m = data.m;
    let unit_obs = |group: &[crate::model::UnitRow], i: usize| -> Option<(usize, f64)> {
        let r = &group[i];
        let mut peer_z: Option<bool> = None;
        for (j, other) in group.iter().enumerate() {
            if j == i {
                continue;
            }
            match peer_z {
                None => peer_z = Some(other.z),
                Some(v) if v != other.z => return None,
                _ => {}
            }
        }
        let cell = Cell::new(r.z, peer_z?);
        let k = group.iter().enumerate().filter(|&(j, o)| j != i && o.d).count();
        Some((cell.index(), quantity.eval(r.d, k, m, r.y)))
    };
    let (ia, ib) = (cell_a.index(), cell_b.index());
    let mut n = [0u64; 4];
    let mut sum = [0.0f64; 4];
    for g in data.groups() {
        for i in 0..g.len() {
            if let Some((c, x)) = unit_obs(g, i) {
                n[c] += 1;
                sum[c] += x;
            }
        }
    }
    if n[ia] == 0 || n[ib] == 0 {
        return None;
    }
    let mean_a = sum[ia] / n[ia] as f64;
    let mean_b = sum[ib] / n[ib] as f64;
    let mut var = 0.0;
    let mut n_clusters = 0u64;
    for g in data.groups() {
        let mut psi = 0.0;
        let mut touched = false;
        for i in 0..g.len() {
            if let Some((c, x)) = unit_obs(g, i) {
                if c == ia {
                    psi += (x - mean_a) / n[ia] as f64;
                    touched = true;
                } else if c == ib {
                    psi -= (x - mean_b) / n[ib] as f64;
                    touched = true;
                }
            }
        }
        if touched {
            n_clusters += 1;
            var += psi * psi;
        }
    }
    if n_clusters > 1 {
        var *= n_clusters as f64 / (n_clusters - 1) as f64;
    }
    Some((mean_a - mean_b, var.sqrt()))
}

fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - normal.cdf(z.abs()))
}

fn one_sided_p(z: f64) -> f64 {
    // probability of a draw below z; small when z is very negative
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

/// The two deltas that vanish without assignment interference:
/// raising peers' assignments must not move own treatment.
pub fn sutva_test(data: &Dataset, level: f64) -> DiagnosticsReport {
    let quantity = Quantity::OWN_TREATED;
    let specs = [
        ("delta_E[D_i] (0,1)-(0,0)", C01, C00),
        ("delta_E[D_i] (1,1)-(1,0)", C11, C10),
    ];
    let mut conditions = Vec::new();
    for (name, a, b) in specs {
        match clustered_delta(data, quantity, a, b) {
            Some((value, se)) => {
                let z = if se > 0.0 { value / se } else { 0.0 };
                let pass = two_sided_p(z) >= level;
                conditions.push(ConditionReport {
                    condition: name.into(),
                    value,
                    stderr: Some(se),
                    pass,
                });
            }
            None => conditions.push(ConditionReport {
                condition: format!("{name} (empty cell)"),
                value: f64::NAN,
                stderr: None,
                pass: false,
            }),
        }
    }
    let pass = conditions.iter().all(|c| c.pass);
    DiagnosticsReport { test: "sutva".into(), level: Some(level), conditions, pass }
}

/// Exact population version: both deltas must be identically zero.
pub fn sutva_population(moments: &MomentSet) -> Result<DiagnosticsReport> {
    let quantity = Quantity::OWN_TREATED;
    let mut conditions = Vec::new();
    for (name, a, b) in [
        ("delta_E[D_i] (0,1)-(0,0)", C01, C00),
        ("delta_E[D_i] (1,1)-(1,0)", C11, C10),
    ] {
        let value = crate::bounds::delta(moments, quantity, a, b)?;
        conditions.push(ConditionReport {
            condition: name.into(),
            value,
            stderr: None,
            pass: value.abs() <= 1e-12,
        });
    }
    let pass = conditions.iter().all(|c| c.pass);
    Ok(DiagnosticsReport { test: "sutva".into(), level: None, conditions, pass })
}

struct SignCondition {
    name: String,
    quantity: Quantity,
    cell_a: Cell,
    cell_b: Cell,
    /// required sign of the delta: +1 means >= 0
    sign: f64,
}

fn irrelevance_conditions() -> Vec<SignCondition> {
    let mut out = Vec::new();
    for dz in [false, true] {
        let tag = dz as u8;
        // own-assignment flip, peers fixed
        out.push(SignCondition {
            name: format!("delta_E[D_i Dvee] (1,{tag})-(0,{tag}) >= 0"),
            quantity: Quantity::TREATED_NO_PEERS,
            cell_a: Cell::new(true, dz),
            cell_b: Cell::new(false, dz),
            sign: 1.0,
        });
        out.push(SignCondition {
            name: format!("delta_E[(1-D_i) Dwedge] (1,{tag})-(0,{tag}) <= 0"),
            quantity: Quantity::UNTREATED_ALL_PEERS,
            cell_a: Cell::new(true, dz),
            cell_b: Cell::new(false, dz),
            sign: -1.0,
        });
        // peers'-assignment flip, own fixed
        out.push(SignCondition {
            name: format!("delta_E[D_i Dvee] ({tag},1)-({tag},0) <= 0"),
            quantity: Quantity::TREATED_NO_PEERS,
            cell_a: Cell::new(dz, true),
            cell_b: Cell::new(dz, false),
            sign: -1.0,
        });
        out.push(SignCondition {
            name: format!("delta_E[(1-D_i) Dwedge] ({tag},1)-({tag},0) >= 0"),
            quantity: Quantity::UNTREATED_ALL_PEERS,
            cell_a: Cell::new(dz, true),
            cell_b: Cell::new(dz, false),
            sign: 1.0,
        });
    }
    out
}

/// The eight sign conditions implied by the irrelevance assumption; a
/// significant violation of any of them falsifies it.
pub fn irrelevance_test(data: &Dataset, level: f64) -> DiagnosticsReport {
    let mut conditions = Vec::new();
    for c in irrelevance_conditions() {
        match clustered_delta(data, c.quantity, c.cell_a, c.cell_b) {
            Some((value, se)) => {
                // reject only when the delta is significantly on the wrong side
                let z = if se > 0.0 { c.sign * value / se } else { 0.0 };
                let pass = one_sided_p(z) >= level;
                conditions.push(ConditionReport {
                    condition: c.name.clone(),
                    value,
                    stderr: Some(se),
                    pass,
                });
            }
            None => conditions.push(ConditionReport {
                condition: format!("{} (empty cell)", c.name),
                value: f64::NAN,
                stderr: None,
                pass: false,
            }),
        }
    }
    let pass = conditions.iter().all(|c| c.pass);
    DiagnosticsReport { test: "irrelevance".into(), level: Some(level), conditions, pass }
}

/// Exact population version of the eight sign conditions.
pub fn irrelevance_population(moments: &MomentSet) -> Result<DiagnosticsReport> {
    let mut conditions = Vec::new();
    for c in irrelevance_conditions() {
        let value = crate::bounds::delta(moments, c.quantity, c.cell_a, c.cell_b)?;
        conditions.push(ConditionReport {
            condition: c.name.clone(),
            value,
            stderr: None,
            pass: c.sign * value >= -1e-12,
        });
    }
    let pass = conditions.iter().all(|c| c.pass);
    Ok(DiagnosticsReport { test: "irrelevance".into(), level: None, conditions, pass })
}

/// One recovered type share with the moment expression identifying it.
#[derive(Debug, Clone, Serialize)]
pub struct TypeShare {
    pub name: String,
    pub value: f64,
    pub moment: String,
    /// The pair-population reading of the share; event-level for m > 1.
    pub interpretation: String,
}

/// Every type-probability expression recoverable from the moments. Share
/// names match the oracle's enumeration-side keys, so population shares
/// can be compared directly.
pub fn type_shares(moments: &MomentSet) -> Result<Vec<TypeShare>> {
    let d = |quantity, a, b| crate::bounds::delta(moments, quantity, a, b);
    let e = |quantity, c| moments.expectation(quantity, c);
    let pairs = moments.m == 1;
    let mut out = vec![
        TypeShare {
            name: "p_nn".into(),
            value: e(Quantity::NOBODY_TREATED, C11)?,
            moment: "E[Dvee_i(i)|Z=1]".into(),
            interpretation: "never-taker whose peers are all never-takers".into(),
        },
        TypeShare {
            name: "p_aa".into(),
            value: e(Quantity::EVERYBODY_TREATED, C00)?,
            moment: "E[Dwedge_i(i)|Z=0]".into(),
            interpretation: "always-taker whose peers are all always-takers".into(),
        },
        TypeShare {
            name: "p_a_peer_switch".into(),
            value: -d(Quantity::TREATED_NO_PEERS, C01, C00)?,
            moment: "-delta E[D_i Dvee_(i)|Z] (0,1)-(0,0)".into(),
            interpretation: if pairs {
                "always-taker with a complier peer".into()
            } else {
                "always-taker whose peers switch off all-untreated".into()
            },
        },
        TypeShare {
            name: "p_n_peer_switch".into(),
            value: d(Quantity::UNTREATED_ALL_PEERS, C11, C10)?,
            moment: "delta E[(1-D_i) Dwedge_(i)|Z] (1,1)-(1,0)".into(),
            interpretation: if pairs {
                "never-taker with a complier peer".into()
            } else {
                "never-taker whose peers switch onto all-treated".into()
            },
        },
        TypeShare {
            name: "p_a_allpeers_n".into(),
            value: e(Quantity::TREATED_NO_PEERS, C01)?,
            moment: "E[D_i Dvee_(i)|Z_i=0,Z_(i)=1]".into(),
            interpretation: "always-taker whose peers are all never-takers".into(),
        },
        TypeShare {
            name: "p_n_allpeers_a".into(),
            value: e(Quantity::UNTREATED_ALL_PEERS, C10)?,
            moment: "E[(1-D_i) Dwedge_(i)|Z_i=1,Z_(i)=0]".into(),
            interpretation: "never-taker whose peers are all always-takers".into(),
        },
        TypeShare {
            name: "p_sp".into(),
            value: d(Quantity::OWN_TREATED, C01, C00)?,
            moment: "delta E[D_i|Z] (0,1)-(0,0)".into(),
            interpretation: "social or peer complier".into(),
        },
        TypeShare {
            name: "p_pg".into(),
            value: d(Quantity::OWN_TREATED, C11, C10)?,
            moment: "delta E[D_i|Z] (1,1)-(1,0)".into(),
            interpretation: "peer or group complier".into(),
        },
        TypeShare {
            name: "p_asp".into(),
            value: e(Quantity::OWN_TREATED, C01)?,
            moment: "E[D_i|Z_i=0,Z_(i)=1]".into(),
            interpretation: "always-taker, social complier, or peer complier".into(),
        },
        TypeShare {
            name: "exist_tauD0".into(),
            value: -d(Quantity::NOBODY_TREATED, C10, C00)?,
            moment: "-delta E[Dvee_i(i)|Z] (1,0)-(0,0)".into(),
            interpretation: "own-instrument switcher with untreated peers".into(),
        },
        TypeShare {
            name: "exist_tauD1".into(),
            value: d(Quantity::EVERYBODY_TREATED, C11, C01)?,
            moment: "delta E[Dwedge_i(i)|Z] (1,1)-(0,1)".into(),
            interpretation: "own-instrument switcher with treated peers".into(),
        },
        TypeShare {
            name: "exist_tauS0".into(),
            value: -d(Quantity::NOBODY_TREATED, C01, C00)?,
            moment: "-delta E[Dvee_i(i)|Z] (0,1)-(0,0)".into(),
            interpretation: "untreated unit with an induced peer".into(),
        },
    ];
    out.push(if pairs {
        TypeShare {
            name: "exist_tauS1".into(),
            value: d(Quantity::EVERYBODY_TREATED, C11, C10)?,
            moment: "delta E[Dwedge_i(i)|Z] (1,1)-(1,0)".into(),
            interpretation: "treated unit with an induced peer".into(),
        }
    } else {
        TypeShare {
            name: "exist_tauS1".into(),
            value: d(Quantity::OWN_TREATED, C11, C10)? - d(Quantity::TREATED_NO_PEERS, C11, C10)?,
            moment: "delta E[D_i (1-Dvee_(i))|Z] (1,1)-(1,0)".into(),
            interpretation: "treated unit with an induced peer".into(),
        }
    });
    Ok(out)
}
