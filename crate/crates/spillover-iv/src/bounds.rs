//! The bound expressions: maps a [`MomentSet`] (population or sample) plus
//! the outcome support to interval results for the four estimands, with
//! existence flags, point-identification detection, and the support or
//! alternative-pair fallbacks for absent compliance types.
//!
//! Every bound is a combination of the first term `ratio(Y-moment delta,
//! denominator delta)` and a correction `anchor_ratio * multiplier`, where
//! the multiplier is a ratio of first-stage deltas in [0, 1]. The anchor
//! ratio is the conditional outcome mean of an always-taker or never-taker
//! stratum; when that stratum is absent the anchor falls back to the
//! outcome support (always valid) or to an alternative type-pair moment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::assumptions::BoundMode;
use crate::model::{
    Cell, Estimand, Fallback, IntervalResult, MomentSet, Quantity,
};

const C00: Cell = Cell::new(false, false);
const C01: Cell = Cell::new(false, true);
const C10: Cell = Cell::new(true, false);
const C11: Cell = Cell::new(true, true);

/// What to do when a secondary denominator vanishes: refuse the endpoint,
/// substitute the outcome support, or try the alternative type-pair moment
/// first and then the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    Refuse,
    SupportBounds,
    AltPairsThenSupport,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    pub mode: BoundMode,
    /// One-sided noncompliance holds; required for spillover bounds in
    /// multi mode.
    pub osnc: bool,
    /// Denominators at or below this magnitude count as structurally zero.
    pub denominator_tolerance: f64,
    pub fallback_policy: FallbackPolicy,
}

impl BoundOptions {
    /// Defaults for exact population moments.
    pub fn population(mode: BoundMode, osnc: bool) -> Self {
        BoundOptions {
            mode,
            osnc,
            denominator_tolerance: 1e-9,
            fallback_policy: FallbackPolicy::SupportBounds,
        }
    }

    /// Defaults for sample moments: the tolerance scales with the smallest
    /// cell so that structural zeros are separated from sampling noise.
    pub fn sample(mode: BoundMode, osnc: bool, min_cell_count: u64) -> Self {
        let scaled = if min_cell_count > 0 { 1.0 / min_cell_count as f64 } else { 1.0 };
        BoundOptions {
            mode,
            osnc,
            denominator_tolerance: scaled.max(1e-9),
            fallback_policy: FallbackPolicy::SupportBounds,
        }
    }
}

/// E[quantity | cell_a] - E[quantity | cell_b].
pub fn delta(moments: &MomentSet, quantity: Quantity, cell_a: Cell, cell_b: Cell) -> Result<f64> {
    Ok(moments.expectation(quantity, cell_a)? - moments.expectation(quantity, cell_b)?)
}

/// The anchor ratio E[Y q|cell]/E[q|cell] or its delta analogue, with the
/// fallback cascade. Returns the value and the fallback that produced it,
/// or `None` when the policy refuses.
struct Anchor {
    /// numerator and denominator of the primary ratio
    num: f64,
    den: f64,
    /// support value when the denominator is degenerate
    support_value: f64,
    support_fallback: Fallback,
    /// alternative type-pair ratio, when the appendix offers one
    alt: Option<(f64, f64, Fallback)>,
}

fn resolve_anchor(a: Anchor, opts: &BoundOptions) -> Option<(f64, Fallback)> {
    if a.den.abs() > opts.denominator_tolerance {
        return Some((a.num / a.den, Fallback::None));
    }
    match opts.fallback_policy {
        FallbackPolicy::Refuse => None,
        FallbackPolicy::SupportBounds => Some((a.support_value, a.support_fallback)),
        FallbackPolicy::AltPairsThenSupport => {
            if let Some((num, den, tag)) = a.alt {
                if den.abs() > opts.denominator_tolerance {
                    return Some((num / den, tag));
                }
            }
            Some((a.support_value, a.support_fallback))
        }
    }
}

struct BoundPieces {
    estimand: Estimand,
    /// signed reduced-form delta; the first term is `first_delta / primary`
    first_delta: f64,
    /// signed primary (existence) denominator
    primary: f64,
    /// signed numerator of the multiplier, chosen so that
    /// `point_delta / primary` is the population probability ratio in
    /// [0, 1]; magnitude ~0 means point identification
    point_delta: f64,
    /// +1 when a larger anchor raises an endpoint, -1 when it lowers it
    anchor_sign: f64,
    lower_anchor: Anchor,
    upper_anchor: Anchor,
    denominators: BTreeMap<String, f64>,
}

/// Assemble an interval: endpoints are
/// `first + anchor_sign * anchor * multiplier`.
fn assemble(p: BoundPieces, opts: &BoundOptions) -> IntervalResult {
    let mut denominators = p.denominators;
    denominators.insert("primary".into(), p.primary);
    denominators.insert("point_delta".into(), p.point_delta);
    if p.primary.abs() <= opts.denominator_tolerance {
        return IntervalResult::nonexistent(p.estimand, denominators);
    }
    let first = p.first_delta / p.primary;
    let raw_multiplier = p.point_delta / p.primary;
    denominators.insert("multiplier".into(), raw_multiplier);
    // the multiplier estimates a probability ratio in [0, 1]; negative
    // sample estimates are statistically zero
    let multiplier = raw_multiplier.clamp(0.0, 1.0);
    let point_identified =
        p.point_delta.abs() <= opts.denominator_tolerance || multiplier == 0.0;
    if point_identified {
        return IntervalResult {
            estimand: p.estimand,
            lower: Some(first),
            upper: Some(first),
            exists: true,
            point_identified: true,
            fallbacks_used: vec![],
            denominators,
        };
    }
    let mut fallbacks_used = Vec::new();
    let lower = resolve_anchor(p.lower_anchor, opts).map(|(anchor, tag)| {
        fallbacks_used.push(tag);
        first + p.anchor_sign * anchor * multiplier
    });
    let upper = resolve_anchor(p.upper_anchor, opts).map(|(anchor, tag)| {
        fallbacks_used.push(tag);
        first + p.anchor_sign * anchor * multiplier
    });
    IntervalResult {
        estimand: p.estimand,
        lower,
        upper,
        exists: true,
        point_identified: false,
        fallbacks_used,
        denominators,
    }
}

/// Direct effect with untreated peers. Cells (1,0) against (0,0).
pub fn bound_direct_0(
    moments: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<IntervalResult> {
    let primary = delta(moments, Quantity::NOBODY_TREATED, C10, C00)?;
    // L = -A/B + r_nn (C/B), U = -A/B + r_ac (C/B); both C and B are
    // nonpositive first stages, so the first term is (-A)/B and the
    // multiplier C/B is a probability ratio
    let first_delta = -delta(moments, Quantity::NO_PEER_TREATED.with_y(), C10, C00)?;
    let point_delta = delta(moments, Quantity::NO_PEER_TREATED, C10, C00)?;
    // lower anchor: outcome level of the nobody-treated stratum
    let nn_den = moments.expectation(Quantity::NOBODY_TREATED, C11)?;
    let nn_num = moments.expectation(Quantity::NOBODY_TREATED.with_y(), C11)?;
    // upper anchor: treated-while-unassigned stratum, alternative pair is
    // an always-taker with all-never-taker peers
    let ac_den = delta(moments, Quantity::TREATED_NO_PEERS, C01, C00)?;
    let ac_num = delta(moments, Quantity::TREATED_NO_PEERS.with_y(), C01, C00)?;
    let an_den = moments.expectation(Quantity::TREATED_NO_PEERS, C01)?;
    let an_num = moments.expectation(Quantity::TREATED_NO_PEERS.with_y(), C01)?;
    let mut denominators = BTreeMap::new();
    denominators.insert("nobody_treated_z1".into(), nn_den);
    denominators.insert("treated_unassigned_delta".into(), ac_den);
    denominators.insert("alt_pair".into(), an_den);
    Ok(assemble(
        BoundPieces {
            estimand: Estimand::Direct0,
            first_delta,
            primary,
            point_delta,
            anchor_sign: 1.0,
            lower_anchor: Anchor {
                num: nn_num,
                den: nn_den,
                support_value: support[0],
                support_fallback: Fallback::YMin,
                alt: None,
            },
            upper_anchor: Anchor {
                num: ac_num,
                den: ac_den,
                support_value: support[1],
                support_fallback: Fallback::YMax,
                alt: Some((an_num, an_den, Fallback::AltAnPair)),
            },
            denominators,
        },
        opts,
    ))
}

/// Direct effect with treated peers. Cells (1,1) against (0,1).
pub fn bound_direct_1(
    moments: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<IntervalResult> {
    let primary = delta(moments, Quantity::EVERYBODY_TREATED, C11, C01)?;
    // L = A/B - r_aa (C/B), U = A/B - r_nc (C/B)
    let first_delta = delta(moments, Quantity::ALL_PEERS_TREATED.with_y(), C11, C01)?;
    let point_delta = delta(moments, Quantity::ALL_PEERS_TREATED, C11, C01)?;
    let aa_den = moments.expectation(Quantity::EVERYBODY_TREATED, C00)?;
    let aa_num = moments.expectation(Quantity::EVERYBODY_TREATED.with_y(), C00)?;
    let nc_den = delta(moments, Quantity::UNTREATED_ALL_PEERS, C11, C10)?;
    let nc_num = delta(moments, Quantity::UNTREATED_ALL_PEERS.with_y(), C11, C10)?;
    let na_den = moments.expectation(Quantity::UNTREATED_ALL_PEERS, C10)?;
    let na_num = moments.expectation(Quantity::UNTREATED_ALL_PEERS.with_y(), C10)?;
    let mut denominators = BTreeMap::new();
    denominators.insert("everybody_treated_z0".into(), aa_den);
    denominators.insert("untreated_assigned_delta".into(), nc_den);
    denominators.insert("alt_pair".into(), na_den);
    Ok(assemble(
        BoundPieces {
            estimand: Estimand::Direct1,
            first_delta,
            primary,
            point_delta,
            anchor_sign: -1.0,
            lower_anchor: Anchor {
                num: aa_num,
                den: aa_den,
                support_value: support[1],
                support_fallback: Fallback::YMax,
                alt: None,
            },
            upper_anchor: Anchor {
                num: nc_num,
                den: nc_den,
                support_value: support[0],
                support_fallback: Fallback::YMin,
                alt: Some((na_num, na_den, Fallback::AltNaPair)),
            },
            denominators,
        },
        opts,
    ))
}

/// Spillover onto untreated units. Pairs mode gives an interval; multi
/// mode point-identifies under one-sided noncompliance.
pub fn bound_spill_0(
    moments: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<IntervalResult> {
    check_spill_mode(moments, opts, Estimand::Spill0)?;
    // L = -A/B - r_nc (C/B), U = -A/B - r_aa (C/B); B is a nonpositive
    // first stage and C = delta E[D_i] is nonnegative, so the multiplier
    // passed down is -C/B >= 0 and the anchors enter with positive sign
    let primary = delta(moments, Quantity::NOBODY_TREATED, C01, C00)?;
    let first_delta = -delta(moments, Quantity::OWN_UNTREATED.with_y(), C01, C00)?;
    let mut denominators = BTreeMap::new();
    if opts.mode == BoundMode::Multi {
        denominators.insert("primary".into(), primary);
        if primary.abs() <= opts.denominator_tolerance {
            return Ok(IntervalResult::nonexistent(Estimand::Spill0, denominators));
        }
        // point identification: every induced peer is observable
        let value = first_delta / primary;
        denominators.insert("point_delta".into(), 0.0);
        return Ok(IntervalResult {
            estimand: Estimand::Spill0,
            lower: Some(value),
            upper: Some(value),
            exists: true,
            point_identified: true,
            fallbacks_used: vec![],
            denominators,
        });
    }
    let point_delta = -delta(moments, Quantity::OWN_TREATED, C01, C00)?;
    let nc_den = delta(moments, Quantity::UNTREATED_ALL_PEERS, C11, C10)?;
    let nc_num = delta(moments, Quantity::UNTREATED_ALL_PEERS.with_y(), C11, C10)?;
    let na_den = moments.expectation(Quantity::UNTREATED_ALL_PEERS, C10)?;
    let na_num = moments.expectation(Quantity::UNTREATED_ALL_PEERS.with_y(), C10)?;
    let aa_den = moments.expectation(Quantity::EVERYBODY_TREATED, C00)?;
    let aa_num = moments.expectation(Quantity::EVERYBODY_TREATED.with_y(), C00)?;
    denominators.insert("untreated_assigned_delta".into(), nc_den);
    denominators.insert("everybody_treated_z0".into(), aa_den);
    denominators.insert("alt_pair".into(), na_den);
    Ok(assemble(
        BoundPieces {
            estimand: Estimand::Spill0,
            first_delta,
            primary,
            point_delta,
            anchor_sign: 1.0,
            lower_anchor: Anchor {
                num: nc_num,
                den: nc_den,
                support_value: support[0],
                support_fallback: Fallback::YMin,
                alt: Some((na_num, na_den, Fallback::AltNaPair)),
            },
            upper_anchor: Anchor {
                num: aa_num,
                den: aa_den,
                support_value: support[1],
                support_fallback: Fallback::YMax,
                alt: None,
            },
            denominators,
        },
        opts,
    ))
}

/// Spillover onto treated units. Cells (1,1) against (1,0).
pub fn bound_spill_1(
    moments: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<IntervalResult> {
    check_spill_mode(moments, opts, Estimand::Spill1)?;
    // L = A/B - r_ac (C/B), U = A/B - r_nn (C/B); here B and C are
    // nonnegative first stages
    let first_delta = delta(moments, Quantity::OWN_TREATED.with_y(), C11, C10)?;
    let point_delta = delta(moments, Quantity::OWN_TREATED, C11, C10)?;
    let nn_den = moments.expectation(Quantity::NOBODY_TREATED, C11)?;
    let nn_num = moments.expectation(Quantity::NOBODY_TREATED.with_y(), C11)?;
    let mut denominators = BTreeMap::new();
    denominators.insert("nobody_treated_z1".into(), nn_den);
    match opts.mode {
        BoundMode::Pairs => {
            let primary = delta(moments, Quantity::EVERYBODY_TREATED, C11, C10)?;
            let ac_den = delta(moments, Quantity::TREATED_NO_PEERS, C01, C00)?;
            let ac_num = delta(moments, Quantity::TREATED_NO_PEERS.with_y(), C01, C00)?;
            let an_den = moments.expectation(Quantity::TREATED_NO_PEERS, C01)?;
            let an_num = moments.expectation(Quantity::TREATED_NO_PEERS.with_y(), C01)?;
            denominators.insert("treated_unassigned_delta".into(), ac_den);
            denominators.insert("alt_pair".into(), an_den);
            Ok(assemble(
                BoundPieces {
                    estimand: Estimand::Spill1,
                    first_delta,
                    primary,
                    point_delta,
                    anchor_sign: -1.0,
                    lower_anchor: Anchor {
                        num: ac_num,
                        den: ac_den,
                        support_value: support[1],
                        support_fallback: Fallback::YMax,
                        alt: Some((an_num, an_den, Fallback::AltAnPair)),
                    },
                    upper_anchor: Anchor {
                        num: nn_num,
                        den: nn_den,
                        support_value: support[0],
                        support_fallback: Fallback::YMin,
                        alt: None,
                    },
                    denominators,
                },
                opts,
            ))
        }
        BoundMode::Multi => {
            // denominator counts own-treated units with at least one
            // treated peer: E[D_i (1 - no-peer-treated)]
            let primary = delta(moments, Quantity::OWN_TREATED, C11, C10)?
                - delta(moments, Quantity::TREATED_NO_PEERS, C11, C10)?;
            let cg_den = delta(moments, Quantity::TREATED_NO_PEERS, C11, C10)?;
            let cg_num = delta(moments, Quantity::TREATED_NO_PEERS.with_y(), C11, C10)?;
            denominators.insert("treated_no_peers_delta".into(), cg_den);
            Ok(assemble(
                BoundPieces {
                    estimand: Estimand::Spill1,
                    first_delta,
                    primary,
                    point_delta,
                    anchor_sign: -1.0,
                    lower_anchor: Anchor {
                        num: cg_num,
                        den: cg_den,
                        support_value: support[1],
                        support_fallback: Fallback::YMax,
                        alt: None,
                    },
                    upper_anchor: Anchor {
                        num: nn_num,
                        den: nn_den,
                        support_value: support[0],
                        support_fallback: Fallback::YMin,
                        alt: None,
                    },
                    denominators,
                },
                opts,
            ))
        }
    }
}

fn check_spill_mode(moments: &MomentSet, opts: &BoundOptions, estimand: Estimand) -> Result<()> {
    match opts.mode {
        BoundMode::Pairs => {
            if moments.m != 1 {
                return Err(Error::Input(format!(
                    "pairs-mode {estimand} bound applies only to m = 1, got m = {}",
                    moments.m
                )));
            }
            Ok(())
        }
        BoundMode::Multi => {
            if !opts.osnc {
                return Err(Error::OsncRequired(format!(
                    "{estimand} with m = {} has no bound under two-sided noncompliance",
                    moments.m
                )));
            }
            Ok(())
        }
    }
}

/// All applicable bounds for this moment set: both direct effects, plus
/// the spillovers whenever the mode and noncompliance flags admit them.
pub fn all_bounds(
    moments: &MomentSet,
    support: [f64; 2],
    opts: &BoundOptions,
) -> Result<Vec<IntervalResult>> {
    let mut out = vec![
        bound_direct_0(moments, support, opts)?,
        bound_direct_1(moments, support, opts)?,
    ];
    let spill_ok = opts.mode == BoundMode::Pairs || opts.osnc;
    if spill_ok {
        out.push(bound_spill_0(moments, support, opts)?);
        out.push(bound_spill_1(moments, support, opts)?);
    }
    Ok(out)
}

/// The interference-blind IV estimand, pooling the cells by own
/// assignment with their weights.
pub fn iv_estimand(moments: &MomentSet) -> Result<f64> {
    let pool = |z_own: bool, quantity: Quantity| -> Result<f64> {
        let cells = [Cell::new(z_own, false), Cell::new(z_own, true)];
        let mut wsum = 0.0;
        let mut vsum = 0.0;
        for c in cells {
            let cm = moments.cell(c);
            if !cm.is_populated() {
                return Err(Error::EmptyCell { z_own: c.z_own as u8, z_peers: c.z_peers as u8 });
            }
            wsum += cm.weight;
            vsum += cm.weight * moments.expectation(quantity, c)?;
        }
        Ok(vsum / wsum)
    };
    let dy = pool(true, Quantity::UNIT.with_y())? - pool(false, Quantity::UNIT.with_y())?;
    let dd = pool(true, Quantity::OWN_TREATED)? - pool(false, Quantity::OWN_TREATED)?;
    if dd.abs() <= 1e-12 {
        return Err(Error::ZeroFirstStage);
    }
    Ok(dy / dd)
}
