//! Closed-form classification, usable parts and ultimate-tangency sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ModelVariant, Scenario, SetKind, StateVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassTag {
    /// M = A = G_Pi
    AllEqualG,
    /// M strictly inside A = G_Pi
    MrpiProper,
    /// M strictly inside A strictly inside G_Pi
    BothProper,
    /// Imperfect variants: M = G_Pi
    MEqualG,
    /// Imperfect variants: M strictly inside G_Pi
    MProper,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::AllEqualG => "ALL_EQUAL_G",
            ClassTag::MrpiProper => "MRPI_PROPER",
            ClassTag::BothProper => "BOTH_PROPER",
            ClassTag::MEqualG => "M_EQUAL_G",
            ClassTag::MProper => "M_PROPER",
        }
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Witness {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Witness {
            name: name.to_string(),
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub tag: ClassTag,
    pub witnesses: Vec<Witness>,
}

impl Classification {
    /// Whether the set of the given kind is all of G_Pi.
    pub fn is_trivial(&self, kind: SetKind) -> bool {
        match (self.tag, kind) {
            (ClassTag::AllEqualG, _) | (ClassTag::MEqualG, _) => true,
            (ClassTag::MrpiProper, SetKind::Admissible) => true,
            _ => false,
        }
    }
}

pub fn classify(sc: &Scenario) -> Classification {
    let c = 1.0 - sc.i_max;
    match sc.variant {
        ModelVariant::SirPerfect => {
            let g = sc.gamma.lo;
            let w_max = Witness::le("beta_max <= gamma/(1-i_max)", sc.beta.hi, g / c);
            let w_min = Witness::le("beta_min <= gamma/(1-i_max)", sc.beta.lo, g / c);
            let tag = if w_max.holds {
                ClassTag::AllEqualG
            } else if w_min.holds {
                ClassTag::MrpiProper
            } else {
                ClassTag::BothProper
            };
            Classification {
                tag,
                witnesses: vec![w_max, w_min],
            }
        }
        ModelVariant::SirImperfect => {
            let w = Witness::le("beta_min <= gamma_min/(1-i_max)", sc.beta.lo, sc.gamma.lo / c);
            let tag = if w.holds { ClassTag::MEqualG } else { ClassTag::MProper };
            Classification { tag, witnesses: vec![w] }
        }
        ModelVariant::SeirPerfect => {
            let eta = sc.eta_bounds().lo;
            let w_lo = Witness::le(
                "eta(1-i_max) - gamma_min i_max <= 0",
                eta * c - sc.gamma.lo * sc.i_max,
                0.0,
            );
            let w_hi = Witness::le(
                "eta(1-i_max) - gamma_max i_max <= 0",
                eta * c - sc.gamma.hi * sc.i_max,
                0.0,
            );
            let tag = if w_lo.holds {
                ClassTag::AllEqualG
            } else if w_hi.holds {
                ClassTag::MrpiProper
            } else {
                ClassTag::BothProper
            };
            Classification {
                tag,
                witnesses: vec![w_lo, w_hi],
            }
        }
        ModelVariant::SeirImperfect => {
            let w = Witness::le(
                "eta_max(1-i_max) - gamma_max i_max <= 0",
                sc.eta_bounds().hi * c - sc.gamma.hi * sc.i_max,
                0.0,
            );
            let tag = if w.holds { ClassTag::MEqualG } else { ClassTag::MProper };
            Classification { tag, witnesses: vec![w] }
        }
    }
}

fn check_kind(sc: &Scenario, kind: SetKind) -> Result<()> {
    if sc.variant.supports(kind) {
        Ok(())
    } else {
        Err(Error::BadSetKind(format!("{kind} is not defined for {}", sc.variant)))
    }
}

/// Usable part on the cap face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum UsablePart {
    /// `{(S, i_max) : s_lo <= S <= s_hi}`
    Interval { set_kind: SetKind, i_max: f64, s_lo: f64, s_hi: f64 },
    /// `{(S, E, i_max) : 0 <= S <= 1 - i_max, 0 <= E <= min(e_star, 1 - S - i_max)}`
    Region { set_kind: SetKind, i_max: f64, s_max: f64, e_star: f64 },
}

impl UsablePart {
    pub fn set_kind(&self) -> SetKind {
        match self {
            UsablePart::Interval { set_kind, .. } | UsablePart::Region { set_kind, .. } => *set_kind,
        }
    }

    /// Upper `E` bound at a given `S` (SEIR).
    pub fn e_cap(&self, s: f64) -> f64 {
        match self {
            UsablePart::Interval { .. } => 0.0,
            UsablePart::Region { i_max, e_star, .. } => e_star.min(1.0 - s - i_max),
        }
    }

    /// Whether the cap-face point with coordinates `x` (I ignored) belongs to
    /// the usable part, widened by `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            UsablePart::Interval { s_lo, s_hi, .. } => x[0] >= s_lo - tol && x[0] <= s_hi + tol,
            UsablePart::Region { s_max, .. } => {
                let (s, e) = (x[0], x[1]);
                s >= -tol && s <= s_max + tol && e >= -tol && e <= self.e_cap(s) + tol
            }
        }
    }
}

/// `(gamma*, eta*)` fixing the tangent E-value and `(gamma#, beta#)` bounding
/// the tangent abscissa, per SEIR set kind.
fn seir_rates(sc: &Scenario, kind: SetKind) -> ((f64, f64), (f64, f64)) {
    let eta = sc.eta_bounds();
    match (sc.variant, kind) {
        (ModelVariant::SeirPerfect, SetKind::Admissible) => ((sc.gamma.hi, eta.lo), (sc.gamma.hi, sc.beta.lo)),
        (ModelVariant::SeirPerfect, SetKind::Mrpi) => ((sc.gamma.lo, eta.lo), (sc.gamma.lo, sc.beta.hi)),
        _ => ((sc.gamma.hi, eta.hi), (sc.gamma.hi, sc.beta.lo)),
    }
}

/// `S` coordinate of the SIR tangent point.
fn sir_abscissa(sc: &Scenario, kind: SetKind) -> f64 {
    match (sc.variant, kind) {
        (ModelVariant::SirPerfect, SetKind::Admissible) => sc.gamma.lo / sc.beta.lo,
        (ModelVariant::SirPerfect, SetKind::Mrpi) => sc.gamma.lo / sc.beta.hi,
        // beta_hat(i_max) = beta_min with the worst-case gamma_min
        _ => sc.gamma.lo / sc.beta.lo,
    }
}

pub fn usable_part(sc: &Scenario, kind: SetKind) -> Result<UsablePart> {
    check_kind(sc, kind)?;
    let s_max = 1.0 - sc.i_max;
    Ok(if sc.variant.is_seir() {
        let ((g, e), _) = seir_rates(sc, kind);
        UsablePart::Region {
            set_kind: kind,
            i_max: sc.i_max,
            s_max,
            e_star: g / e * sc.i_max,
        }
    } else {
        UsablePart::Interval {
            set_kind: kind,
            i_max: sc.i_max,
            s_lo: 0.0,
            s_hi: sir_abscissa(sc, kind).min(s_max),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TangentSet {
    Point { z: StateVec },
    /// `{(z1, z2, i_max) : z1_lo <= z1 <= z1_hi}`
    Segment { z1_lo: f64, z1_hi: f64, z2: f64, i_max: f64 },
}

impl TangentSet {
    /// `n` tangent points. SEIR abscissas are cell centres of `n` equal cells
    /// of `[z1_lo, z1_hi]`; the ends are avoided because `z1 = 0` is an
    /// equilibrium and the upper end degenerates onto the simplex face.
    pub fn points(&self, n: usize) -> Vec<StateVec> {
        match self {
            TangentSet::Point { z } => vec![z.clone()],
            TangentSet::Segment { z1_lo, z1_hi, z2, i_max } => (0..n)
                .map(|k| {
                    let z1 = z1_lo + (z1_hi - z1_lo) * (k as f64 + 0.5) / n as f64;
                    StateVec::seir(z1, *z2, *i_max)
                })
                .collect(),
        }
    }
}

/// Ultimate-tangency set before the backward filter. For SEIR the abscissa
/// range is only bounded by the simplex.
pub fn tangent_set(sc: &Scenario, kind: SetKind) -> Result<TangentSet> {
    check_kind(sc, kind)?;
    if sc.variant.is_seir() {
        let ((g, e), _) = seir_rates(sc, kind);
        let z2 = g / e * sc.i_max;
        let hi = 1.0 - z2 - sc.i_max;
        if hi <= 0.0 {
            return Err(Error::EmptyTangent(format!(
                "tangent E-value {z2} leaves no room below the simplex at i_max = {}",
                sc.i_max
            )));
        }
        Ok(TangentSet::Segment {
            z1_lo: 0.0,
            z1_hi: hi,
            z2,
            i_max: sc.i_max,
        })
    } else {
        let z1 = sir_abscissa(sc, kind);
        if z1 + sc.i_max > 1.0 {
            return Err(Error::EmptyTangent(format!(
                "tangent point ({z1}, {}) lies outside the simplex",
                sc.i_max
            )));
        }
        Ok(TangentSet::Point {
            z: StateVec::sir(z1, sc.i_max),
        })
    }
}

/// Second backward derivative of `g` at the SIR tangent point. Negative means
/// the barrier enters `I < i_max` going backward.
pub fn sir_backward_curvature(sc: &Scenario, kind: SetKind) -> f64 {
    let i = sc.i_max;
    match (sc.variant, kind) {
        (ModelVariant::SirPerfect, SetKind::Admissible) => -sc.gamma.lo * sc.beta.lo * i * i,
        (ModelVariant::SirPerfect, SetKind::Mrpi) => -sc.gamma.lo * sc.beta.hi * i * i,
        _ => -sc.beta.lo * sc.beta.lo * (sc.gamma.lo / sc.beta.lo) * i * i,
    }
}

/// Restricts the tangent set to points whose backward evolution enters the
/// interior. SEIR: `z1 <= min(gamma#/beta#, 1 - z2 - i_max)`. SIR: checks
/// the curvature sign and returns the point unchanged.
pub fn backward_filter(sc: &Scenario, kind: SetKind, ts: &TangentSet) -> Result<TangentSet> {
    check_kind(sc, kind)?;
    match ts {
        TangentSet::Point { .. } => {
            let c = sir_backward_curvature(sc, kind);
            if c < 0.0 {
                Ok(ts.clone())
            } else {
                Err(Error::EmptyTangent(format!("backward curvature {c} is not negative")))
            }
        }
        TangentSet::Segment { z1_lo, z1_hi, z2, i_max } => {
            let (_, (g, b)) = seir_rates(sc, kind);
            let hi = z1_hi.min(g / b).min(1.0 - z2 - i_max);
            if hi <= *z1_lo {
                return Err(Error::EmptyTangent(format!("filtered abscissa range [{z1_lo}, {hi}] is empty")));
            }
            Ok(TangentSet::Segment {
                z1_lo: *z1_lo,
                z1_hi: hi,
                z2: *z2,
                i_max: *i_max,
            })
        }
    }
}

/// Tangent set after filtering.
pub fn filtered_tangent_set(sc: &Scenario, kind: SetKind) -> Result<TangentSet> {
    let ts = tangent_set(sc, kind)?;
    backward_filter(sc, kind, &ts)
}
