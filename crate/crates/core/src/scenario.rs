//! Scenario description: which model variant is analysed, the parameter
//! bounds, the infection cap, and the numeric tolerances shared by every
//! computation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// The four analysed model variants.
///
/// | variant          | state     | controls  | disturbance | feedback |
/// |------------------|-----------|-----------|-------------|----------|
/// | `SirPerfect`     | (S, I)    | beta      | -           | -        |
/// | `SeirPerfect`    | (S, E, I) | beta, gamma | -         | -        |
/// | `SirImperfect`   | (S, I)    | -         | gamma       | beta     |
/// | `SeirImperfect`  | (S, E, I) | -         | eta         | beta, gamma |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelVariant {
    SirPerfect,
    SeirPerfect,
    SirImperfect,
    SeirImperfect,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::SirPerfect,
        ModelVariant::SeirPerfect,
        ModelVariant::SirImperfect,
        ModelVariant::SeirImperfect,
    ];

    pub fn dim(self) -> usize {
        if self.is_seir() {
            3
        } else {
            2
        }
    }

    pub fn is_seir(self) -> bool {
        matches!(self, ModelVariant::SeirPerfect | ModelVariant::SeirImperfect)
    }

    pub fn is_perfect(self) -> bool {
        matches!(self, ModelVariant::SirPerfect | ModelVariant::SeirPerfect)
    }

    /// Index of the infective component in the reduced state.
    pub fn i_index(self) -> usize {
        self.dim() - 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::SirPerfect => "SIR_PERFECT",
            ModelVariant::SeirPerfect => "SEIR_PERFECT",
            ModelVariant::SirImperfect => "SIR_IMPERFECT",
            ModelVariant::SeirImperfect => "SEIR_IMPERFECT",
        }
    }

    /// Set kinds that make sense for the variant. Imperfect variants have no
    /// controllable input, so only their MRPI is defined.
    pub fn supports(self, kind: SetKind) -> bool {
        self.is_perfect() || kind == SetKind::Mrpi
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::RejectFields(format!("unknown variant {s:?}")))
    }
}

/// Admissible set (viability kernel) or maximal robust positively invariant set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SetKind {
    Admissible,
    Mrpi,
}

impl SetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetKind::Admissible => "ADMISSIBLE",
            SetKind::Mrpi => "MRPI",
        }
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admissible" | "a" => Ok(SetKind::Admissible),
            "mrpi" | "m" => Ok(SetKind::Mrpi),
            _ => Err(Error::BadSetKind(format!("unknown set kind {s:?}"))),
        }
    }
}

/// Closed interval `[lo, hi]` of a rate (1/day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        Bounds { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }
}

/// A validated scenario. Rates that are known exactly (gamma for the perfect
/// SIR model, eta for the perfect SEIR model) are stored as degenerate
/// intervals so that `gamma.lo`/`gamma.hi` are always meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub variant: ModelVariant,
    pub beta: Bounds,
    pub gamma: Bounds,
    /// Present for SEIR variants only.
    pub eta: Option<Bounds>,
    pub i_max: f64,
}

impl Scenario {
    /// Perfect SIR: known recovery rate, controllable contact rate.
    pub fn sir_perfect(gamma: f64, beta: (f64, f64), i_max: f64) -> Result<Self> {
        Scenario {
            variant: ModelVariant::SirPerfect,
            beta: Bounds::new(beta.0, beta.1),
            gamma: Bounds::fixed(gamma),
            eta: None,
            i_max,
        }
        .checked()
    }

    pub fn seir_perfect(beta: (f64, f64), gamma: (f64, f64), eta: f64, i_max: f64) -> Result<Self> {
        Scenario {
            variant: ModelVariant::SeirPerfect,
            beta: Bounds::new(beta.0, beta.1),
            gamma: Bounds::new(gamma.0, gamma.1),
            eta: Some(Bounds::fixed(eta)),
            i_max,
        }
        .checked()
    }

    pub fn sir_imperfect(beta: (f64, f64), gamma: (f64, f64), i_max: f64) -> Result<Self> {
        Scenario {
            variant: ModelVariant::SirImperfect,
            beta: Bounds::new(beta.0, beta.1),
            gamma: Bounds::new(gamma.0, gamma.1),
            eta: None,
            i_max,
        }
        .checked()
    }

    pub fn seir_imperfect(
        beta: (f64, f64),
        gamma: (f64, f64),
        eta: (f64, f64),
        i_max: f64,
    ) -> Result<Self> {
        Scenario {
            variant: ModelVariant::SeirImperfect,
            beta: Bounds::new(beta.0, beta.1),
            gamma: Bounds::new(gamma.0, gamma.1),
            eta: Some(Bounds::new(eta.0, eta.1)),
            i_max,
        }
        .checked()
    }

    /// Re-validates the invariants of a hand-built scenario.
    pub fn checked(self) -> Result<Self> {
        validate_scenario(&self.to_raw())
    }

    pub fn dim(&self) -> usize {
        self.variant.dim()
    }

    /// Eta bounds; SIR variants have none and get a degenerate zero interval.
    pub fn eta_bounds(&self) -> Bounds {
        self.eta.unwrap_or(Bounds::fixed(0.0))
    }

    /// The external key-value representation accepted by [`validate_scenario`].
    pub fn to_raw(&self) -> Value {
        let mut m = Map::new();
        m.insert("variant".into(), Value::from(self.variant.as_str()));
        m.insert("beta".into(), interval_value(self.beta));
        match self.variant {
            ModelVariant::SirPerfect => {
                m.insert("gamma".into(), Value::from(self.gamma.lo));
            }
            _ => {
                m.insert("gamma".into(), interval_value(self.gamma));
            }
        }
        if let Some(eta) = self.eta {
            let v = if self.variant == ModelVariant::SeirPerfect {
                Value::from(eta.lo)
            } else {
                interval_value(eta)
            };
            m.insert("eta".into(), v);
        }
        m.insert("i_max".into(), Value::from(self.i_max));
        Value::Object(m)
    }
}

fn interval_value(b: Bounds) -> Value {
    Value::Array(vec![Value::from(b.lo), Value::from(b.hi)])
}

/// Numeric tolerances. All strictly positive and `event_time_tol < step_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub geom_tol: f64,
    pub ham_tol: f64,
    pub event_time_tol: f64,
    pub boundary_layer_eps: f64,
    pub i_floor: f64,
    /// Integration step in days.
    pub step_h: f64,
    /// Backward integration horizon in days.
    pub t_back_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            geom_tol: 1e-9,
            ham_tol: 1e-6,
            event_time_tol: 1e-10,
            boundary_layer_eps: 1e-3,
            i_floor: 1e-9,
            step_h: 1e-3,
            t_back_max: 1000.0,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 7] = [
        "geom_tol",
        "ham_tol",
        "event_time_tol",
        "boundary_layer_eps",
        "i_floor",
        "step_h",
        "t_back_max",
    ];

    pub fn validate(self) -> Result<Self> {
        for (key, v) in self.entries() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::RejectTolerances(format!("{key} = {v} must be positive")));
            }
        }
        if self.event_time_tol >= self.step_h {
            return Err(Error::RejectTolerances(format!(
                "event_time_tol = {} must be smaller than step_h = {}",
                self.event_time_tol, self.step_h
            )));
        }
        Ok(self)
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("geom_tol", self.geom_tol),
            ("ham_tol", self.ham_tol),
            ("event_time_tol", self.event_time_tol),
            ("boundary_layer_eps", self.boundary_layer_eps),
            ("i_floor", self.i_floor),
            ("step_h", self.step_h),
            ("t_back_max", self.t_back_max),
        ]
    }

    /// Applies a single `key=value` override; the result is validated.
    pub fn with_override(mut self, key: &str, value: f64) -> Result<Self> {
        let slot = match key {
            "geom_tol" => &mut self.geom_tol,
            "ham_tol" => &mut self.ham_tol,
            "event_time_tol" => &mut self.event_time_tol,
            "boundary_layer_eps" => &mut self.boundary_layer_eps,
            "i_floor" => &mut self.i_floor,
            "step_h" => &mut self.step_h,
            "t_back_max" => &mut self.t_back_max,
            _ => return Err(Error::RejectTolerances(format!("unknown tolerance {key:?}"))),
        };
        *slot = value;
        self.validate()
    }

    /// Parses `key=value`.
    pub fn with_override_str(self, spec: &str) -> Result<Self> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::RejectTolerances(format!("expected key=value, got {spec:?}")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::RejectTolerances(format!("bad number in {spec:?}")))?;
        self.with_override(k.trim(), value)
    }
}

/// A point of the reduced state space: `(S, I)` for SIR variants and
/// `(S, E, I)` for SEIR variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    /// Builds a state without the simplex check. Used for integrator output,
    /// which may sit a rounding error outside the simplex.
    pub fn from_components(comps: Vec<f64>) -> Self {
        debug_assert!(comps.len() == 2 || comps.len() == 3);
        StateVec(comps)
    }

    pub fn sir(s: f64, i: f64) -> Self {
        StateVec(vec![s, i])
    }

    pub fn seir(s: f64, e: f64, i: f64) -> Self {
        StateVec(vec![s, e, i])
    }

    /// Validated constructor: right dimension, finite, nonnegative and summing
    /// to at most one, each within `geom_tol`.
    pub fn new(variant: ModelVariant, comps: &[f64], geom_tol: f64) -> Result<Self> {
        if comps.len() != variant.dim() {
            return Err(Error::BadState(format!(
                "{variant} needs {} components, got {}",
                variant.dim(),
                comps.len()
            )));
        }
        let st = StateVec(comps.to_vec());
        if !st.in_simplex(geom_tol) {
            return Err(Error::BadState(format!("{comps:?} is not in the simplex")));
        }
        Ok(st)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn s(&self) -> f64 {
        self.0[0]
    }

    pub fn e(&self) -> Option<f64> {
        (self.0.len() == 3).then(|| self.0[1])
    }

    pub fn i(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn in_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|c| c.is_finite() && *c >= -tol) && self.sum() <= 1.0 + tol
    }

    /// Membership in the constrained state space (simplex with the cap).
    pub fn in_constraint_set(&self, i_max: f64, tol: f64) -> bool {
        self.in_simplex(tol) && self.i() <= i_max + tol
    }
}

/// Proportion removed, `R = 1 - sum(components)`, clamped to `[0, 1]`.
pub fn reconstruct_removed(state: &StateVec) -> f64 {
    (1.0 - state.sum()).clamp(0.0, 1.0)
}

/// Validates the external key-value representation of a scenario.
///
/// Accepted shape: `{variant, beta: [lo, hi], gamma: x | [lo, hi],
/// eta?: x | [lo, hi], i_max}`. A `tolerances` key is tolerated (it is read
/// by [`validate_config`]); anything else is rejected.
pub fn validate_scenario(raw: &Value) -> Result<Scenario> {
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::RejectFields("scenario must be a JSON object".into()))?;

    let variant: ModelVariant = obj
        .get("variant")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::RejectFields("missing string field \"variant\"".into()))?
        .parse()?;

    // (gamma is scalar, eta present, eta is scalar)
    let (gamma_scalar, has_eta, eta_scalar) = match variant {
        ModelVariant::SirPerfect => (true, false, false),
        ModelVariant::SeirPerfect => (false, true, true),
        ModelVariant::SirImperfect => (false, false, false),
        ModelVariant::SeirImperfect => (false, true, false),
    };

    for key in obj.keys() {
        let known = matches!(key.as_str(), "variant" | "beta" | "gamma" | "i_max" | "tolerances")
            || (key == "eta" && has_eta);
        if !known {
            return Err(Error::RejectFields(format!("field {key:?} is not valid for {variant}")));
        }
    }

    let beta = interval_field(obj, "beta")?;
    let gamma = if gamma_scalar {
        Bounds::fixed(scalar_field(obj, "gamma")?)
    } else {
        interval_field(obj, "gamma")?
    };
    let eta = if !has_eta {
        None
    } else if eta_scalar {
        Some(Bounds::fixed(scalar_field(obj, "eta")?))
    } else {
        Some(interval_field(obj, "eta")?)
    };
    let i_max = scalar_field(obj, "i_max")?;

    check_bounds("beta", beta)?;
    check_bounds("gamma", gamma)?;
    if let Some(eta) = eta {
        check_bounds("eta", eta)?;
    }
    if !(i_max > 0.0 && i_max < 1.0) {
        return Err(Error::RejectCap(i_max));
    }

    Ok(Scenario {
        variant,
        beta,
        gamma,
        eta,
        i_max,
    })
}

/// Scenario plus optional `tolerances` overrides from the same document.
pub fn validate_config(raw: &Value) -> Result<(Scenario, Tolerances)> {
    let scenario = validate_scenario(raw)?;
    let tol = match raw.get("tolerances") {
        None | Some(Value::Null) => Tolerances::default(),
        Some(t) => serde_json::from_value::<Tolerances>(t.clone())
            .map_err(|e| Error::RejectTolerances(e.to_string()))?
            .validate()?,
    };
    Ok((scenario, tol))
}

fn scalar_field(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    match obj.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| Error::RejectFields(format!("{key:?} is not a number"))),
        Some(_) => Err(Error::RejectFields(format!("{key:?} must be a number"))),
        None => Err(Error::RejectFields(format!("missing field {key:?}"))),
    }
}

fn interval_field(obj: &Map<String, Value>, key: &str) -> Result<Bounds> {
    let arr = match obj.get(key) {
        Some(Value::Array(a)) if a.len() == 2 => a,
        Some(_) => return Err(Error::RejectFields(format!("{key:?} must be a [lo, hi] pair"))),
        None => return Err(Error::RejectFields(format!("missing field {key:?}"))),
    };
    let lo = arr[0].as_f64();
    let hi = arr[1].as_f64();
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(Bounds::new(lo, hi)),
        _ => Err(Error::RejectFields(format!("{key:?} must contain numbers"))),
    }
}

fn check_bounds(name: &str, b: Bounds) -> Result<()> {
    if !(b.lo > 0.0 && b.lo.is_finite() && b.hi.is_finite()) {
        return Err(Error::RejectBounds(format!("{name} lower bound {} must be positive", b.lo)));
    }
    if b.lo > b.hi {
        return Err(Error::RejectBounds(format!("{name} bounds [{}, {}] are reversed", b.lo, b.hi)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accepts_sir_perfect_example() {
        let s = validate_scenario(&json!({
            "variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.6, 0.8], "i_max": 0.02
        }))
        .unwrap();
        assert_eq!(s.variant, ModelVariant::SirPerfect);
        assert_eq!(s.gamma, Bounds::fixed(0.5));
        assert_eq!(s.beta, Bounds::new(0.6, 0.8));
    }

    #[test]
    fn rejects_reversed_beta() {
        let err = validate_scenario(&json!({
            "variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.8, 0.6], "i_max": 0.02
        }))
        .unwrap_err();
        assert_eq!(err.code(), "REJECT_BOUNDS");
    }

    #[test]
    fn accepts_seir_imperfect_example() {
        let s = validate_scenario(&json!({
            "variant": "SEIR_IMPERFECT", "beta": [0.8, 1.0],
            "gamma": [1.0/5.0, 1.0/3.0], "eta": [1.0/7.0, 1.0/5.0], "i_max": 0.1
        }))
        .unwrap();
        assert_eq!(s.eta, Some(Bounds::new(1.0 / 7.0, 0.2)));
    }

    #[test]
    fn cap_must_be_open_unit_interval() {
        for cap in [0.0, 1.0, -0.1, 1.5] {
            let err = validate_scenario(&json!({
                "variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.6, 0.8], "i_max": cap
            }))
            .unwrap_err();
            assert_eq!(err.code(), "REJECT_CAP", "cap {cap}");
        }
    }

    #[test]
    fn field_shape_follows_variant() {
        let cases = [
            // eta not allowed for SIR
            json!({"variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.6, 0.8], "eta": 0.2, "i_max": 0.02}),
            // perfect SIR needs a scalar gamma
            json!({"variant": "SIR_PERFECT", "gamma": [0.3, 0.5], "beta": [0.6, 0.8], "i_max": 0.02}),
            // imperfect SIR needs an interval
            json!({"variant": "SIR_IMPERFECT", "gamma": 0.3, "beta": [0.6, 0.8], "i_max": 0.2}),
            // missing eta
            json!({"variant": "SEIR_PERFECT", "gamma": [0.2, 0.3], "beta": [0.8, 1.0], "i_max": 0.3}),
            // unknown key
            json!({"variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.6, 0.8], "i_max": 0.02, "x": 1}),
            json!({"variant": "SIRS", "gamma": 0.5, "beta": [0.6, 0.8], "i_max": 0.02}),
            json!([1, 2]),
        ];
        for raw in cases {
            assert_eq!(validate_scenario(&raw).unwrap_err().code(), "REJECT_FIELDS", "{raw}");
        }
    }

    #[test]
    fn raw_round_trip() {
        let s = Scenario::seir_perfect((0.8, 1.0), (0.2, 1.0 / 3.0), 0.2, 0.3).unwrap();
        assert_eq!(validate_scenario(&s.to_raw()).unwrap(), s);
    }

    #[test]
    fn tolerances_overrides() {
        let t = Tolerances::default().with_override_str("step_h=5e-4").unwrap();
        assert_eq!(t.step_h, 5e-4);
        assert!(Tolerances::default().with_override("step_h", 1e-11).is_err());
        assert!(Tolerances::default().with_override("bogus", 1.0).is_err());
        assert!(Tolerances::default().with_override("geom_tol", 0.0).is_err());
        let (_, t) = validate_config(&json!({
            "variant": "SIR_PERFECT", "gamma": 0.5, "beta": [0.6, 0.8], "i_max": 0.02,
            "tolerances": {"step_h": 2e-3}
        }))
        .unwrap();
        assert_eq!(t.step_h, 2e-3);
        assert_eq!(t.geom_tol, 1e-9);
    }

    #[test]
    fn removed_proportion() {
        assert!((reconstruct_removed(&StateVec::sir(0.8, 0.1)) - 0.1).abs() < 1e-15);
        assert_eq!(reconstruct_removed(&StateVec::seir(0.2, 0.5, 0.3)), 0.0);
        assert_eq!(reconstruct_removed(&StateVec::sir(1.0, 0.0)), 0.0);
    }

    #[test]
    fn state_validation() {
        assert!(StateVec::new(ModelVariant::SirPerfect, &[0.5, 0.5], 1e-9).is_ok());
        assert!(StateVec::new(ModelVariant::SirPerfect, &[0.6, 0.5], 1e-9).is_err());
        assert!(StateVec::new(ModelVariant::SirPerfect, &[-0.1, 0.5], 1e-9).is_err());
        assert!(StateVec::new(ModelVariant::SeirPerfect, &[0.5, 0.5], 1e-9).is_err());
    }
}
