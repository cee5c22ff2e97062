//! Vector fields, feedback laws, adjoint right-hand sides and switching
//! functionals.
//!
//! States are reduced: `(S, I)` for SIR and `(S, E, I)` for SEIR. The
//! adjoint matrices below are written as `lambda' = M lambda` with
//! `M[i][j] = -d f_j / d x_i`, i.e. `M = -(df/dx)^T`. The unit tests check
//! every entry against central differences of the vector field.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Bounds, ModelVariant, Scenario, SetKind};

/// Effective rates at one instant. For imperfect variants `beta` (and, for
/// SEIR, `gamma`) hold the feedback values at the current state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputVec {
    pub beta: f64,
    pub gamma: f64,
    /// SEIR only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl InputVec {
    pub fn sir(beta: f64, gamma: f64) -> Self {
        InputVec {
            beta,
            gamma,
            eta: None,
        }
    }

    pub fn seir(beta: f64, gamma: f64, eta: f64) -> Self {
        InputVec {
            beta,
            gamma,
            eta: Some(eta),
        }
    }

    pub fn eta_or_zero(&self) -> f64 {
        self.eta.unwrap_or(0.0)
    }

    /// Every rate lies in its scenario interval (closed, widened by `tol`).
    pub fn in_box(&self, scenario: &Scenario, tol: f64) -> bool {
        let eta_ok = match (self.eta, scenario.eta) {
            (Some(e), Some(b)) => b.contains(e, tol),
            (None, None) => true,
            _ => false,
        };
        scenario.beta.contains(self.beta, tol) && scenario.gamma.contains(self.gamma, tol) && eta_ok
    }
}

/// An input channel of the barrier construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Beta,
    Gamma,
    Eta,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Beta => "beta",
            Channel::Gamma => "gamma",
            Channel::Eta => "eta",
        }
    }

    /// Channels whose extremal value is chosen along a barrier: controls for
    /// perfect variants, the disturbance for imperfect ones.
    pub fn active(variant: ModelVariant) -> &'static [Channel] {
        match variant {
            ModelVariant::SirPerfect => &[Channel::Beta],
            ModelVariant::SeirPerfect => &[Channel::Beta, Channel::Gamma],
            ModelVariant::SirImperfect => &[Channel::Gamma],
            ModelVariant::SeirImperfect => &[Channel::Eta],
        }
    }

    pub fn bounds(self, scenario: &Scenario) -> Bounds {
        match self {
            Channel::Beta => scenario.beta,
            Channel::Gamma => scenario.gamma,
            Channel::Eta => scenario.eta_bounds(),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beta" => Ok(Channel::Beta),
            "gamma" => Ok(Channel::Gamma),
            "eta" => Ok(Channel::Eta),
            _ => Err(Error::BadChannel(format!("unknown channel {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SwitchTag {
    /// lambda2 - lambda1
    SigmaBeta,
    /// lambda2 (SIR)
    SigmaGammaSir,
    /// lambda3 (SEIR)
    SigmaGammaSeir,
    /// lambda3 - lambda2
    SigmaEta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFunctional {
    pub tag: SwitchTag,
    pub value: f64,
}

/// Low or high end of a channel's interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Lo,
    Hi,
}

impl Level {
    pub fn pick(self, b: Bounds) -> f64 {
        match self {
            Level::Lo => b.lo,
            Level::Hi => b.hi,
        }
    }
}

/// Bang-bang choice for every channel. Only the variant's active channels are
/// read; the others are placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bang {
    pub beta: Level,
    pub gamma: Level,
    pub eta: Level,
}

impl Bang {
    pub const LOW: Bang = Bang {
        beta: Level::Lo,
        gamma: Level::Lo,
        eta: Level::Lo,
    };

    pub fn get(&self, ch: Channel) -> Level {
        match ch {
            Channel::Beta => self.beta,
            Channel::Gamma => self.gamma,
            Channel::Eta => self.eta,
        }
    }

    pub fn set(&mut self, ch: Channel, level: Level) {
        match ch {
            Channel::Beta => self.beta = level,
            Channel::Gamma => self.gamma = level,
            Channel::Eta => self.eta = level,
        }
    }
}

pub fn sir_rhs(x: &[f64], beta: f64, gamma: f64) -> [f64; 2] {
    let (s, i) = (x[0], x[1]);
    let inf = beta * s * i;
    [-inf, inf - gamma * i]
}

pub fn seir_rhs(x: &[f64], beta: f64, gamma: f64, eta: f64) -> [f64; 3] {
    let (s, e, i) = (x[0], x[1], x[2]);
    let inf = beta * s * i;
    [-inf, inf - eta * e, eta * e - gamma * i]
}

fn feedback_fraction(i: f64, scenario: &Scenario, tol: f64) -> Result<f64> {
    if scenario.variant.is_perfect() {
        return Err(Error::Domain(format!("feedback laws are not defined for {}", scenario.variant)));
    }
    if !(i >= -tol && i <= scenario.i_max + tol) {
        return Err(Error::Domain(format!("I = {i} is outside [0, {}]", scenario.i_max)));
    }
    Ok(i.clamp(0.0, scenario.i_max) / scenario.i_max)
}

/// Social-distancing feedback, decreasing affinely from `beta_max` at `I = 0`
/// to `beta_min` at the cap.
pub fn beta_feedback(i: f64, scenario: &Scenario, tol: f64) -> Result<f64> {
    let r = feedback_fraction(i, scenario, tol)?;
    Ok(beta_hat(r, scenario.beta))
}

/// Quarantine feedback, increasing affinely from `gamma_min` at `I = 0` to
/// `gamma_max` at the cap.
pub fn gamma_feedback(i: f64, scenario: &Scenario, tol: f64) -> Result<f64> {
    let r = feedback_fraction(i, scenario, tol)?;
    Ok(gamma_hat(r, scenario.gamma))
}

// Written so that r = 0 and r = 1 reproduce the endpoints exactly.
fn beta_hat(r: f64, b: Bounds) -> f64 {
    if r == 1.0 {
        b.lo
    } else {
        b.lo * r + b.hi * (1.0 - r)
    }
}

fn gamma_hat(r: f64, g: Bounds) -> f64 {
    if r == 1.0 {
        g.hi
    } else {
        g.lo * (1.0 - r) + g.hi * r
    }
}

/// Feedback values with `I` clamped to `[0, i_max]`. Used inside integrators,
/// where `I` may overshoot the cap by a rounding error or more.
pub fn beta_feedback_clamped(i: f64, scenario: &Scenario) -> f64 {
    beta_hat(i.clamp(0.0, scenario.i_max) / scenario.i_max, scenario.beta)
}

pub fn gamma_feedback_clamped(i: f64, scenario: &Scenario) -> f64 {
    gamma_hat(i.clamp(0.0, scenario.i_max) / scenario.i_max, scenario.gamma)
}

/// `d(beta_hat(I) I)/dI = 2 (beta_min - beta_max) I / i_max + beta_max`.
pub fn alpha_of_i(i: f64, scenario: &Scenario) -> f64 {
    2.0 * (scenario.beta.lo - scenario.beta.hi) / scenario.i_max * i + scenario.beta.hi
}

/// `d(gamma_hat(I) I)/dI = 2 (gamma_max - gamma_min) I / i_max + gamma_min`.
pub fn delta_of_i(i: f64, scenario: &Scenario) -> f64 {
    2.0 * (scenario.gamma.hi - scenario.gamma.lo) / scenario.i_max * i + scenario.gamma.lo
}

/// Effective rates at state `x` for a bang-bang choice: active channels take
/// the chosen end of their interval, known rates their fixed value, and
/// feedback rates are evaluated at `I`.
pub fn effective_input(scenario: &Scenario, x: &[f64], bang: &Bang) -> InputVec {
    let i = x[x.len() - 1];
    match scenario.variant {
        ModelVariant::SirPerfect => InputVec::sir(bang.beta.pick(scenario.beta), scenario.gamma.lo),
        ModelVariant::SeirPerfect => InputVec::seir(
            bang.beta.pick(scenario.beta),
            bang.gamma.pick(scenario.gamma),
            scenario.eta_bounds().lo,
        ),
        ModelVariant::SirImperfect => {
            InputVec::sir(beta_feedback_clamped(i, scenario), bang.gamma.pick(scenario.gamma))
        }
        ModelVariant::SeirImperfect => InputVec::seir(
            beta_feedback_clamped(i, scenario),
            gamma_feedback_clamped(i, scenario),
            bang.eta.pick(scenario.eta_bounds()),
        ),
    }
}

/// State derivative for the given effective rates, written into `out`.
pub fn vector_field(variant: ModelVariant, x: &[f64], u: &InputVec, out: &mut [f64]) {
    if variant.is_seir() {
        out[..3].copy_from_slice(&seir_rhs(x, u.beta, u.gamma, u.eta_or_zero()));
    } else {
        out[..2].copy_from_slice(&sir_rhs(x, u.beta, u.gamma));
    }
}

/// The adjoint matrix `M` with `lambda' = M lambda`, row-major, padded to 3x3.
pub fn adjoint_matrix(scenario: &Scenario, x: &[f64], u: &InputVec) -> [[f64; 3]; 3] {
    let b = u.beta;
    let g = u.gamma;
    match scenario.variant {
        ModelVariant::SirPerfect => {
            let (s, i) = (x[0], x[1]);
            [[b * i, -b * i, 0.0], [b * s, -b * s + g, 0.0], [0.0; 3]]
        }
        ModelVariant::SirImperfect => {
            let (s, i) = (x[0], x[1]);
            let a = alpha_of_i(i, scenario);
            [[b * i, -b * i, 0.0], [a * s, -a * s + g, 0.0], [0.0; 3]]
        }
        ModelVariant::SeirPerfect => {
            let (s, i) = (x[0], x[2]);
            let eta = u.eta_or_zero();
            [[b * i, -b * i, 0.0], [0.0, eta, -eta], [b * s, -b * s, g]]
        }
        ModelVariant::SeirImperfect => {
            let (s, i) = (x[0], x[2]);
            let eta = u.eta_or_zero();
            let a = alpha_of_i(i, scenario);
            let d = delta_of_i(i, scenario);
            [[b * i, -b * i, 0.0], [0.0, eta, -eta], [a * s, -a * s, d]]
        }
    }
}

/// Adjoint derivative `M lambda`, written into `out`.
pub fn adjoint_rhs(scenario: &Scenario, x: &[f64], lambda: &[f64], u: &InputVec, out: &mut [f64]) {
    let m = adjoint_matrix(scenario, x, u);
    let n = scenario.dim();
    for (r, row) in m.iter().enumerate().take(n) {
        out[r] = row.iter().zip(lambda).take(n).map(|(a, l)| a * l).sum();
    }
}

pub fn switch_tag(variant: ModelVariant, channel: Channel) -> Result<SwitchTag> {
    match (channel, variant) {
        (Channel::Beta, ModelVariant::SirPerfect | ModelVariant::SeirPerfect) => Ok(SwitchTag::SigmaBeta),
        (Channel::Gamma, ModelVariant::SeirPerfect) => Ok(SwitchTag::SigmaGammaSeir),
        (Channel::Gamma, ModelVariant::SirImperfect) => Ok(SwitchTag::SigmaGammaSir),
        (Channel::Eta, ModelVariant::SeirImperfect) => Ok(SwitchTag::SigmaEta),
        _ => Err(Error::BadChannel(format!("{channel} is not a free input of {variant}"))),
    }
}

fn tag_value(tag: SwitchTag, lambda: &[f64]) -> f64 {
    match tag {
        SwitchTag::SigmaBeta => lambda[1] - lambda[0],
        SwitchTag::SigmaGammaSir => lambda[1],
        SwitchTag::SigmaGammaSeir => lambda[2],
        SwitchTag::SigmaEta => lambda[2] - lambda[1],
    }
}

/// The signed functional whose sign selects the extremal value of `channel`.
/// The set kind does not change the functional, only how its sign is read
/// (see [`extremal_level`]); it is validated for the variant.
pub fn switch_value(
    variant: ModelVariant,
    set_kind: SetKind,
    channel: Channel,
    lambda: &[f64],
) -> Result<SwitchFunctional> {
    if !variant.supports(set_kind) {
        return Err(Error::BadSetKind(format!("{set_kind} is not defined for {variant}")));
    }
    let tag = switch_tag(variant, channel)?;
    Ok(SwitchFunctional {
        tag,
        value: tag_value(tag, lambda),
    })
}

/// Extremal level of `channel` for a functional of sign `sign` (nonzero).
///
/// The Hamiltonian depends on beta and eta through `+sigma` times a
/// nonnegative weight and on gamma through `-sigma`. Admissible barriers
/// minimise it over the controls, MRPI barriers maximise it over
/// inputs and disturbances.
pub fn extremal_level(set_kind: SetKind, channel: Channel, sign: f64) -> Level {
    let increasing = match channel {
        Channel::Beta | Channel::Eta => sign > 0.0,
        Channel::Gamma => sign < 0.0,
    };
    let maximise = set_kind == SetKind::Mrpi;
    if increasing == maximise {
        Level::Hi
    } else {
        Level::Lo
    }
}

/// `lambda^T f`.
pub fn hamiltonian(variant: ModelVariant, x: &[f64], lambda: &[f64], u: &InputVec) -> f64 {
    let mut f = [0.0; 3];
    vector_field(variant, x, u, &mut f);
    f.iter().zip(lambda).take(variant.dim()).map(|(a, b)| a * b).sum()
}

/// `L_f g` for `g = I - i_max`, i.e. the `I` component of the vector field.
pub fn lie_derivative_g(variant: ModelVariant, x: &[f64], u: &InputVec) -> f64 {
    let mut f = [0.0; 3];
    vector_field(variant, x, u, &mut f);
    f[variant.dim() - 1]
}
