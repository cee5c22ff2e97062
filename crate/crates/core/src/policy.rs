//! Forward simulation under intervention policies, the set-based switching
//! law, seeded Monte Carlo sweeps and the brute-force membership oracle.
//!
//! Random draws use ChaCha8 seeded from a `u64`, with one stream per trial so
//! results do not depend on evaluation order.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier::{ComputedSet, Verdict};
use crate::error::{Error, Result};
use crate::geometry::BoundaryPart;
use crate::integrate::{bisect_root, rk4_step, DEFAULT_RECORD_EVERY};
use crate::models::{
    beta_feedback_clamped, effective_input, gamma_feedback_clamped, vector_field, Bang, Channel, InputVec, Level,
};
use crate::scenario::{ModelVariant, Scenario, SetKind, StateVec, Tolerances};

pub const DEFAULT_T_END: f64 = 500.0;
pub const MAX_T_END: f64 = 10_000.0;
pub const DEFAULT_SEGMENTS: usize = 8;
/// Random switch times of extremal bang signals fall in `[0, window]`.
pub const DEFAULT_SWITCH_WINDOW: f64 = 100.0;
/// Below this `S` the cap-riding rate `gamma / S` is replaced by `beta_max`.
pub const DIVIDE_GUARD: f64 = 1e-9;

/// Admissible and MRPI sets of one SIR-perfect scenario, as needed by the
/// switching law.
#[derive(Debug, Clone)]
pub struct SwitchingSets {
    pub admissible: Arc<ComputedSet>,
    pub mrpi: Arc<ComputedSet>,
}

impl SwitchingSets {
    pub fn new(sc: &Scenario, admissible: ComputedSet, mrpi: ComputedSet) -> Result<Self> {
        check_switching(sc, &admissible, &mrpi)?;
        Ok(SwitchingSets {
            admissible: Arc::new(admissible),
            mrpi: Arc::new(mrpi),
        })
    }
}

fn check_switching(sc: &Scenario, a: &ComputedSet, m: &ComputedSet) -> Result<()> {
    if sc.variant != ModelVariant::SirPerfect {
        return Err(Error::BadPolicy(format!(
            "the switching law needs the SIR_PERFECT variant, not {}",
            sc.variant
        )));
    }
    if a.set_kind != SetKind::Admissible || m.set_kind != SetKind::Mrpi {
        return Err(Error::BadPolicy("switching law needs an admissible and an MRPI set".into()));
    }
    if a.scenario != *sc || m.scenario != *sc {
        return Err(Error::BadPolicy("switching-law sets were computed for another scenario".into()));
    }
    Ok(())
}

/// Piecewise-constant bang signal: `levels[k]` holds on
/// `[switch_times[k-1], switch_times[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangSchedule {
    pub seed: Option<u64>,
    pub trial: Option<u64>,
    pub switch_times: Vec<f64>,
    pub levels: Vec<Bang>,
}

impl BangSchedule {
    pub fn constant(bang: Bang) -> Self {
        BangSchedule {
            seed: None,
            trial: None,
            switch_times: Vec::new(),
            levels: vec![bang],
        }
    }

    /// `segments` random corners of the active channels, separated by sorted
    /// uniform switch times in `[0, window]`.
    pub fn random(variant: ModelVariant, seed: u64, trial: u64, segments: usize, window: f64) -> Self {
        let mut rng = trial_rng(seed, trial);
        let segments = segments.max(1);
        let mut switch_times: Vec<f64> = (1..segments).map(|_| rng.gen_range(0.0..=window)).collect();
        switch_times.sort_by(f64::total_cmp);
        let levels = (0..segments)
            .map(|_| {
                let mut b = Bang::LOW;
                for &ch in Channel::active(variant) {
                    b.set(ch, if rng.gen_bool(0.5) { Level::Hi } else { Level::Lo });
                }
                b
            })
            .collect();
        BangSchedule {
            seed: Some(seed),
            trial: Some(trial),
            switch_times,
            levels,
        }
    }

    pub fn level_at(&self, t: f64) -> Bang {
        let k = self.switch_times.partition_point(|&s| s <= t);
        self.levels[k]
    }
}

/// Every corner of the active-channel box, as constant bang choices.
pub fn corner_bangs(variant: ModelVariant) -> Vec<Bang> {
    let chans = Channel::active(variant);
    (0..1usize << chans.len())
        .map(|mask| {
            let mut b = Bang::LOW;
            for (k, &ch) in chans.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    b.set(ch, Level::Hi);
                }
            }
            b
        })
        .collect()
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A rule mapping `(t, x)` to rates inside the scenario box.
#[derive(Debug, Clone)]
pub enum Policy {
    Constant(InputVec),
    /// Feedback laws on the controlled rates; the disturbance (gamma for SIR,
    /// eta for SEIR) is held at the given value.
    AffineFeedback { disturbance: f64 },
    SwitchingLaw(SwitchingSets),
    ExtremalBang(BangSchedule),
}

impl Policy {
    /// Constant rates. Omitted rates take the scenario's fixed value or, for
    /// an interval, its lower end.
    pub fn constant(sc: &Scenario, beta: f64, gamma: Option<f64>, eta: Option<f64>) -> Result<Policy> {
        let gamma = gamma.unwrap_or(sc.gamma.lo);
        let u = if sc.variant.is_seir() {
            InputVec::seir(beta, gamma, eta.unwrap_or(sc.eta_bounds().lo))
        } else {
            if eta.is_some() {
                return Err(Error::BadPolicy("eta given for an SIR variant".into()));
            }
            InputVec::sir(beta, gamma)
        };
        if !u.in_box(sc, 0.0) {
            return Err(Error::BadPolicy(format!("constant rates {u:?} lie outside the input box")));
        }
        Ok(Policy::Constant(u))
    }

    pub fn feedback(sc: &Scenario, disturbance: f64) -> Result<Policy> {
        let b = match sc.variant {
            ModelVariant::SirImperfect => sc.gamma,
            ModelVariant::SeirImperfect => sc.eta_bounds(),
            v => return Err(Error::BadPolicy(format!("feedback laws are not defined for {v}"))),
        };
        if !b.contains(disturbance, 0.0) {
            return Err(Error::BadPolicy(format!(
                "disturbance {disturbance} is outside [{}, {}]",
                b.lo, b.hi
            )));
        }
        Ok(Policy::AffineFeedback { disturbance })
    }

    /// Constant corner of the active channels (feedback rates stay feedback).
    pub fn corner(bang: Bang) -> Policy {
        Policy::ExtremalBang(BangSchedule::constant(bang))
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Constant(u) => match u.eta {
                Some(eta) => format!("constant(beta={},gamma={},eta={eta})", u.beta, u.gamma),
                None => format!("constant(beta={},gamma={})", u.beta, u.gamma),
            },
            Policy::AffineFeedback { disturbance } => format!("feedback(disturbance={disturbance})"),
            Policy::SwitchingLaw(_) => "switching".into(),
            Policy::ExtremalBang(s) => match (s.seed, s.trial) {
                (Some(seed), Some(trial)) => format!("extremal_bang(seed={seed},trial={trial})"),
                _ => format!("corner{:?}", s.levels[0]),
            },
        }
    }

    fn is_held(&self) -> bool {
        matches!(self, Policy::SwitchingLaw(_))
    }

    fn check(&self, sc: &Scenario) -> Result<()> {
        match self {
            Policy::Constant(u) if !u.in_box(sc, 0.0) => {
                Err(Error::BadPolicy(format!("constant rates {u:?} lie outside the input box")))
            }
            Policy::AffineFeedback { disturbance } => Policy::feedback(sc, *disturbance).map(|_| ()),
            Policy::SwitchingLaw(sets) => check_switching(sc, &sets.admissible, &sets.mrpi),
            Policy::ExtremalBang(s) if s.levels.len() != s.switch_times.len() + 1 => {
                Err(Error::BadPolicy("bang schedule needs one more level than switch times".into()))
            }
            _ => Ok(()),
        }
    }

    fn input(&self, sc: &Scenario, t: f64, x: &[f64]) -> InputVec {
        match self {
            Policy::Constant(u) => *u,
            Policy::AffineFeedback { disturbance } => {
                let i = x[x.len() - 1];
                let beta = beta_feedback_clamped(i, sc);
                if sc.variant.is_seir() {
                    InputVec::seir(beta, gamma_feedback_clamped(i, sc), *disturbance)
                } else {
                    InputVec::sir(beta, *disturbance)
                }
            }
            Policy::SwitchingLaw(sets) => law(x, &sets.admissible, &sets.mrpi, sc),
            Policy::ExtremalBang(s) => effective_input(sc, x, &s.level_at(t)),
        }
    }

    /// Largest infection rate and smallest removal rate the policy can emit.
    fn rate_envelope(&self, sc: &Scenario) -> (f64, f64) {
        match self {
            Policy::Constant(u) => (u.beta, u.gamma),
            Policy::AffineFeedback { disturbance } if !sc.variant.is_seir() => (sc.beta.hi, *disturbance),
            Policy::ExtremalBang(s) if sc.variant == ModelVariant::SirPerfect => {
                let beta = s.levels.iter().map(|b| b.beta.pick(sc.beta)).fold(sc.beta.lo, f64::max);
                (beta, sc.gamma.lo)
            }
            Policy::ExtremalBang(s) if sc.variant == ModelVariant::SirImperfect => {
                let gamma = s.levels.iter().map(|b| b.gamma.pick(sc.gamma)).fold(sc.gamma.hi, f64::min);
                (sc.beta.hi, gamma)
            }
            _ => (sc.beta.hi, sc.gamma.lo),
        }
    }

    fn with_disturbance(&self, sc: &Scenario, d: f64) -> Result<Policy> {
        match (self, sc.variant) {
            (Policy::AffineFeedback { .. }, _) => Policy::feedback(sc, d),
            (Policy::Constant(u), ModelVariant::SirImperfect) => Ok(Policy::Constant(InputVec { gamma: d, ..*u })),
            (Policy::Constant(u), ModelVariant::SeirImperfect) => Ok(Policy::Constant(InputVec { eta: Some(d), ..*u })),
            _ => Err(Error::BadPolicy(format!(
                "{} has no disturbance parameter to sample",
                self.label()
            ))),
        }
    }
}

/// Set-based intervention for SIR perfect scenarios:
///
/// * on the usable part: `beta = gamma / S`, which keeps `I` at the cap,
/// * inside either set: `beta_max`,
/// * on the barrier, or outside the admissible set: `beta_min`.
pub fn switching_law(state: &StateVec, admissible: &ComputedSet, mrpi: &ComputedSet, sc: &Scenario) -> Result<InputVec> {
    check_switching(sc, admissible, mrpi)?;
    if state.dim() != 2 {
        return Err(Error::BadState(format!("expected an (S, I) state, got {} components", state.dim())));
    }
    Ok(law(state.as_slice(), admissible, mrpi, sc))
}

fn law(x: &[f64], a: &ComputedSet, m: &ComputedSet, sc: &Scenario) -> InputVec {
    let gamma = sc.gamma.lo;
    let eps = a.tolerances.boundary_layer_eps;
    let (s, i) = (x[0], x[1]);
    let beta = |b: f64| InputVec::sir(b, gamma);
    let s_hi = match a.usable_part {
        Some(crate::analysis::UsablePart::Interval { s_hi, .. }) => s_hi,
        _ => 1.0 - sc.i_max,
    };
    if i >= sc.i_max - eps && s <= s_hi {
        if s < DIVIDE_GUARD {
            return beta(sc.beta.hi);
        }
        return beta(sc.beta.clamp(gamma / s));
    }
    let p = StateVec::from_components(x.to_vec());
    let ma = a.membership(&p);
    // The MRPI set lies inside the admissible one, so it only matters in the
    // admissible boundary layer.
    if ma.verdict == Verdict::Inside || (ma.verdict == Verdict::Boundary && m.membership(&p).verdict == Verdict::Inside)
    {
        return beta(sc.beta.hi);
    }
    match ma.verdict {
        Verdict::Boundary => match ma.nearest_part {
            Some(BoundaryPart::Barrier) | Some(BoundaryPart::UsablePart) => beta(sc.beta.lo),
            _ if ma.parity_inside == Some(true) => beta(sc.beta.hi),
            _ => beta(sc.beta.lo),
        },
        _ => beta(sc.beta.lo),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajSample {
    pub t: f64,
    pub state: StateVec,
    pub input: InputVec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajSample>,
    pub breached: bool,
    pub max_i: f64,
    pub first_breach_time: Option<f64>,
    /// Time reached; smaller than the requested horizon after an early stop.
    pub t_end: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVec {
        &self.samples.last().expect("trajectory has at least one sample").state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep every `record_every`-th step (the first and last are always kept).
    pub record_every: usize,
    pub stop_on_breach: bool,
    /// Stop once the cap provably cannot be breached any more.
    pub stop_when_settled: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            record_every: DEFAULT_RECORD_EVERY,
            stop_on_breach: false,
            stop_when_settled: false,
        }
    }
}

impl SimOptions {
    /// Settings for oracle runs: stop as soon as the verdict is known.
    pub fn oracle() -> Self {
        SimOptions {
            record_every: 100,
            stop_on_breach: true,
            stop_when_settled: true,
        }
    }
}

pub fn simulate(sc: &Scenario, policy: &Policy, x0: &StateVec, t_end: f64, tol: &Tolerances) -> Result<Trajectory> {
    simulate_with(sc, policy, x0, t_end, tol, &SimOptions::default())
}

pub fn simulate_with(
    sc: &Scenario,
    policy: &Policy,
    x0: &StateVec,
    t_end: f64,
    tol: &Tolerances,
    opts: &SimOptions,
) -> Result<Trajectory> {
    policy.check(sc)?;
    if !(0.0..=MAX_T_END).contains(&t_end) {
        return Err(Error::BadArgument(format!("t_end = {t_end} is outside [0, {MAX_T_END}]")));
    }
    if x0.dim() != sc.dim() || !x0.in_simplex(tol.geom_tol) {
        return Err(Error::BadState(format!("initial state {:?} is not in the simplex", x0.as_slice())));
    }
    let x = x0.as_slice();
    if sc.variant.is_seir() {
        run::<3>(sc, policy, [x[0], x[1], x[2]], t_end, tol, opts)
    } else {
        run::<2>(sc, policy, [x[0], x[1]], t_end, tol, opts)
    }
}

fn run<const N: usize>(
    sc: &Scenario,
    policy: &Policy,
    x0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let h = tol.step_h;
    let ii = N - 1;
    let thr = sc.i_max + tol.geom_tol;
    let (beta_hi, gamma_lo) = policy.rate_envelope(sc);
    let record_every = opts.record_every.max(1);
    let n_steps = if t_end > 0.0 { (t_end / h - 1e-9).ceil() as usize } else { 0 };
    let sample = |t: f64, y: &[f64; N]| TrajSample {
        t,
        state: StateVec::from_components(y.to_vec()),
        input: policy.input(sc, t, y),
    };
    let settled = |y: &[f64; N]| {
        let sum: f64 = y.iter().sum();
        let dormant = y[ii] <= 0.0 && (N == 2 || y[1] <= 0.0);
        // Once beta * S <= gamma, I falls (SIR) or E + I falls (SEIR) for good.
        let waning = y[0] * beta_hi <= gamma_lo;
        sum <= sc.i_max || dormant || (waning && (N == 2 || y[1] + y[2] <= sc.i_max))
    };

    let mut y = x0;
    let mut t = 0.0;
    let mut max_i = y[ii];
    let mut breach = if y[ii] > thr { Some(0.0) } else { None };
    let mut samples = vec![sample(0.0, &y)];
    let mut last_recorded = true;
    for k in 0..n_steps {
        if (opts.stop_on_breach && breach.is_some()) || (opts.stop_when_settled && breach.is_none() && settled(&y)) {
            break;
        }
        let t_next = if k + 1 == n_steps { t_end } else { (k + 1) as f64 * h };
        let hk = t_next - t;
        let held = policy.is_held().then(|| policy.input(sc, t, &y));
        let f = |tt: f64, yy: &[f64; N]| {
            let u = held.unwrap_or_else(|| policy.input(sc, tt, yy));
            let mut out = [0.0; N];
            vector_field(sc.variant, yy, &u, &mut out);
            out
        };
        let y_new = rk4_step(&f, t, &y, hk)?;
        if breach.is_none() && y_new[ii] > thr {
            let (_, hi) = bisect_root(|tau| Ok(rk4_step(&f, t, &y, tau)?[ii] - thr), 0.0, hk, tol.event_time_tol)?;
            breach = Some(t + hi);
        }
        max_i = max_i.max(y_new[ii]);
        y = y_new;
        t = t_next;
        last_recorded = (k + 1) % record_every == 0 || k + 1 == n_steps;
        if last_recorded {
            samples.push(sample(t, &y));
        }
    }
    if !last_recorded {
        samples.push(sample(t, &y));
    }
    Ok(Trajectory {
        samples,
        breached: max_i > thr,
        max_i,
        first_breach_time: breach,
        t_end: t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTrial {
    pub trial: u64,
    pub disturbance: f64,
    pub trajectory: Trajectory,
}

/// `n_trials` runs of `policy`, each with the disturbance rate (gamma for
/// SIR, eta for SEIR) drawn uniformly from its interval and held constant.
pub fn monte_carlo(
    sc: &Scenario,
    x0: &StateVec,
    policy: &Policy,
    n_trials: usize,
    seed: u64,
    t_end: f64,
    tol: &Tolerances,
) -> Result<Vec<McTrial>> {
    let b = match sc.variant {
        ModelVariant::SirImperfect => sc.gamma,
        ModelVariant::SeirImperfect => sc.eta_bounds(),
        v => {
            return Err(Error::BadArgument(format!(
                "Monte Carlo sweeps need an imperfect variant, not {v}"
            )))
        }
    };
    (0..n_trials as u64)
        .map(|trial| {
            let d = trial_rng(seed, trial).gen_range(b.lo..=b.hi);
            let p = policy.with_disturbance(sc, d)?;
            Ok(McTrial {
                trial,
                disturbance: d,
                trajectory: simulate(sc, &p, x0, t_end, tol)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub policy: String,
    pub seed: Option<u64>,
    pub trial: Option<u64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub point: StateVec,
    pub set_kind: SetKind,
    pub claimed: Verdict,
    pub n_trials: usize,
    /// What simulation says: some trial stays below the cap (admissible), or
    /// every trial does (MRPI).
    pub oracle_inside: bool,
    /// Always true for BOUNDARY and UNKNOWN claims, which are not checked.
    pub agree: bool,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub t_end: f64,
    pub segments: usize,
    pub switch_window: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            t_end: DEFAULT_T_END,
            segments: DEFAULT_SEGMENTS,
            switch_window: DEFAULT_SWITCH_WINDOW,
        }
    }
}

/// Checks a claimed verdict by simulation.
///
/// MRPI: `n_trials` random extremal bang signals plus every constant corner;
/// inside iff none breaches. Admissible: the most cautious constant corner,
/// then (SIR perfect, when `sets` is given) the switching law; inside iff
/// one of them avoids a breach.
#[allow(clippy::too_many_arguments)]
pub fn membership_oracle(
    sc: &Scenario,
    kind: SetKind,
    point: &StateVec,
    claimed: Verdict,
    n_trials: usize,
    seed: u64,
    sets: Option<&SwitchingSets>,
    tol: &Tolerances,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    if !sc.variant.supports(kind) {
        return Err(Error::BadSetKind(format!("{kind} is not defined for {}", sc.variant)));
    }
    if !point.in_constraint_set(sc.i_max, tol.geom_tol) || point.dim() != sc.dim() {
        return Err(Error::BadState(format!(
            "oracle point {:?} is outside the constrained space",
            point.as_slice()
        )));
    }
    let sim = SimOptions::oracle();
    let mut runs: Vec<(Policy, Option<u64>, Option<u64>)> = Vec::new();
    let oracle_inside;
    let mut witness = None;
    match kind {
        SetKind::Mrpi => {
            for bang in corner_bangs(sc.variant) {
                runs.push((Policy::corner(bang), None, None));
            }
            for trial in 0..n_trials as u64 {
                let s = BangSchedule::random(sc.variant, seed, trial, opts.segments, opts.switch_window);
                runs.push((Policy::ExtremalBang(s), Some(seed), Some(trial)));
            }
            let mut first = None;
            let mut inside = true;
            for (p, sd, tr) in runs {
                let traj = simulate_with(sc, &p, point, opts.t_end, tol, &sim)?;
                let breached = traj.breached;
                let ce = Counterexample {
                    policy: p.label(),
                    seed: sd,
                    trial: tr,
                    trajectory: traj,
                };
                if breached {
                    inside = false;
                    witness = Some(ce);
                    break;
                }
                first.get_or_insert(ce);
            }
            if inside {
                witness = first;
            }
            oracle_inside = inside;
        }
        SetKind::Admissible => {
            let mut cautious = Bang::LOW;
            cautious.set(Channel::Gamma, Level::Hi);
            let mut last = None;
            let mut inside = false;
            runs.push((Policy::corner(cautious), None, None));
            if let Some(sets) = sets {
                runs.push((Policy::SwitchingLaw(sets.clone()), None, None));
            }
            for (p, sd, tr) in runs {
                let traj = simulate_with(sc, &p, point, opts.t_end, tol, &sim)?;
                let breached = traj.breached;
                let ce = Counterexample {
                    policy: p.label(),
                    seed: sd,
                    trial: tr,
                    trajectory: traj,
                };
                last = Some(ce);
                if !breached {
                    inside = true;
                    break;
                }
            }
            witness = last;
            oracle_inside = inside;
        }
    }
    let agree = match claimed {
        Verdict::Inside => oracle_inside,
        Verdict::Outside => !oracle_inside,
        Verdict::Boundary | Verdict::Unknown => true,
    };
    Ok(OracleReport {
        point: point.clone(),
        set_kind: kind,
        claimed,
        n_trials,
        oracle_inside,
        agree,
        counterexample: if agree { None } else { witness },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub s: f64,
    pub i: f64,
    pub verdict: Verdict,
    pub distance: f64,
    pub oracle_inside: bool,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub set_kind: SetKind,
    pub grid: usize,
    pub cells: Vec<GridCell>,
    pub n_decisive: usize,
    pub n_agree: usize,
    /// Agreement over decisive cells; 1 when there are none.
    pub agreement: f64,
    /// Largest boundary distance among disagreeing cells (0 if none).
    pub max_disagreement_distance: f64,
}

/// Oracle check of every cell centre of an `n x n` grid over
/// `[0, 1] x [0, i_max]` that lies in the simplex (SIR only).
#[allow(clippy::too_many_arguments)]
pub fn oracle_grid(
    sc: &Scenario,
    set: &ComputedSet,
    sets: Option<&SwitchingSets>,
    n: usize,
    n_trials: usize,
    seed: u64,
    tol: &Tolerances,
    opts: &OracleOptions,
) -> Result<GridReport> {
    if sc.variant.is_seir() {
        return Err(Error::BadArgument("the grid oracle is two-dimensional (SIR variants only)".into()));
    }
    let mut cells = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let s = (a as f64 + 0.5) / n as f64;
            let i = (b as f64 + 0.5) / n as f64 * sc.i_max;
            if s + i > 1.0 {
                continue;
            }
            let p = StateVec::sir(s, i);
            let m = set.membership(&p);
            let cell_seed = seed.wrapping_add((a * n + b) as u64);
            let r = membership_oracle(sc, set.set_kind, &p, m.verdict, n_trials, cell_seed, sets, tol, opts)?;
            cells.push(GridCell {
                s,
                i,
                verdict: m.verdict,
                distance: m.distance_estimate,
                oracle_inside: r.oracle_inside,
                agree: r.agree,
            });
        }
    }
    let decisive: Vec<&GridCell> = cells.iter().filter(|c| c.verdict.is_decisive()).collect();
    let n_agree = decisive.iter().filter(|c| c.agree).count();
    let max_dis = decisive
        .iter()
        .filter(|c| !c.agree)
        .map(|c| c.distance)
        .fold(0.0, f64::max);
    Ok(GridReport {
        set_kind: set.set_kind,
        grid: n,
        n_decisive: decisive.len(),
        n_agree,
        agreement: if decisive.is_empty() {
            1.0
        } else {
            n_agree as f64 / decisive.len() as f64
        },
        max_disagreement_distance: max_dis,
        cells,
    })
}
