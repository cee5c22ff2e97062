//! Fixed-step RK4 with event location.
//!
//! Systems are fixed-size (`[f64; N]`) so the hot loop never allocates. The
//! barrier construction integrates the coupled (state, adjoint) system with
//! `N = 4` (SIR) or `N = 6` (SEIR); plain simulation uses `N = 2` or `3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::InputVec;
use crate::scenario::{StateVec, Tolerances};

/// |sigma| below this counts as zero.
pub const SIGMA_TOL: f64 = 1e-12;
/// Consecutive near-zero steps tolerated before reporting a singular arc.
pub const SINGULAR_STEPS: usize = 50;
pub const DEFAULT_RECORD_EVERY: usize = 10;

/// Faces of the constrained simplex. Face values are positive outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Face {
    /// `I = i_max`
    Cap,
    /// `S = 0`
    SZero,
    /// `E = 0` (SEIR only)
    EZero,
    /// `I = 0`
    IZero,
    /// `S + (E) + I = 1`
    Simplex,
}

impl Face {
    pub const SIR: [Face; 4] = [Face::Cap, Face::SZero, Face::IZero, Face::Simplex];
    pub const SEIR: [Face; 5] = [Face::Cap, Face::SZero, Face::EZero, Face::IZero, Face::Simplex];
}

/// Signed distance-like value of `x` relative to `face`; positive outside.
pub fn face_value(face: Face, x: &[f64], i_max: f64) -> f64 {
    let i = x[x.len() - 1];
    match face {
        Face::Cap => i - i_max,
        Face::SZero => -x[0],
        Face::EZero => {
            if x.len() == 3 {
                -x[1]
            } else {
                f64::NEG_INFINITY
            }
        }
        Face::IZero => -i,
        Face::Simplex => x.iter().sum::<f64>() - 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", tag = "kind", content = "id")]
pub enum EventKind {
    /// Sign change of switching functional number `k`.
    SignChange(usize),
    DomainExit(Face),
    IFloor,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    /// Locate the event by bisection. Unrefined events are reported at the
    /// end of the step on which they were detected.
    pub refine: bool,
}

impl EventSpec {
    pub fn refined(kind: EventKind) -> Self {
        EventSpec { kind, refine: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One recorded sample of a barrier integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: StateVec,
    pub adjoint: Vec<f64>,
    pub input: InputVec,
    pub switch_values: Vec<f64>,
}

/// A system that can be driven by [`integrate_until`].
pub trait Dynamics<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Raw value of switching functional `k`.
    fn switch_value(&self, _k: usize, _y: &[f64; N]) -> f64 {
        0.0
    }

    /// Sign the functional is expected to keep on the current segment.
    fn switch_sign(&self, _k: usize) -> f64 {
        1.0
    }

    fn face_value(&self, _face: Face, _y: &[f64; N]) -> f64 {
        f64::NEG_INFINITY
    }

    fn i_value(&self, _y: &[f64; N]) -> f64 {
        f64::INFINITY
    }

    /// Projection applied after every accepted step (adjoint renormalisation).
    fn normalize(&self, _y: &mut [f64; N]) {}
}

/// Classic fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { t: t + h })
    }
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<const N: usize> {
    /// `(t, y)` every `record_every` steps, always including the start and
    /// the terminal point.
    pub samples: Vec<(f64, [f64; N])>,
    pub event: EventKind,
    pub t_end: f64,
    pub y_end: [f64; N],
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub direction: Direction,
    pub record_every: usize,
    /// Overrides `tolerances.step_h` when set.
    pub step_h: Option<f64>,
    /// Time already elapsed on this curve; the horizon counts from `t0 - elapsed`.
    pub elapsed: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            direction: Direction::Forward,
            record_every: DEFAULT_RECORD_EVERY,
            step_h: None,
            elapsed: 0.0,
        }
    }
}

impl IntegrateOptions {
    pub fn backward() -> Self {
        IntegrateOptions {
            direction: Direction::Backward,
            ..Default::default()
        }
    }
}

// Positive when the event has fired.
fn event_value<const N: usize, D: Dynamics<N>>(sys: &D, kind: EventKind, y: &[f64; N], tol: &Tolerances) -> f64 {
    match kind {
        EventKind::SignChange(k) => -sys.switch_value(k, y) * sys.switch_sign(k),
        EventKind::DomainExit(face) => sys.face_value(face, y) - tol.geom_tol,
        EventKind::IFloor => tol.i_floor - sys.i_value(y),
        EventKind::Horizon => f64::NEG_INFINITY,
    }
}

/// Integrates until the first event in `events` fires (HORIZON is implicit).
///
/// Events detected on a step are located by bisecting the step length on the
/// event predicate; the earliest one wins. For SIGN_CHANGE the state returned
/// is just past the switch (new sign), for DOMAIN_EXIT and I_FLOOR just
/// before the crossing. Either way integration can be restarted from
/// `(t_end, y_end)`.
pub fn integrate_until<const N: usize, D: Dynamics<N>>(
    sys: &D,
    events: &[EventSpec],
    y0: [f64; N],
    t0: f64,
    opts: IntegrateOptions,
    tol: &Tolerances,
) -> Result<Outcome<N>> {
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { t: t0 });
    }
    let h = opts.step_h.unwrap_or(tol.step_h);
    let dir = opts.direction.sign();
    let record_every = opts.record_every.max(1);
    let mut samples = vec![(t0, y0)];

    // Events already active at the start (other than sign changes, which are
    // defined relative to the segment's expected sign).
    for ev in events {
        if matches!(ev.kind, EventKind::DomainExit(_) | EventKind::IFloor) && event_value(sys, ev.kind, &y0, tol) > 0.0 {
            return Ok(Outcome {
                samples,
                event: ev.kind,
                t_end: t0,
                y_end: y0,
            });
        }
    }

    let horizon = (tol.t_back_max - opts.elapsed).max(0.0);
    let mut t = t0;
    let mut y = y0;
    let mut steps = 0usize;
    let mut near_zero = vec![0usize; events.len()];
    let rhs = |t: f64, y: &[f64; N]| sys.rhs(t, y);

    loop {
        let done = (t - t0).abs();
        if done >= horizon * (1.0 - 1e-15) {
            if samples.last().map(|s| s.0) != Some(t) {
                samples.push((t, y));
            }
            return Ok(Outcome {
                samples,
                event: EventKind::Horizon,
                t_end: t,
                y_end: y,
            });
        }
        let len = h.min(horizon - done);
        let mut y1 = rk4_step(rhs, t, &y, dir * len)?;
        sys.normalize(&mut y1);

        // Earliest fired event on this step.
        let mut first: Option<(f64, EventKind, [f64; N])> = None;
        for ev in events {
            if ev.kind == EventKind::Horizon || event_value(sys, ev.kind, &y1, tol) <= 0.0 {
                continue;
            }
            let (tau, y_ev) = if ev.refine {
                locate(sys, ev.kind, t, &y, dir, len, tol)?
            } else {
                (len, y1)
            };
            if first.as_ref().map_or(true, |f| tau < f.0) {
                first = Some((tau, ev.kind, y_ev));
            }
        }
        if let Some((tau, kind, y_ev)) = first {
            let t_ev = t + dir * tau;
            samples.push((t_ev, y_ev));
            return Ok(Outcome {
                samples,
                event: kind,
                t_end: t_ev,
                y_end: y_ev,
            });
        }

        for (ev, count) in events.iter().zip(near_zero.iter_mut()) {
            if let EventKind::SignChange(k) = ev.kind {
                if sys.switch_value(k, &y1).abs() < SIGMA_TOL {
                    *count += 1;
                    if *count > SINGULAR_STEPS {
                        return Err(Error::SingularArc {
                            t: t + dir * len,
                            channel: format!("functional {k}"),
                        });
                    }
                } else {
                    *count = 0;
                }
            }
        }

        t += dir * len;
        y = y1;
        steps += 1;
        if steps % record_every == 0 {
            samples.push((t, y));
        }
    }
}

/// Bisects the sub-step length `tau` in `(0, len]` on the event predicate.
/// Returns the fired-side state for sign changes and the safe-side state for
/// the others.
fn locate<const N: usize, D: Dynamics<N>>(
    sys: &D,
    kind: EventKind,
    t: f64,
    y: &[f64; N],
    dir: f64,
    len: f64,
    tol: &Tolerances,
) -> Result<(f64, [f64; N])> {
    let sub = |tau: f64| -> Result<[f64; N]> {
        let mut out = rk4_step(|t, y| sys.rhs(t, y), t, y, dir * tau)?;
        sys.normalize(&mut out);
        Ok(out)
    };
    // Domain exits are located on the face itself (value 0) rather than on the
    // tolerance shell, unless the step started inside the shell already.
    let level = match kind {
        EventKind::DomainExit(face) => sys.face_value(face, y).max(0.0) - tol.geom_tol,
        _ => 0.0,
    };
    let fired = |v: &[f64; N]| event_value(sys, kind, v, tol) > level;

    let mut lo = 0.0;
    let mut hi = len;
    let mut y_lo = *y;
    let mut y_hi = sub(len)?;
    let time_tol = match kind {
        EventKind::SignChange(_) => tol.event_time_tol,
        _ => 0.0,
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= time_tol || mid <= lo || mid >= hi {
            break;
        }
        let y_mid = sub(mid)?;
        if fired(&y_mid) {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
            y_lo = y_mid;
        }
    }
    Ok(match kind {
        EventKind::SignChange(_) => (hi, y_hi),
        _ => (lo, y_lo),
    })
}

/// Locates the root of `g` on `[a, b]` by bisection, given `g(a) <= 0 < g(b)`.
/// Returns the bracket `(lo, hi)` once `hi - lo <= tol`.
pub fn bisect_root<F: FnMut(f64) -> Result<f64>>(mut g: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            break;
        }
        if g(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}
