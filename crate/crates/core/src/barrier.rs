//! Barrier curves, assembled sets and membership queries.
//!
//! A barrier curve starts at an ultimate-tangency point `z` on the cap with
//! adjoint `(0, .., 0, 1)` at `t = 0` and is integrated backward in time with
//! the extremal input re-selected at every switch. SIR sets are closed
//! polygons; SEIR sets are a triangulated barrier surface plus the usable
//! region of the cap, queried by ray parity.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, Classification, TangentSet, UsablePart};
use crate::error::{Error, Result};
use crate::geometry::{self, BoundaryPart, Mesh, MeshData, Polygon, PolygonData, P2, P3};
use crate::integrate::{
    self, Direction, Dynamics, EventKind, EventSpec, Face, IntegrateOptions, StepRecord, SIGMA_TOL,
};
use crate::models::{self, Bang, Channel, InputVec, Level, SwitchTag};
use crate::scenario::{ModelVariant, Scenario, SetKind, StateVec, Tolerances};

pub const DEFAULT_CURVES: usize = 30;
pub const DEFAULT_NODES: usize = 200;
/// Time between recorded curve samples. Fixed in time rather than in steps,
/// so curves computed at different step sizes share their sample times.
pub const RECORD_DT: f64 = 0.01;

fn record_stride(h: f64) -> usize {
    ((RECORD_DT / h).round() as usize).max(1)
}

/// Extremal choice at a state plus the sign each active functional is
/// expected to keep on the following (backward) segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub bang: Bang,
    pub input: InputVec,
    pub signs: Vec<f64>,
}

fn tag_value(tag: SwitchTag, lambda: &[f64]) -> f64 {
    match tag {
        SwitchTag::SigmaBeta => lambda[1] - lambda[0],
        SwitchTag::SigmaGammaSir => lambda[1],
        SwitchTag::SigmaGammaSeir => lambda[2],
        SwitchTag::SigmaEta => lambda[2] - lambda[1],
    }
}

/// Bang-bang selection with the zero rule: a functional that vanishes is
/// replaced by the sign it takes just before the current time, i.e. minus
/// the sign of its time derivative.
pub fn select(sc: &Scenario, kind: SetKind, x: &[f64], lambda: &[f64]) -> Result<Selection> {
    if !sc.variant.supports(kind) {
        return Err(Error::BadSetKind(format!("{kind} is not defined for {}", sc.variant)));
    }
    let channels = Channel::active(sc.variant);
    let mut bang = Bang::LOW;
    let mut signs = vec![0.0; channels.len()];
    let mut undecided = Vec::new();
    for (k, &ch) in channels.iter().enumerate() {
        let sigma = models::switch_value(sc.variant, kind, ch, lambda)?.value;
        if sigma.abs() > SIGMA_TOL {
            bang.set(ch, models::extremal_level(kind, ch, sigma));
            signs[k] = sigma.signum();
        } else {
            undecided.push(k);
        }
    }
    for k in undecided {
        let ch = channels[k];
        let u = models::effective_input(sc, x, &bang);
        let mut dl = [0.0; 3];
        models::adjoint_rhs(sc, x, lambda, &u, &mut dl);
        let tag = models::switch_tag(sc.variant, ch)?;
        let rate = tag_value(tag, &dl);
        if rate.abs() <= SIGMA_TOL {
            return Err(Error::SingularArc {
                t: 0.0,
                channel: ch.to_string(),
            });
        }
        let back = -rate.signum();
        bang.set(ch, models::extremal_level(kind, ch, back));
        signs[k] = back;
    }
    let input = models::effective_input(sc, x, &bang);
    Ok(Selection { bang, input, signs })
}

/// Extremal input at `(state, adjoint)`.
pub fn select_extremal_input(sc: &Scenario, kind: SetKind, state: &StateVec, adjoint: &[f64]) -> Result<InputVec> {
    Ok(select(sc, kind, state.as_slice(), adjoint)?.input)
}

/// Coupled (state, adjoint) system with a fixed bang-bang choice.
struct BarrierSystem<'a> {
    sc: &'a Scenario,
    bang: Bang,
    tags: Vec<SwitchTag>,
    signs: Vec<f64>,
}

impl<const N: usize> Dynamics<N> for BarrierSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64; N]) -> [f64; N] {
        let d = N / 2;
        let (x, l) = y.split_at(d);
        let u = models::effective_input(self.sc, x, &self.bang);
        let mut out = [0.0; N];
        let (fx, fl) = out.split_at_mut(d);
        models::vector_field(self.sc.variant, x, &u, fx);
        models::adjoint_rhs(self.sc, x, l, &u, fl);
        out
    }

    fn switch_value(&self, k: usize, y: &[f64; N]) -> f64 {
        tag_value(self.tags[k], &y[N / 2..])
    }

    fn switch_sign(&self, k: usize) -> f64 {
        self.signs[k]
    }

    fn face_value(&self, face: Face, y: &[f64; N]) -> f64 {
        integrate::face_value(face, &y[..N / 2], self.sc.i_max)
    }

    fn i_value(&self, y: &[f64; N]) -> f64 {
        y[N / 2 - 1]
    }

    fn normalize(&self, y: &mut [f64; N]) {
        let l = &mut y[N / 2..];
        let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            l.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchTime {
    pub t: f64,
    pub channel: Channel,
    /// Level on the side nearer the tangent point.
    pub from: Level,
    /// Level further back in time.
    pub to: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCurve {
    pub variant: ModelVariant,
    pub set_kind: SetKind,
    pub tangent_point: StateVec,
    /// Ordered by decreasing `t`, starting at the tangent point (`t = 0`).
    pub samples: Vec<StepRecord>,
    pub termination: EventKind,
    pub switch_times: Vec<SwitchTime>,
    /// Stopped early because two switches came closer than
    /// `10 * event_time_tol`.
    pub truncated: bool,
    pub step_h: f64,
}

impl BarrierCurve {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn end_state(&self) -> &StateVec {
        &self.samples.last().expect("curve has samples").state
    }

    /// Largest `|lambda^T f|` over the samples, with unit adjoint.
    pub fn max_hamiltonian(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let n = s.adjoint.iter().map(|v| v * v).sum::<f64>().sqrt();
                (models::hamiltonian(self.variant, s.state.as_slice(), &s.adjoint, &s.input) / n).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `|L_f g|` at the tangent point.
    pub fn tangency_residual(&self) -> f64 {
        let s = &self.samples[0];
        models::lie_derivative_g(self.variant, s.state.as_slice(), &s.input).abs()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.state.as_slice())
    }

    pub fn switches_on(&self, ch: Channel) -> Vec<&SwitchTime> {
        self.switch_times.iter().filter(|s| s.channel == ch).collect()
    }
}

/// Backward integration from `tangent_point` at the configured step.
pub fn compute_barrier_curve(sc: &Scenario, kind: SetKind, tangent_point: &StateVec, tol: &Tolerances) -> Result<BarrierCurve> {
    if tangent_point.dim() != sc.dim() {
        return Err(Error::BadState(format!(
            "tangent point has {} components, {} needs {}",
            tangent_point.dim(),
            sc.variant,
            sc.dim()
        )));
    }
    if sc.variant.is_seir() {
        run_curve::<6>(sc, kind, tangent_point, tol)
    } else {
        run_curve::<4>(sc, kind, tangent_point, tol)
    }
}

/// As [`compute_barrier_curve`], retrying once with `step_h / 10` on
/// `INVARIANT_BREACH`.
pub fn compute_barrier_curve_with_retry(
    sc: &Scenario,
    kind: SetKind,
    tangent_point: &StateVec,
    tol: &Tolerances,
) -> Result<BarrierCurve> {
    match compute_barrier_curve(sc, kind, tangent_point, tol) {
        Err(Error::InvariantBreach { .. }) => {
            let fine = Tolerances {
                step_h: tol.step_h / 10.0,
                ..*tol
            };
            compute_barrier_curve(sc, kind, tangent_point, &fine)
        }
        other => other,
    }
}

fn run_curve<const N: usize>(sc: &Scenario, kind: SetKind, z: &StateVec, tol: &Tolerances) -> Result<BarrierCurve> {
    let d = N / 2;
    let channels = Channel::active(sc.variant);
    let tags: Vec<SwitchTag> = channels
        .iter()
        .map(|&ch| models::switch_tag(sc.variant, ch))
        .collect::<Result<_>>()?;

    let mut events: Vec<EventSpec> = (0..channels.len())
        .map(|k| EventSpec::refined(EventKind::SignChange(k)))
        .collect();
    let faces: &[Face] = if d == 3 { &Face::SEIR } else { &Face::SIR };
    for &f in faces {
        if f != Face::IZero {
            events.push(EventSpec::refined(EventKind::DomainExit(f)));
        }
    }
    events.push(EventSpec::refined(EventKind::IFloor));

    let mut y = [0.0; N];
    y[..d].copy_from_slice(z.as_slice());
    y[N - 1] = 1.0;
    let mut t = 0.0;
    let mut samples: Vec<StepRecord> = Vec::new();
    let mut switch_times: Vec<SwitchTime> = Vec::new();
    let mut prev: Option<Selection> = None;
    let mut truncated = false;
    let mut min_i = z.i();

    let termination = loop {
        let mut sel = select(sc, kind, &y[..d], &y[d..]).map_err(|e| match e {
            Error::SingularArc { channel, .. } => Error::SingularArc { t, channel },
            other => other,
        })?;
        if let (Some(p), Some(last)) = (&prev, switch_times.last()) {
            // Force the switching channel to flip even if the functional sits
            // on zero at the restart point.
            let k = channels.iter().position(|c| *c == last.channel).unwrap();
            if sel.bang.get(last.channel) == p.bang.get(last.channel) {
                let flipped = match p.bang.get(last.channel) {
                    Level::Lo => Level::Hi,
                    Level::Hi => Level::Lo,
                };
                sel.bang.set(last.channel, flipped);
                sel.signs[k] = -p.signs[k];
                sel.input = models::effective_input(sc, &y[..d], &sel.bang);
            }
            switch_times.last_mut().unwrap().to = sel.bang.get(last.channel);
        }
        let sys = BarrierSystem {
            sc,
            bang: sel.bang,
            tags: tags.clone(),
            signs: sel.signs.clone(),
        };
        let opts = IntegrateOptions {
            direction: Direction::Backward,
            elapsed: -t,
            record_every: record_stride(tol.step_h),
            ..Default::default()
        };
        let out = integrate::integrate_until(&sys, &events, y, t, opts, tol)?;
        let skip = usize::from(!samples.is_empty());
        for (ts, ys) in &out.samples[skip..] {
            let x = &ys[..d];
            min_i = min_i.min(x[d - 1]);
            samples.push(StepRecord {
                t: *ts,
                state: StateVec::from_components(x.to_vec()),
                adjoint: ys[d..].to_vec(),
                input: models::effective_input(sc, x, &sel.bang),
                switch_values: tags.iter().map(|&g| tag_value(g, &ys[d..])).collect(),
            });
        }
        t = out.t_end;
        y = out.y_end;

        match out.event {
            EventKind::SignChange(k) => {
                let ch = channels[k];
                if let Some(last) = switch_times.last() {
                    if (last.t - t).abs() <= 10.0 * tol.event_time_tol {
                        truncated = true;
                        break out.event;
                    }
                }
                switch_times.push(SwitchTime {
                    t,
                    channel: ch,
                    from: sel.bang.get(ch),
                    to: sel.bang.get(ch),
                });
                prev = Some(sel);
            }
            EventKind::DomainExit(Face::Cap) if min_i >= sc.i_max - tol.geom_tol => {
                return Err(Error::InvariantBreach { t, i: y[d - 1] });
            }
            other => break other,
        }
    };

    Ok(BarrierCurve {
        variant: sc.variant,
        set_kind: kind,
        tangent_point: z.clone(),
        samples,
        termination,
        switch_times,
        truncated,
        step_h: tol.step_h,
    })
}

/// Verdict of a membership query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Inside,
    Outside,
    Boundary,
    Unknown,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Inside => "INSIDE",
            Verdict::Outside => "OUTSIDE",
            Verdict::Boundary => "BOUNDARY",
            Verdict::Unknown => "UNKNOWN",
        }
    }

    pub fn is_decisive(self) -> bool {
        matches!(self, Verdict::Inside | Verdict::Outside)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub verdict: Verdict,
    /// Distance to the nearest boundary primitive; infinite for the trivial
    /// set and for points outside the constrained space.
    pub distance_estimate: f64,
    pub nearest_part: Option<BoundaryPart>,
    /// Raw parity result, also reported for BOUNDARY verdicts.
    pub parity_inside: Option<bool>,
}

/// Short record of a curve kept in `set.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub tangent_point: StateVec,
    pub termination: EventKind,
    pub end_state: StateVec,
    pub t_end: f64,
    pub n_samples: usize,
    pub switch_times: Vec<SwitchTime>,
    pub truncated: bool,
    pub step_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

impl From<&BarrierCurve> for CurveSummary {
    fn from(c: &BarrierCurve) -> Self {
        CurveSummary {
            tangent_point: c.tangent_point.clone(),
            termination: c.termination,
            end_state: c.end_state().clone(),
            t_end: c.t_end(),
            n_samples: c.samples.len(),
            switch_times: c.switch_times.clone(),
            truncated: c.truncated,
            step_h: c.step_h,
            file: None,
        }
    }
}

/// Analytic pieces of the boundary that are never integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialSegment {
    pub name: String,
    pub points: Vec<Vec<f64>>,
}

fn special_segments(sc: &Scenario) -> Vec<SpecialSegment> {
    if sc.variant.is_seir() {
        vec![
            SpecialSegment {
                name: "equilibria E=0,I=0".into(),
                points: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            },
            SpecialSegment {
                name: "S=0,E=0".into(),
                points: vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, sc.i_max]],
            },
        ]
    } else {
        vec![
            SpecialSegment {
                name: "axis I=0".into(),
                points: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            },
            SpecialSegment {
                name: "S=0".into(),
                points: vec![vec![0.0, 0.0], vec![0.0, sc.i_max]],
            },
        ]
    }
}

/// An assembled admissible set or MRPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedSet {
    pub set_kind: SetKind,
    pub scenario: Scenario,
    pub classification: Classification,
    /// The set is all of the constrained space.
    pub trivial: bool,
    pub usable_part: Option<UsablePart>,
    pub tangent_set: Option<TangentSet>,
    pub special_segments: Vec<SpecialSegment>,
    pub curve_summaries: Vec<CurveSummary>,
    /// SIR: closed boundary polygon in the `(S, I)` plane.
    pub boundary: Option<Polygon>,
    /// SEIR: barrier surface.
    pub mesh: Option<Mesh>,
    /// SEIR: usable region in the `(S, E)` coordinates of the cap,
    /// counter-clockwise.
    pub usable_polygon: Vec<P2>,
    /// SEIR: parts of the usable region roofing a pocket that barrier curves
    /// enclose by returning to the cap. They are not part of the set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cap_pockets: Vec<Vec<P2>>,
    pub tolerances: Tolerances,
    /// Full curves; not serialized (written as separate files).
    #[serde(skip)]
    pub curves: Vec<BarrierCurve>,
}

/// Assembles the set with `n_curves` SEIR curves (ignored for SIR) and the
/// default resampling grid.
pub fn assemble_set(sc: &Scenario, kind: SetKind, n_curves: usize, tol: &Tolerances) -> Result<ComputedSet> {
    assemble_set_with(sc, kind, n_curves, DEFAULT_NODES, tol)
}

pub fn assemble_set_with(
    sc: &Scenario,
    kind: SetKind,
    n_curves: usize,
    n_nodes: usize,
    tol: &Tolerances,
) -> Result<ComputedSet> {
    if !sc.variant.supports(kind) {
        return Err(Error::BadSetKind(format!("{kind} is not defined for {}", sc.variant)));
    }
    let classification = analysis::classify(sc);
    let mut set = ComputedSet {
        set_kind: kind,
        scenario: sc.clone(),
        trivial: classification.is_trivial(kind),
        classification,
        usable_part: None,
        tangent_set: None,
        special_segments: special_segments(sc),
        curve_summaries: Vec::new(),
        boundary: None,
        mesh: None,
        usable_polygon: Vec::new(),
        cap_pockets: Vec::new(),
        tolerances: *tol,
        curves: Vec::new(),
    };
    if set.trivial {
        return Ok(set);
    }
    let usable = analysis::usable_part(sc, kind)?;
    let ts = analysis::filtered_tangent_set(sc, kind)?;
    let n = if sc.variant.is_seir() { n_curves.max(2) } else { 1 };
    let curves = ts
        .points(n)
        .iter()
        .map(|z| compute_barrier_curve_with_retry(sc, kind, z, tol))
        .collect::<Result<Vec<_>>>()?;
    if sc.variant.is_seir() {
        set.mesh = Some(build_mesh(&mesh_curves(sc, kind, tol, &ts, &curves), n_nodes));
        set.usable_polygon = usable_polygon(&usable);
        set.cap_pockets = cap_pockets(sc, kind, tol, &curves, &set.usable_polygon);
    } else {
        set.boundary = Some(build_polygon(sc, &curves[0])?);
    }
    set.curve_summaries = curves.iter().map(CurveSummary::from).collect();
    set.usable_part = Some(usable);
    set.tangent_set = Some(ts);
    set.curves = curves;
    Ok(set)
}

/// The reported curves plus one from the lower end of the tangent segment,
/// which closes the surface against the `S = 0` face.
fn mesh_curves(
    sc: &Scenario,
    kind: SetKind,
    tol: &Tolerances,
    ts: &TangentSet,
    curves: &[BarrierCurve],
) -> Vec<BarrierCurve> {
    let mut out = Vec::with_capacity(curves.len() + 1);
    if let TangentSet::Segment { z1_lo, z2, i_max, .. } = ts {
        if let Ok(c) = compute_barrier_curve(sc, kind, &StateVec::seir(*z1_lo, *z2, *i_max), tol) {
            if c.samples.len() >= 2 {
                out.push(c);
            }
        }
    }
    out.extend(curves.iter().cloned());
    out
}

fn build_polygon(sc: &Scenario, curve: &BarrierCurve) -> Result<Polygon> {
    let i_max = sc.i_max;
    let mut v: Vec<P2> = vec![[0.0, 0.0], [0.0, i_max]];
    let mut parts = vec![BoundaryPart::SZero, BoundaryPart::UsablePart];
    for s in &curve.samples {
        v.push([s.state.s(), s.state.i()]);
        parts.push(BoundaryPart::Barrier);
    }
    let end = *v.last().unwrap();
    match curve.termination {
        EventKind::DomainExit(Face::Simplex) => {
            v.push([1.0, 0.0]);
            *parts.last_mut().unwrap() = BoundaryPart::SimplexFace;
            parts.push(BoundaryPart::Axis);
        }
        EventKind::DomainExit(Face::SZero) => {
            *parts.last_mut().unwrap() = BoundaryPart::SZero;
        }
        EventKind::DomainExit(Face::Cap) | EventKind::DomainExit(Face::EZero) => {
            return Err(Error::Domain(format!(
                "SIR barrier ended on {:?}; cannot close the boundary",
                curve.termination
            )));
        }
        _ => {
            // I_FLOOR, HORIZON or a truncated curve: drop to the axis.
            v.push([end[0], 0.0]);
            parts.push(BoundaryPart::Axis);
        }
    }
    Ok(Polygon::new(PolygonData {
        vertices: v,
        parts,
        extra: vec![([0.0, 0.0], [1.0, 0.0], BoundaryPart::Axis)],
    }))
}

fn build_mesh(curves: &[BarrierCurve], n_nodes: usize) -> Mesh {
    let n_nodes = n_nodes.max(2);
    // (S, E, I, l1, l2, l3) resampled by state arc length.
    let grids: Vec<Vec<[f64; 6]>> = curves
        .iter()
        .map(|c| {
            let pts: Vec<[f64; 6]> = c
                .samples
                .iter()
                .map(|s| {
                    let x = s.state.as_slice();
                    [x[0], x[1], x[2], s.adjoint[0], s.adjoint[1], s.adjoint[2]]
                })
                .collect();
            geometry::resample_by_prefix(&pts, n_nodes, 3)
        })
        .collect();
    let mut nodes = Vec::with_capacity(grids.len() * n_nodes);
    for g in &grids {
        nodes.extend(g.iter().map(|p| [p[0], p[1], p[2]]));
    }
    let id = |k: usize, j: usize| (k * n_nodes + j) as u32;
    let mut triangles = Vec::new();
    let mut normals = Vec::new();
    for k in 0..grids.len().saturating_sub(1) {
        for j in 0..n_nodes - 1 {
            for tri in [
                [id(k, j), id(k + 1, j), id(k + 1, j + 1)],
                [id(k, j), id(k + 1, j + 1), id(k, j + 1)],
            ] {
                let [a, b, c] = tri.map(|v| nodes[v as usize]);
                let nrm = geometry::cross3(geometry::sub3(b, a), geometry::sub3(c, a));
                let len = geometry::norm3(nrm);
                if !(len > 0.0) {
                    continue;
                }
                // The adjoint is an outward normal of the barrier.
                let lam: P3 = tri
                    .iter()
                    .map(|&v| {
                        let (kk, jj) = (v as usize / n_nodes, v as usize % n_nodes);
                        let g = grids[kk][jj];
                        [g[3], g[4], g[5]]
                    })
                    .fold([0.0; 3], |acc, l| [acc[0] + l[0], acc[1] + l[1], acc[2] + l[2]]);
                let sign = if geometry::dot3(nrm, lam) < 0.0 { -1.0 } else { 1.0 };
                triangles.push(tri);
                normals.push(nrm.map(|c| sign * c / len));
            }
        }
    }
    Mesh::new(MeshData {
        nodes,
        triangles,
        normals,
    })
}

/// Bisection steps toward the edge of a run of cap-returning curves.
const POCKET_BISECTIONS: usize = 40;

/// Parts of the usable region cut off by runs of consecutive curves that end
/// back on the cap. Each pocket is bounded by the re-hit points of its run,
/// extended by bisection on the tangent abscissa toward each neighbour that
/// misses the cap, and by the stretch of the usable outline on the far side.
fn cap_pockets(sc: &Scenario, kind: SetKind, tol: &Tolerances, curves: &[BarrierCurve], outline: &[P2]) -> Vec<Vec<P2>> {
    let on_cap = |t: EventKind| t == EventKind::DomainExit(Face::Cap);
    let mut out = Vec::new();
    let mut k = 0;
    while k < curves.len() {
        if !on_cap(curves[k].termination) {
            k += 1;
            continue;
        }
        let start = k;
        while k < curves.len() && on_cap(curves[k].termination) {
            k += 1;
        }
        if k - start < 2 || outline.len() < 3 {
            continue;
        }
        let mut poly = Vec::new();
        if start > 0 {
            poly.extend(rehit_edge(sc, kind, tol, &curves[start - 1], &curves[start]));
        }
        poly.extend(curves[start..k].iter().map(|c| cap_se(c.end_state())));
        if k < curves.len() {
            let mut side = rehit_edge(sc, kind, tol, &curves[k], &curves[k - 1]);
            side.reverse();
            poly.extend(side);
        }
        let (first, last) = (poly[0], *poly.last().unwrap());
        poly.extend(outline_path(outline, last, first));
        out.push(poly);
    }
    out
}

fn cap_se(x: &StateVec) -> P2 {
    [x.s(), x.e().unwrap_or(0.0)]
}

/// Re-hit points of curves between a tangent point whose curve misses the cap
/// and one whose curve returns to it, ordered from the miss side toward the
/// hit side and converging on the edge of the returning family.
fn rehit_edge(sc: &Scenario, kind: SetKind, tol: &Tolerances, miss: &BarrierCurve, hit: &BarrierCurve) -> Vec<P2> {
    let (a, b) = (miss.tangent_point.as_slice(), hit.tangent_point.as_slice());
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut found: Vec<(f64, P2)> = Vec::new();
    for _ in 0..POCKET_BISECTIONS {
        let w = 0.5 * (lo + hi);
        let z = StateVec::seir(a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1]), a[2] + w * (b[2] - a[2]));
        match compute_barrier_curve(sc, kind, &z, tol) {
            Ok(c) if c.termination == EventKind::DomainExit(Face::Cap) => {
                found.push((w, cap_se(c.end_state())));
                hi = w;
            }
            _ => lo = w,
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    found.into_iter().map(|(_, p)| p).collect()
}

/// Outline vertices strictly between the projections of `from` and `to`,
/// bracketed by the projections themselves, along the shorter way round.
fn outline_path(outline: &[P2], from: P2, to: P2) -> Vec<P2> {
    let n = outline.len();
    let seg_len = |i: usize| {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    };
    let total: f64 = (0..n).map(seg_len).sum();
    // (arc-length position, projected point)
    let project = |p: P2| {
        let mut best = (f64::INFINITY, 0.0, p);
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = (outline[i], outline[(i + 1) % n]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 {
                best = (d, acc + t * seg_len(i), q);
            }
            acc += seg_len(i);
        }
        (best.1, best.2)
    };
    let (t0, q0) = project(from);
    let (t1, q1) = project(to);
    let forward = (t1 - t0).rem_euclid(total) <= total / 2.0;
    let mut corners: Vec<(f64, P2)> = Vec::new();
    let mut acc = 0.0;
    for (i, v) in outline.iter().enumerate() {
        corners.push((acc, *v));
        acc += seg_len(i);
    }
    let ahead = |t: f64| if forward { (t - t0).rem_euclid(total) } else { (t0 - t).rem_euclid(total) };
    let span = ahead(t1);
    let mut mid: Vec<(f64, P2)> = corners
        .into_iter()
        .map(|(t, v)| (ahead(t), v))
        .filter(|(a, _)| *a > 0.0 && *a < span)
        .collect();
    mid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut path = vec![q0];
    path.extend(mid.into_iter().map(|(_, v)| v));
    path.push(q1);
    path
}

fn polygon_contains(p: P2, poly: &[P2]) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            inside = !inside;
        }
    }
    inside
}

fn usable_polygon(u: &UsablePart) -> Vec<P2> {
    match u {
        UsablePart::Interval { .. } => Vec::new(),
        UsablePart::Region { s_max, e_star, .. } => {
            if *e_star >= *s_max {
                vec![[0.0, 0.0], [*s_max, 0.0], [0.0, *s_max]]
            } else {
                vec![[0.0, 0.0], [*s_max, 0.0], [s_max - e_star, *e_star], [0.0, *e_star]]
            }
        }
    }
}

/// Retries of a SEIR ray before answering UNKNOWN.
const RAY_RETRIES: usize = 3;
/// Barycentric margin under which a mesh hit counts as grazing an edge.
const RAY_AMBIGUITY: f64 = 1e-6;

impl ComputedSet {
    /// Membership of `point`, which should lie in the constrained space.
    pub fn membership(&self, point: &StateVec) -> Membership {
        let tol = &self.tolerances;
        let sc = &self.scenario;
        let outside = Membership {
            verdict: Verdict::Outside,
            distance_estimate: f64::INFINITY,
            nearest_part: None,
            parity_inside: None,
        };
        if point.dim() != sc.dim() || !point.in_constraint_set(sc.i_max, tol.geom_tol) {
            return outside;
        }
        if self.trivial {
            return Membership {
                verdict: Verdict::Inside,
                distance_estimate: f64::INFINITY,
                nearest_part: None,
                parity_inside: Some(true),
            };
        }
        if let Some(poly) = &self.boundary {
            let p = [point.s(), point.i()];
            let near = poly.nearest(p);
            let inside = poly.contains(p);
            let verdict = if near.distance <= tol.boundary_layer_eps {
                Verdict::Boundary
            } else if inside {
                Verdict::Inside
            } else {
                Verdict::Outside
            };
            return Membership {
                verdict,
                distance_estimate: near.distance,
                nearest_part: Some(near.part),
                parity_inside: Some(inside),
            };
        }
        self.membership_seir(point.as_slice())
    }

    fn membership_seir(&self, x: &[f64]) -> Membership {
        let tol = &self.tolerances;
        let i_max = self.scenario.i_max;
        let p: P3 = [x[0], x[1], x[2]];
        let d_mesh = self.mesh.as_ref().map_or(f64::INFINITY, |m| m.distance(p));
        let d_plane = geometry::convex_polygon_distance([p[0], p[1]], &self.usable_polygon);
        let d_usable = ((i_max - p[2]).powi(2) + d_plane * d_plane).sqrt();
        let (distance, part) = if d_mesh <= d_usable {
            (d_mesh, BoundaryPart::Barrier)
        } else {
            (d_usable, BoundaryPart::UsablePart)
        };
        let sum = p[0] + p[1] + p[2];
        let parity = if sum < i_max { Some(true) } else { self.ray_parity(p, sum) };
        let verdict = if distance <= tol.boundary_layer_eps {
            Verdict::Boundary
        } else {
            match parity {
                Some(true) => Verdict::Inside,
                Some(false) => Verdict::Outside,
                None => Verdict::Unknown,
            }
        };
        Membership {
            verdict,
            distance_estimate: distance,
            nearest_part: Some(part),
            parity_inside: parity,
        }
    }

    /// Walks from `p` toward the `I` axis at constant `S + E + I` until the
    /// cap. The end point's membership in the usable region, flipped once
    /// per barrier crossing, gives the verdict.
    fn ray_parity(&self, p: P3, sum: f64) -> Option<bool> {
        let i_max = self.scenario.i_max;
        for attempt in 0..=RAY_RETRIES {
            // Deterministic perturbation of the target on retries.
            let (ds, de) = match attempt {
                0 => (0.0, 0.0),
                k => {
                    let k = k as f64;
                    let room = (sum - i_max).max(0.0);
                    (room * 0.013 * k, room * 0.029 * k)
                }
            };
            let v: P3 = [ds, de, sum - ds - de];
            let q = if p[2] >= i_max || v[2] <= p[2] {
                p
            } else {
                let s = ((i_max - p[2]) / (v[2] - p[2])).clamp(0.0, 1.0);
                [p[0] + s * (v[0] - p[0]), p[1] + s * (v[1] - p[1]), i_max]
            };
            let q2 = [q[0], q[1]];
            let q_dist = geometry::convex_polygon_distance(q2, &self.usable_polygon);
            let in_pocket = self.cap_pockets.iter().any(|poly| polygon_contains(q2, poly));
            let q_in = q_dist == 0.0 && !in_pocket;
            // Near the outline of the usable region or of a pocket the end
            // point is unreliable.
            let pocket_gap = self
                .cap_pockets
                .iter()
                .map(|poly| polygon_edge_distance(q2, poly))
                .fold(f64::INFINITY, f64::min);
            let edge_gap = if q_dist == 0.0 {
                polygon_edge_distance(q2, &self.usable_polygon)
            } else {
                q_dist
            }
            .min(pocket_gap);
            if edge_gap < 1e-9 {
                continue;
            }
            let crossings = match &self.mesh {
                Some(m) if q != p => m.crossings(p, q, RAY_AMBIGUITY),
                _ => geometry::Crossings {
                    count: 0,
                    ambiguous: false,
                },
            };
            if crossings.ambiguous {
                continue;
            }
            return Some(q_in ^ (crossings.count % 2 == 1));
        }
        None
    }

    /// Outward normal of the barrier at curve sample `j` of `curve` (SIR),
    /// i.e. the unit adjoint.
    pub fn sir_normal(curve: &BarrierCurve, j: usize) -> P2 {
        let l = &curve.samples[j].adjoint;
        let n = (l[0] * l[0] + l[1] * l[1]).sqrt();
        [l[0] / n, l[1] / n]
    }
}

fn polygon_edge_distance(p: P2, poly: &[P2]) -> f64 {
    (0..poly.len())
        .map(|i| geometry::segment_distance2(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}
