//! Acceptance suite. Each criterion prints one `CRITERION n PASS|FAIL` line
//! (written past the test harness capture so it shows in plain
//! `cargo test` output) and then asserts.

use std::io::Write;

use epibarrier::analysis::{classify, filtered_tangent_set, ClassTag, TangentSet};
use epibarrier::barrier::{assemble_set, compute_barrier_curve, BarrierCurve, ComputedSet};
use epibarrier::geometry::resample_arc_length;
use epibarrier::integrate::EventKind;
use epibarrier::models::{Channel, Level};
use epibarrier::policy::{monte_carlo, oracle_grid, simulate, OracleOptions, Policy, SwitchingSets};
use epibarrier::{Scenario, SetKind, StateVec, Tolerances};

fn report(n: u32, ok: bool, detail: &str) {
    let line = format!("CRITERION {n:>2} {}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn sir(i_max: f64) -> Scenario {
    Scenario::sir_perfect(0.5, (0.6, 0.8), i_max).unwrap()
}

fn sir_imperfect() -> Scenario {
    Scenario::sir_imperfect((0.6, 0.8), (0.3, 0.5), 0.2).unwrap()
}

fn seir(i_max: f64) -> Scenario {
    Scenario::seir_perfect((0.8, 1.0), (0.2, 1.0 / 3.0), 0.2, i_max).unwrap()
}

fn seir_imperfect() -> Scenario {
    Scenario::seir_imperfect((0.8, 1.0), (0.2, 1.0 / 3.0), (1.0 / 7.0, 0.2), 0.1).unwrap()
}

/// Every non-trivial set of the worked configurations.
fn all_sets() -> Vec<(String, ComputedSet)> {
    let tol = Tolerances::default();
    let configs = [
        ("SIR I_max=0.02", sir(0.02)),
        ("SIR I_max=0.15", sir(0.15)),
        ("SIR I_max=0.4", sir(0.4)),
        ("SIR imperfect", sir_imperfect()),
        ("SEIR I_max=0.4", seir(0.4)),
        ("SEIR I_max=0.3", seir(0.3)),
        ("SEIR imperfect", seir_imperfect()),
    ];
    let mut out = Vec::new();
    for (name, sc) in configs {
        for kind in [SetKind::Admissible, SetKind::Mrpi] {
            if !sc.variant.supports(kind) {
                continue;
            }
            let set = assemble_set(&sc, kind, 30, &tol).unwrap();
            if !set.trivial {
                out.push((format!("{name} {kind}"), set));
            }
        }
    }
    out
}

#[test]
fn criterion_01_classification() {
    let cases = [
        ("SIR 0.4", sir(0.4), ClassTag::AllEqualG),
        ("SIR 0.02", sir(0.02), ClassTag::BothProper),
        ("SIR 0.15", sir(0.15), ClassTag::BothProper),
        ("SIR imperfect", sir_imperfect(), ClassTag::MProper),
        ("SEIR 0.4", seir(0.4), ClassTag::MrpiProper),
        ("SEIR 0.3", seir(0.3), ClassTag::BothProper),
        ("SEIR imperfect", seir_imperfect(), ClassTag::MProper),
    ];
    let mut bad = Vec::new();
    for (name, sc, want) in &cases {
        let got = classify(sc).tag;
        if got != *want {
            bad.push(format!("{name}: {} != {}", got.as_str(), want.as_str()));
        }
    }
    report(1, bad.is_empty(), &format!("{} configurations, mismatches {bad:?}", cases.len()));
}

#[test]
fn criterion_02_tangent_points() {
    let sc = sir(0.02);
    let z = |sc: &Scenario, kind| match filtered_tangent_set(sc, kind).unwrap() {
        TangentSet::Point { z } => z.into_vec(),
        TangentSet::Segment { z2, .. } => vec![z2],
    };
    let a = z(&sc, SetKind::Admissible);
    let m = z(&sc, SetKind::Mrpi);
    let ea = (a[0] - 0.5 / 0.6).abs().max((a[1] - 0.02).abs());
    let em = (m[0] - 0.5 / 0.8).abs().max((m[1] - 0.02).abs());
    let s = seir(0.3);
    let za = z(&s, SetKind::Admissible)[0];
    let zm = z(&s, SetKind::Mrpi)[0];
    let es = (za - 0.5).abs().max((zm - 0.3).abs());
    let ok = ea <= 1e-12 && em <= 1e-12 && es <= 1e-12;
    report(
        2,
        ok,
        &format!("SIR adm {a:?} MRPI {m:?}; SEIR z2* adm {za} MRPI {zm}; max error {:.1e}", ea.max(em).max(es)),
    );
}

#[test]
fn criterion_03_04_05_curve_invariants() {
    let sets = all_sets();
    let mut h_max: f64 = 0.0;
    let mut lfg_max: f64 = 0.0;
    let mut containment = 0.0_f64;
    let mut n_curves = 0;
    for (_, set) in &sets {
        let i_max = set.scenario.i_max;
        for c in &set.curves {
            n_curves += 1;
            h_max = h_max.max(c.max_hamiltonian());
            lfg_max = lfg_max.max(c.tangency_residual());
            let inner = &c.samples[1..c.samples.len().saturating_sub(1)];
            for s in inner {
                let x = s.state.as_slice();
                let over_cap = s.state.i() - i_max;
                let below_zero = x.iter().fold(0.0_f64, |m, v| m.max(-v));
                let over_simplex = s.state.sum() - 1.0;
                containment = containment.max(over_cap).max(below_zero).max(over_simplex);
            }
        }
    }
    let detail = format!("{} sets, {n_curves} curves", sets.len());
    let r3 = h_max <= 1e-6;
    let r4 = lfg_max <= 1e-8;
    let r5 = containment <= 1e-9;
    let _ = std::io::stdout().lock().write_all(
        format!(
            "CRITERION  3 {}: max |H| = {h_max:.2e} over {detail}\n\
             CRITERION  4 {}: max |L_f g| at tangency = {lfg_max:.2e}\n\
             CRITERION  5 {}: worst excursion outside the constrained space = {containment:.2e}\n",
            pf(r3),
            pf(r4),
            pf(r5)
        )
        .as_bytes(),
    );
    assert!(r3 && r4 && r5, "H {h_max:e}, L_f g {lfg_max:e}, containment {containment:e}");
}

fn pf(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[test]
fn criterion_06_input_saturation() {
    let tol = Tolerances::default();
    let sc = sir(0.02);
    let a = assemble_set(&sc, SetKind::Admissible, 1, &tol).unwrap();
    let m = assemble_set(&sc, SetKind::Mrpi, 1, &tol).unwrap();
    let all = |c: &BarrierCurve, f: &dyn Fn(f64, f64) -> bool| c.samples.iter().all(|s| f(s.input.beta, s.input.gamma));
    let a_ok = all(&a.curves[0], &|b, _| b == 0.6) && a.curves[0].switch_times.is_empty();
    let m_ok = all(&m.curves[0], &|b, _| b == 0.8) && m.curves[0].switch_times.is_empty();
    let imp = sir_imperfect();
    let i = assemble_set(&imp, SetKind::Mrpi, 1, &tol).unwrap();
    let i_ok = all(&i.curves[0], &|_, g| g == 0.3) && i.curves[0].switch_times.is_empty();
    report(
        6,
        a_ok && m_ok && i_ok,
        &format!(
            "admissible beta_min on {} samples: {a_ok}; MRPI beta_max on {}: {m_ok}; imperfect gamma_min on {}: {i_ok}",
            a.curves[0].samples.len(),
            m.curves[0].samples.len(),
            i.curves[0].samples.len()
        ),
    );
}

#[test]
fn criterion_07_eta_switching() {
    let sc = seir_imperfect();
    let set = assemble_set(&sc, SetKind::Mrpi, 30, &Tolerances::default()).unwrap();
    let single: Vec<f64> = set
        .curves
        .iter()
        .filter(|c| {
            let sw = c.switches_on(Channel::Eta);
            sw.len() == 1 && sw[0].from == Level::Hi && sw[0].to == Level::Lo
        })
        .map(|c| c.tangent_point.s())
        .collect();
    report(
        7,
        !single.is_empty(),
        &format!(
            "{} of {} curves switch eta once from eta_max to eta_min (z1 from {:.4})",
            single.len(),
            set.curves.len(),
            single.first().copied().unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_08_switching_law() {
    let sc = sir(0.02);
    let tol = Tolerances::default();
    let sets = SwitchingSets::new(
        &sc,
        assemble_set(&sc, SetKind::Admissible, 1, &tol).unwrap(),
        assemble_set(&sc, SetKind::Mrpi, 1, &tol).unwrap(),
    )
    .unwrap();
    let tr = simulate(&sc, &Policy::SwitchingLaw(sets), &StateVec::sir(0.8, 0.012), 500.0, &tol).unwrap();
    let in_box = tr.samples.iter().all(|s| s.input.in_box(&sc, 0.0));
    report(
        8,
        !tr.breached && tr.max_i >= 0.019 && in_box,
        &format!("breached = {}, max_I = {:.6}", tr.breached, tr.max_i),
    );
}

fn monte_carlo_breaches() -> (usize, f64) {
    let sc = sir_imperfect();
    let tol = Tolerances::default();
    let p = Policy::feedback(&sc, 0.3).unwrap();
    let runs = monte_carlo(&sc, &StateVec::sir(0.8, 0.1), &p, 10, 2024, 200.0, &tol).unwrap();
    let n = runs.iter().filter(|r| r.trajectory.breached).count();
    let max_i = runs.iter().map(|r| r.trajectory.max_i).fold(0.0, f64::max);
    (n, max_i)
}

#[test]
fn criterion_09_monte_carlo() {
    let (n, max_i) = monte_carlo_breaches();
    report(9, n == 0, &format!("{n} of 10 trajectories breach I_max = 0.2 (max I = {max_i:.6})"));
}

#[test]
fn criterion_10_oracle_agreement() {
    let sc = sir(0.02);
    let tol = Tolerances::default();
    let a = assemble_set(&sc, SetKind::Admissible, 1, &tol).unwrap();
    let m = assemble_set(&sc, SetKind::Mrpi, 1, &tol).unwrap();
    let sets = SwitchingSets::new(&sc, a.clone(), m.clone()).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for set in [&a, &m] {
        let r = oracle_grid(&sc, set, Some(&sets), 30, 8, 7, &tol, &OracleOptions::default()).unwrap();
        ok &= r.agreement >= 0.98 && r.max_disagreement_distance <= 2.0 * tol.boundary_layer_eps;
        detail.push(format!(
            "{}: {}/{} = {:.4}, worst disagreement distance {:.1e}",
            set.set_kind, r.n_agree, r.n_decisive, r.agreement, r.max_disagreement_distance
        ));
    }
    report(10, ok, &detail.join("; "));
}

#[test]
fn criterion_11_step_convergence() {
    let sc = sir(0.02);
    let z = StateVec::sir(0.5 / 0.6, 0.02);
    let curve = |h: f64| {
        let tol = Tolerances {
            step_h: h,
            ..Tolerances::default()
        };
        let c = compute_barrier_curve(&sc, SetKind::Admissible, &z, &tol).unwrap();
        assert!(matches!(c.termination, EventKind::DomainExit(_)));
        let pts: Vec<[f64; 2]> = c.states().map(|x| [x[0], x[1]]).collect();
        resample_arc_length(&pts, 2000)
    };
    let dist = |a: &[[f64; 2]], b: &[[f64; 2]]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    };
    let c1 = curve(1e-3);
    let c2 = curve(5e-4);
    let c3 = curve(2.5e-4);
    let (d12, d23) = (dist(&c1, &c2), dist(&c2, &c3));
    let ratio = d12 / d23;
    report(
        11,
        ratio >= 8.0,
        &format!("successive distances {d12:.3e}, {d23:.3e}; ratio {ratio:.2} (need >= 8)"),
    );
}

#[test]
fn criterion_12_r0_remark() {
    let sc = sir_imperfect();
    let r0 = sc.beta.lo / sc.gamma.hi;
    let (n, _) = monte_carlo_breaches();
    report(
        12,
        (r0 - 1.2).abs() < 1e-12 && r0 > 1.0 && n == 0,
        &format!("beta_min / gamma_max = {r0:.15}, Monte Carlo breaches {n}"),
    );
}
