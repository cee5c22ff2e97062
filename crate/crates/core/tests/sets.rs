//! Geometric and dynamic checks of assembled sets against independent
//! simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epibarrier::barrier::{assemble_set, ComputedSet, Verdict};
use epibarrier::export::{SetDocument, FORMAT_VERSION};
use epibarrier::geometry::{dot3, sub3, P3};
use epibarrier::models::{switch_value, Channel};
use epibarrier::policy::{
    membership_oracle, simulate, simulate_with, BangSchedule, OracleOptions, Policy, SimOptions, SwitchingSets,
};
use epibarrier::{Scenario, SetKind, StateVec, Tolerances};

fn sir(i_max: f64) -> Scenario {
    Scenario::sir_perfect(0.5, (0.6, 0.8), i_max).unwrap()
}

fn seir(i_max: f64) -> Scenario {
    Scenario::seir_perfect((0.8, 1.0), (0.2, 1.0 / 3.0), 0.2, i_max).unwrap()
}

fn seir_imperfect() -> Scenario {
    Scenario::seir_imperfect((0.8, 1.0), (0.2, 1.0 / 3.0), (1.0 / 7.0, 0.2), 0.1).unwrap()
}

fn switching_sets(sc: &Scenario) -> SwitchingSets {
    let tol = Tolerances::default();
    SwitchingSets::new(
        sc,
        assemble_set(sc, SetKind::Admissible, 1, &tol).unwrap(),
        assemble_set(sc, SetKind::Mrpi, 1, &tol).unwrap(),
    )
    .unwrap()
}

/// Random point of the constrained space.
fn random_point(rng: &mut ChaCha8Rng, sc: &Scenario) -> StateVec {
    loop {
        let i = rng.gen_range(0.0..sc.i_max);
        let s = rng.gen_range(0.0..1.0);
        if sc.variant.is_seir() {
            let e = rng.gen_range(0.0..1.0);
            if s + e + i <= 1.0 {
                return StateVec::seir(s, e, i);
            }
        } else if s + i <= 1.0 {
            return StateVec::sir(s, i);
        }
    }
}

/// `n` random points that the set calls INSIDE, away from its boundary.
fn interior_points(set: &ComputedSet, n: usize, seed: u64) -> Vec<StateVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = set.tolerances.boundary_layer_eps;
    let mut out = Vec::new();
    while out.len() < n {
        let p = random_point(&mut rng, &set.scenario);
        let m = set.membership(&p);
        if m.verdict == Verdict::Inside && m.distance_estimate > eps {
            out.push(p);
        }
    }
    out
}

#[test]
fn switching_law_is_safe_from_inside_the_admissible_set() {
    let sc = sir(0.02);
    let tol = Tolerances::default();
    let sets = switching_sets(&sc);
    let policy = Policy::SwitchingLaw(sets.clone());
    for p in interior_points(&sets.admissible, 50, 11) {
        let tr = simulate_with(&sc, &policy, &p, 500.0, &tol, &SimOptions::oracle()).unwrap();
        assert!(!tr.breached, "breach from {:?}: max I {}", p.as_slice(), tr.max_i);
        assert!(tr.samples.iter().all(|s| s.input.in_box(&sc, 0.0)));
    }
}

#[test]
fn mrpi_is_robust_to_extremal_signals() {
    let tol = Tolerances::default();
    let opts = SimOptions::oracle();
    for (sc, seed) in [(sir(0.02), 21), (seir(0.3), 22), (seir_imperfect(), 23)] {
        let set = assemble_set(&sc, SetKind::Mrpi, 30, &tol).unwrap();
        for (k, p) in interior_points(&set, 50, seed).into_iter().enumerate() {
            for trial in 0..20 {
                let s = BangSchedule::random(sc.variant, seed + k as u64, trial, 8, 100.0);
                let tr = simulate_with(&sc, &Policy::ExtremalBang(s), &p, 500.0, &tol, &opts).unwrap();
                assert!(
                    !tr.breached,
                    "{}: breach from {:?} on trial {trial} (max I {})",
                    sc.variant,
                    p.as_slice(),
                    tr.max_i
                );
                assert!(tr.samples.iter().all(|s| s.input.in_box(&sc, 0.0)));
            }
        }
    }
}

#[test]
fn barrier_separates_viable_from_doomed_states() {
    let sc = sir(0.02);
    let tol = Tolerances::default();
    let sets = switching_sets(&sc);
    let a = &sets.admissible;
    let curve = &a.curves[0];
    let eps = tol.boundary_layer_eps;
    let opts = OracleOptions::default();
    let n = curve.samples.len();
    let worst = [
        Policy::constant(&sc, 0.6, None, None).unwrap(),
        Policy::constant(&sc, 0.7, None, None).unwrap(),
        Policy::constant(&sc, 0.8, None, None).unwrap(),
        Policy::SwitchingLaw(sets.clone()),
    ];
    let mut checked = 0;
    for j in (n / 20..n - n / 20).step_by(n / 20) {
        let x = curve.samples[j].state.as_slice();
        let nrm = ComputedSet::sir_normal(curve, j);
        let inside = StateVec::sir(x[0] - eps * nrm[0], x[1] - eps * nrm[1]);
        let outside = StateVec::sir(x[0] + eps * nrm[0], x[1] + eps * nrm[1]);
        if !inside.in_constraint_set(sc.i_max, 0.0) || !outside.in_constraint_set(sc.i_max, 0.0) {
            continue;
        }
        let r = membership_oracle(&sc, SetKind::Admissible, &inside, Verdict::Inside, 0, 0, Some(&sets), &tol, &opts)
            .unwrap();
        assert!(r.oracle_inside, "no cap-preserving input from {:?}", inside.as_slice());
        for p in &worst {
            let tr = simulate_with(&sc, p, &outside, 500.0, &tol, &SimOptions::oracle()).unwrap();
            assert!(tr.breached, "{} avoids a breach from {:?}", p.label(), outside.as_slice());
        }
        checked += 1;
    }
    assert!(checked >= 15, "only {checked} probes");
}

#[test]
fn seir_mesh_normals_separate_inside_from_outside() {
    let tol = Tolerances::default();
    let eps = tol.boundary_layer_eps;
    for (sc, kind) in [
        (seir(0.3), SetKind::Admissible),
        (seir(0.3), SetKind::Mrpi),
        (seir(0.4), SetKind::Mrpi),
        (seir_imperfect(), SetKind::Mrpi),
    ] {
        let set = assemble_set(&sc, kind, 30, &tol).unwrap();
        let mesh = set.mesh.as_ref().unwrap().data().clone();
        let (mut good, mut unknown, mut wrong, mut total) = (0, 0, 0, 0);
        for (tri, nrm) in mesh.triangles.iter().zip(&mesh.normals).step_by(7) {
            let c: P3 = [0, 1, 2].map(|k| tri.iter().map(|&v| mesh.nodes[v as usize][k]).sum::<f64>() / 3.0);
            let at = |sgn: f64| StateVec::seir(c[0] + sgn * nrm[0], c[1] + sgn * nrm[1], c[2] + sgn * nrm[2]);
            let d = 2.0 * eps;
            let (pin, pout) = (at(-d), at(d));
            if !pin.in_constraint_set(sc.i_max, 0.0) {
                continue;
            }
            // the probe pair must straddle only this part of the surface
            if dot3(sub3([pout.s(), pout.e().unwrap(), pout.i()], c), *nrm) <= 0.0 {
                continue;
            }
            total += 1;
            let vin = set.membership(&pin).verdict;
            let vout = set.membership(&pout).verdict;
            match (vin, vout) {
                (Verdict::Inside, Verdict::Outside) => good += 1,
                (Verdict::Unknown, _) | (_, Verdict::Unknown) => unknown += 1,
                _ => wrong += 1,
            }
        }
        let rate = good as f64 / total as f64;
        assert!(total > 50, "{} {kind}: only {total} probes", sc.variant);
        assert!(
            rate >= 0.95,
            "{} {kind}: {good}/{total} consistent, {unknown} unknown, {wrong} wrong",
            sc.variant
        );
    }
}

#[test]
fn seir_membership_agrees_with_the_oracle() {
    let tol = Tolerances::default();
    let opts = OracleOptions::default();
    for (sc, kind, seed) in [
        (seir(0.3), SetKind::Admissible, 31),
        (seir(0.3), SetKind::Mrpi, 32),
        (seir(0.4), SetKind::Mrpi, 33),
        (seir_imperfect(), SetKind::Mrpi, 34),
    ] {
        let set = assemble_set(&sc, kind, 30, &tol).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut decisive, mut agree) = (0, 0);
        for k in 0..150 {
            let p = random_point(&mut rng, &sc);
            let m = set.membership(&p);
            if !m.verdict.is_decisive() {
                continue;
            }
            decisive += 1;
            let r = membership_oracle(&sc, kind, &p, m.verdict, 8, seed + k, None, &tol, &opts).unwrap();
            // A claimed INSIDE point must never breach; a missed OUTSIDE
            // breach only means the random schedules were not extremal enough.
            assert!(
                r.agree || m.verdict == Verdict::Outside,
                "{} {kind}: {:?} breaches",
                sc.variant,
                p.as_slice()
            );
            agree += r.agree as usize;
        }
        let rate = agree as f64 / decisive as f64;
        assert!(rate >= 0.97, "{} {kind}: {agree}/{decisive} agree", sc.variant);
    }
}

#[test]
fn set_json_round_trip_keeps_verdicts() {
    let tol = Tolerances::default();
    for (sc, kind) in [
        (sir(0.02), SetKind::Admissible),
        (sir(0.02), SetKind::Mrpi),
        (sir(0.4), SetKind::Mrpi),
        (seir(0.3), SetKind::Mrpi),
        (seir_imperfect(), SetKind::Mrpi),
    ] {
        let set = assemble_set(&sc, kind, 30, &tol).unwrap();
        let doc = SetDocument {
            format_version: FORMAT_VERSION,
            set,
            manifest: None,
        };
        let back = SetDocument::from_json(&doc.to_json().unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = random_point(&mut rng, &sc);
            assert_eq!(back.set.membership(&p), doc.set.membership(&p), "{:?}", p.as_slice());
        }
    }
}

#[test]
fn switches_are_isolated_and_bracketed() {
    let sc = seir_imperfect();
    let tol = Tolerances::default();
    let set = assemble_set(&sc, SetKind::Mrpi, 30, &tol).unwrap();
    let mut seen = 0;
    for c in &set.curves {
        for w in c.switch_times.windows(2) {
            assert!((w[0].t - w[1].t).abs() > 10.0 * tol.event_time_tol);
        }
        for sw in &c.switch_times {
            // samples just on either side of the switch
            let before = c.samples.iter().filter(|s| s.t > sw.t).last().unwrap();
            let after = c.samples.iter().find(|s| s.t < sw.t).unwrap();
            let sigma = |s: &epibarrier::integrate::StepRecord| {
                switch_value(sc.variant, SetKind::Mrpi, Channel::Eta, &s.adjoint).unwrap().value
            };
            assert!(sigma(before) * sigma(after) <= 0.0, "no sign change across t = {}", sw.t);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn trivial_set_is_everything() {
    let sc = sir(0.4);
    let set = assemble_set(&sc, SetKind::Admissible, 1, &Tolerances::default()).unwrap();
    assert!(set.trivial && set.curves.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        assert_eq!(set.membership(&random_point(&mut rng, &sc)).verdict, Verdict::Inside);
    }
}

#[test]
fn monte_carlo_from_outside_the_mrpi_set() {
    // Start just above the imperfect-SIR barrier; gamma draws near gamma_min
    // should push the state over the cap.
    let sc = Scenario::sir_imperfect((0.6, 0.8), (0.3, 0.5), 0.2).unwrap();
    let tol = Tolerances::default();
    let set = assemble_set(&sc, SetKind::Mrpi, 1, &tol).unwrap();
    let x0 = StateVec::sir(0.8, 0.19);
    let m = set.membership(&x0);
    assert_eq!(m.verdict, Verdict::Outside);
    assert!(m.distance_estimate > tol.boundary_layer_eps);
    let p = Policy::feedback(&sc, 0.3).unwrap();
    let runs = epibarrier::policy::monte_carlo(&sc, &x0, &p, 20, 9, 200.0, &tol).unwrap();
    let low: Vec<_> = runs.iter().filter(|r| r.disturbance < 0.32).collect();
    assert!(!low.is_empty());
    assert!(low.iter().any(|r| r.trajectory.breached));
    let worst = simulate(&sc, &p, &x0, 200.0, &tol).unwrap();
    assert!(worst.breached);
}
