use nalgebra::Vector2;
use proptest::prelude::*;
use reebchord::diagnostics::{read_jsonl, to_json_line, CatalogEntry, ChordCatalog, InsertOutcome, ARTIFACT_VERSION};
use reebchord::dynamics::{
    effective_potential, effective_potential_gradient, hamiltonian, lagrange_points, PhaseState, SystemParams,
};
use reebchord::integrator::{integrate, FlowModel, Initial, IntegrationSettings};
use reebchord::regularization::{chart_transition, kcheck_value, Chart, MoserChartPoint, RegularizedLevel};
use reebchord::shooting::{miss_function, Branch, ShotSpec};
use serde_json::Value;

fn level_below(mu: f64, gap: f64) -> RegularizedLevel {
    let params = SystemParams::new(mu).unwrap();
    let c = lagrange_points(&params).unwrap().first_critical_value - gap;
    RegularizedLevel::from_jacobi(params, c)
}

/// A state on the level of `lv` at position `q` with momentum direction
/// `angle`, if the level reaches `q`.
fn state_on_level(lv: &RegularizedLevel, q: Vector2<f64>, angle: f64) -> Option<PhaseState> {
    let mu = lv.params.mu();
    let d = Vector2::new(angle.cos(), angle.sin());
    let w = Vector2::new(q.y, -(q.x - mu));
    let v = -mu / (q - Vector2::new(1.0, 0.0)).norm() - (1.0 - mu) / q.norm();
    let dw = d.dot(&w);
    let disc = dw * dw - 2.0 * (v - lv.jacobi());
    if disc < 0.0 {
        return None;
    }
    let t = -dw + disc.sqrt();
    (t > 0.0).then(|| PhaseState::new(q.x, q.y, t * d.x, t * d.y))
}

fn short_run(tau: f64) -> IntegrationSettings {
    IntegrationSettings::default().with_t_max(tau)
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

prop_compose! {
    fn catalog_entry()(
        mu in 0.0..0.5f64,
        jacobi in -3.0..-1.0f64,
        plus in any::<bool>(),
        k in 1usize..5,
        s0 in finite_f64(),
        tau in 1e-3..100.0f64,
        extra in prop::array::uniform8(finite_f64()),
        flags in prop::array::uniform2(any::<bool>()),
    ) -> CatalogEntry {
        CatalogEntry {
            mu,
            jacobi,
            branch: if plus { Branch::Plus } else { Branch::Minus },
            side: if s0 < 0.0 { reebchord::shooting::Side::Negative } else { reebchord::shooting::Side::Positive },
            pericenter_index: k,
            s0,
            tau_reeb: tau,
            action: extra[0],
            flight_time: extra[1],
            r_peri: extra[2].abs(),
            endpoint_start_b: [extra[3], extra[4]],
            endpoint_end_b: [extra[5], extra[6]],
            symmetric: flags[0],
            periodic_candidate: flags[1],
            integrator_tolerances: IntegrationSettings::default(),
            artifact_version: ARTIFACT_VERSION.into(),
            dm_ds: Some(extra[7]),
            run_config: Value::Null,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_gradient_matches_differences(
        mu in 0.0..0.6f64,
        r in 0.2..1.8f64,
        phi in 0.0..std::f64::consts::TAU,
    ) {
        let params = SystemParams::new(mu).unwrap();
        let q = Vector2::new(r * phi.cos(), r * phi.sin());
        prop_assume!((q - Vector2::new(1.0, 0.0)).norm() > 0.2);
        let g = effective_potential_gradient(&q, &params).unwrap();
        let h = 1e-6;
        for (i, e) in [Vector2::x(), Vector2::y()].iter().enumerate() {
            let fd = (effective_potential(&(q + h * e), &params).unwrap()
                - effective_potential(&(q - h * e), &params).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6 * g.norm().max(1.0), "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn chart_transition_is_an_involution(
        chart in prop_oneof![Just(Chart::North), Just(Chart::South)],
        a in prop::array::uniform2(-3.0..3.0f64),
        b in prop::array::uniform2(-3.0..3.0f64),
    ) {
        let pt = MoserChartPoint::new(chart, a, b);
        prop_assume!(pt.a.norm() > 0.05);
        let there = chart_transition(&pt).unwrap();
        let back = chart_transition(&there).unwrap();
        prop_assert_eq!(back.chart, chart);
        prop_assert!((back.a - pt.a).amax() < 1e-12 && (back.b - pt.b).amax() < 1e-12);
        prop_assert!((there.cross() - pt.cross()).abs() < 1e-12 * (1.0 + pt.cross().abs()));
    }

    #[test]
    fn kcheck_is_conserved(
        mu in 0.0..0.5f64,
        r in 0.15..0.4f64,
        phi in 0.0..std::f64::consts::TAU,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let lv = level_below(mu, 0.1);
        let q = Vector2::new(r * phi.cos(), r * phi.sin());
        let Some(st) = state_on_level(&lv, q, angle) else { return Ok(()) };
        let traj = integrate(&FlowModel::regularized(lv), &Initial::Physical(st), &short_run(2.0)).unwrap();
        prop_assert!(traj.max_conserved_drift(lv.target) < 1e-9);
    }

    #[test]
    fn flow_is_reversible(
        mu in 0.0..0.5f64,
        r in 0.15..0.4f64,
        phi in 0.0..std::f64::consts::TAU,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        // The reflection conjugates the flow to its inverse: running from the
        // reflected end point for the same time returns the reflected start.
        let lv = level_below(mu, 0.1);
        let q = Vector2::new(r * phi.cos(), r * phi.sin());
        let Some(st) = state_on_level(&lv, q, angle) else { return Ok(()) };
        let model = FlowModel::regularized(lv);
        let end = integrate(&model, &Initial::Physical(st), &short_run(1.5)).unwrap().end();
        let mirrored = end.chart_point().unwrap().reflect();
        let back = integrate(&model, &Initial::Chart(mirrored), &short_run(1.5)).unwrap().end();
        let got = back.chart_point().unwrap().reflect().in_chart(Chart::North).unwrap();
        let want = MoserChartPoint::from_physical(&st);
        prop_assert!((got.a - want.a).amax() < 1e-7 && (got.b - want.b).amax() < 1e-7,
            "{got:?} vs {want:?}");
    }

    #[test]
    fn kcheck_agrees_with_energy(
        mu in 0.0..0.5f64,
        r in 0.15..0.4f64,
        phi in 0.0..std::f64::consts::TAU,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let lv = level_below(mu, 0.1);
        let q = Vector2::new(r * phi.cos(), r * phi.sin());
        let Some(st) = state_on_level(&lv, q, angle) else { return Ok(()) };
        prop_assert!((hamiltonian(&st, &lv.params).unwrap() - lv.jacobi()).abs() < 1e-12);
        let pt = MoserChartPoint::from_physical(&st);
        let south = chart_transition(&pt).unwrap();
        for p in [pt, south] {
            prop_assert!((kcheck_value(&p, &lv).unwrap() - lv.target).abs() < 1e-11);
        }
    }

    #[test]
    fn catalog_lines_round_trip(entry in catalog_entry()) {
        let line = to_json_line(&entry).unwrap();
        let back: CatalogEntry = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(&back, &entry);
        prop_assert_eq!(to_json_line(&back).unwrap(), line);
    }

    #[test]
    fn catalog_files_round_trip(entries in prop::collection::vec(catalog_entry(), 0..6)) {
        let mut cat = ChordCatalog::default();
        for e in entries {
            if let Ok(InsertOutcome::Inserted(_)) = cat.insert_entry(e) {}
        }
        let mut buf = Vec::new();
        reebchord::diagnostics::write_jsonl(&cat, &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice(), cat.dedupe_tol).unwrap();
        prop_assert_eq!(back.entries(), cat.entries());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mirrored_shots_share_the_miss(mu in 0.0..0.3f64, frac in 0.1..0.9f64) {
        // The reflection maps the shot from s back onto itself with reversed
        // time; since a x b is invariant, the backward miss equals the forward one.
        let lv = level_below(mu, 0.1);
        let hill = reebchord::shooting::hill_interval_if_bounded(&lv).unwrap().unwrap();
        let spec = ShotSpec::new(frac * hill.s_max, Branch::Minus, lv);
        let fwd = miss_function(&spec, &IntegrationSettings::default());
        prop_assume!(fwd.as_ref().is_ok_and(|m| m.valid));
        let fwd = fwd.unwrap();
        let st = reebchord::shooting::axis_initial_state(&spec).unwrap();
        let bwd = integrate(&FlowModel::regularized(lv).reversed(), &Initial::Physical(st), &short_run(fwd.t_peri * 1.01 + 0.1)).unwrap();
        let at = bwd.at(fwd.t_peri).unwrap().chart_point().unwrap();
        let reflected = at.reflect();
        let pos = bwd.at(fwd.t_peri).unwrap().position();
        prop_assert!((at.cross() - fwd.m).abs() < 1e-8, "{} vs {}", at.cross(), fwd.m);
        prop_assert!((reflected.cross() - at.cross()).abs() < 1e-14);
        prop_assert!((pos.norm() - fwd.r_peri).abs() < 1e-8);
    }
}
