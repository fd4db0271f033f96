//! End-to-end checks on assembled models: the closed-form solution against a
//! numerical integrator, and structural symmetries the pipeline must respect
//! (device ordering and reference choice cannot change the physics).

use gridresp_core::{
    assemble_frequency_model, assemble_voltage_model, build_susceptance, eigen_diagnostics,
    estimate_reactive_disturbance, kron_reduce, solve_analytic, solve_numeric_oracle,
    steady_state_frequency, Branch, Bus, BusKind, Constants, DeviceKind, DeviceParams,
    DisturbanceSpec, Generator, Load, LtiModel, NetworkCase, Stability, StateKind, Trajectory,
};

/// Chain of generator/load bus pairs: gens at odd ids, loads at even ids,
/// wired 1-2-3-…-2n. Capacities grow along the chain so per-unit scaling is
/// exercised.
fn ladder_case(kinds: &[DeviceKind]) -> NetworkCase {
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut loads = Vec::new();
    let mut generators = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let gb = 2 * i + 1;
        let lb = 2 * i + 2;
        buses.push(Bus { id: gb, kind: BusKind::Generator, base_kv: 230.0 });
        buses.push(Bus { id: lb, kind: BusKind::Load, base_kv: 230.0 });
        let s_i = 100.0 + 50.0 * i as f64;
        let device = match kind {
            DeviceKind::Sg => DeviceParams::generic_sg(s_i),
            DeviceKind::Gfm => DeviceParams::generic_gfm(s_i),
        };
        generators.push(Generator {
            bus: gb,
            s_rated_mva: s_i,
            dispatch_mw: 40.0,
            v_setpoint: 1.0,
            device,
        });
        loads.push(Load { bus: lb, p_mw: 35.0, q_mvar: 10.0 });
        branches.push(Branch { from: gb, to: lb, x: 0.05 + 0.01 * i as f64, in_service: true });
        if i > 0 {
            branches.push(Branch { from: 2 * i, to: gb, x: 0.08, in_service: true });
        }
    }
    NetworkCase {
        name: "ladder".into(),
        base_mva: 100.0,
        f0: 60.0,
        buses,
        branches,
        generators,
        loads,
    }
    .validated()
    .unwrap()
}

/// The relative-angle damping −D′Δδ acts on angles measured against the
/// reference device, which shifts the equilibrium off the pure droop value
/// and ties the dynamics to the reference choice. Exact synchronization and
/// reference invariance therefore hold only with that term removed.
fn without_angle_damping(mut case: NetworkCase) -> NetworkCase {
    for g in &mut case.generators {
        if let DeviceParams::Sg { freq, .. } = &mut g.device {
            freq.d_prime = 0.0;
        }
    }
    case.validated().unwrap()
}

fn freq_model(case: &NetworkCase, disturbance: &DisturbanceSpec) -> LtiModel {
    let net = kron_reduce(&build_susceptance(case)).unwrap();
    let constants = Constants::new(case.f0);
    assemble_frequency_model(&net, &case.generators, disturbance, &constants, case.base_mva)
        .unwrap()
}

fn max_abs_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.values.shape(), b.values.shape());
    (&a.values - &b.values).abs().max()
}

#[test]
fn frequency_analytic_matches_rk4() {
    let case = ladder_case(&[DeviceKind::Sg, DeviceKind::Gfm, DeviceKind::Sg]);
    let model = freq_model(&case, &DisturbanceSpec { bus: 4, dp_mw: 80.0, dq_mvar: 0.0 });

    let analytic = solve_analytic(&model, 5.0, 0.01).unwrap();
    assert!(!analytic.used_expm_fallback);
    let oracle = solve_numeric_oracle(&model, 5.0, 1e-5, 0.01).unwrap();
    assert!(max_abs_diff(&analytic, &oracle) < 1e-8);
}

#[test]
fn voltage_analytic_matches_rk4() {
    let case = ladder_case(&[DeviceKind::Sg, DeviceKind::Gfm, DeviceKind::Sg]);
    let disturbance = DisturbanceSpec { bus: 4, dp_mw: 80.0, dq_mvar: 30.0 };
    let dist = estimate_reactive_disturbance(&case, &disturbance).unwrap();
    let model = assemble_voltage_model(&case.generators, &dist, case.base_mva).unwrap();

    let analytic = solve_analytic(&model, 2.0, 0.005).unwrap();
    let oracle = solve_numeric_oracle(&model, 2.0, 1e-5, 0.005).unwrap();
    assert!(max_abs_diff(&analytic, &oracle) < 1e-8);
}

#[test]
fn fleet_synchronizes_to_droop_frequency() {
    let case = without_angle_damping(ladder_case(&[
        DeviceKind::Gfm,
        DeviceKind::Sg,
        DeviceKind::Sg,
        DeviceKind::Gfm,
    ]));
    let model = freq_model(&case, &DisturbanceSpec { bus: 6, dp_mw: 120.0, dq_mvar: 0.0 });

    let devices: Vec<_> = case.generators.iter().map(|g| g.device.clone()).collect();
    let w_ss = steady_state_frequency(&devices, case.base_mva, 1.2).unwrap();

    let traj = solve_analytic(&model, 120.0, 0.5).unwrap();
    for g in &case.generators {
        let row = traj.state_row(StateKind::Omega, g.bus).unwrap();
        let series = traj.series(row);
        assert!(
            (series.last().unwrap() - w_ss).abs() < 1e-6,
            "bus {} ended at {} instead of {}",
            g.bus,
            series.last().unwrap(),
            w_ss
        );
    }
}

/// Rotating the generator list changes which device anchors the relative
/// angles, but the per-bus frequency and governor trajectories are physical
/// quantities and must be unchanged.
#[test]
fn reference_choice_does_not_change_physics() {
    let kinds = [DeviceKind::Sg, DeviceKind::Gfm, DeviceKind::Sg, DeviceKind::Sg];
    let disturbance = DisturbanceSpec { bus: 4, dp_mw: 100.0, dq_mvar: 0.0 };

    let base = without_angle_damping(ladder_case(&kinds));
    let mut rotated = base.clone();
    rotated.generators.rotate_left(2);
    let rotated = rotated.validated().unwrap();

    let t_a = solve_analytic(&freq_model(&base, &disturbance), 10.0, 0.02).unwrap();
    let t_b = solve_analytic(&freq_model(&rotated, &disturbance), 10.0, 0.02).unwrap();

    for g in &base.generators {
        for kind in [StateKind::Omega, StateKind::Pm] {
            let (ra, rb) = (t_a.state_row(kind, g.bus), t_b.state_row(kind, g.bus));
            assert_eq!(ra.is_some(), rb.is_some());
            let Some(ra) = ra else { continue };
            let (sa, sb) = (t_a.series(ra), t_b.series(rb.unwrap()));
            let worst = sa
                .iter()
                .zip(&sb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-8, "{kind:?} at bus {} differs by {worst}", g.bus);
        }
    }
}

/// The voltage model is decoupled per device, so reordering generators must
/// reproduce the same per-bus traces exactly up to solver roundoff.
#[test]
fn generator_order_permutes_voltage_solution() {
    let disturbance = DisturbanceSpec { bus: 2, dp_mw: 0.0, dq_mvar: 60.0 };

    let base = ladder_case(&[DeviceKind::Sg, DeviceKind::Sg, DeviceKind::Gfm]);
    let mut swapped = base.clone();
    swapped.generators.swap(0, 2);
    let swapped = swapped.validated().unwrap();

    let solve = |case: &NetworkCase| {
        let dist = estimate_reactive_disturbance(case, &disturbance).unwrap();
        let model = assemble_voltage_model(&case.generators, &dist, case.base_mva).unwrap();
        solve_analytic(&model, 1.5, 0.005).unwrap()
    };
    let (t_a, t_b) = (solve(&base), solve(&swapped));

    for g in &base.generators {
        let ra = t_a.state_row(StateKind::Dv, g.bus).unwrap();
        let rb = t_b.state_row(StateKind::Dv, g.bus).unwrap();
        let worst = t_a
            .series(ra)
            .iter()
            .zip(&t_b.series(rb))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-10, "Dv at bus {} differs by {worst}", g.bus);
    }
}

#[test]
fn assembled_models_are_stable() {
    let case = ladder_case(&[DeviceKind::Sg, DeviceKind::Gfm, DeviceKind::Sg, DeviceKind::Gfm]);
    let disturbance = DisturbanceSpec { bus: 2, dp_mw: 50.0, dq_mvar: 20.0 };

    let fm = freq_model(&case, &disturbance);
    assert_eq!(eigen_diagnostics(&fm).unwrap().stability, Stability::Stable);

    let dist = estimate_reactive_disturbance(&case, &disturbance).unwrap();
    let vm = assemble_voltage_model(&case.generators, &dist, case.base_mva).unwrap();
    assert_eq!(eigen_diagnostics(&vm).unwrap().stability, Stability::Stable);
}

#[test]
fn response_is_linear_in_disturbance_size() {
    let case = ladder_case(&[DeviceKind::Sg, DeviceKind::Gfm]);
    let small = freq_model(&case, &DisturbanceSpec { bus: 2, dp_mw: 40.0, dq_mvar: 0.0 });
    let large = freq_model(&case, &DisturbanceSpec { bus: 2, dp_mw: 120.0, dq_mvar: 0.0 });

    let t_s = solve_analytic(&small, 8.0, 0.05).unwrap();
    let t_l = solve_analytic(&large, 8.0, 0.05).unwrap();
    let diff = (&t_l.values - 3.0 * &t_s.values).abs().max();
    assert!(diff < 1e-12, "tripled step deviates from 3x response by {diff}");
}
