//! Property tests over randomly generated connected networks: algebraic
//! invariants of the Kron reduction, agreement with an independent dense
//! elimination, and the state-count law of the assembled models.

use gridresp_core::{
    assemble_frequency_model, assemble_voltage_model, build_susceptance, hertz_sec, kron_reduce,
    nadir, Branch, Bus, BusKind, Constants, DeviceParams, DisturbanceSpec, Generator, Load,
    NetworkCase, ReactiveDisturbance,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Deterministic shuffle picker so generator placement derives from plain
/// proptest integers rather than a proptest-managed subsequence (keeps the
/// strategy shrinkable and rejection-free).
fn pick_distinct(n: usize, count: usize, mut seed: u64) -> Vec<usize> {
    let mut items: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (seed >> 33) as usize % (i + 1);
        items.swap(i, j);
    }
    items.truncate(count);
    items.sort_unstable();
    items
}

#[derive(Clone, Debug)]
struct Blueprint {
    n: usize,
    parents: Vec<u32>,
    xs: Vec<f64>,
    extra: Vec<(u32, u32)>,
    n_gens: usize,
    kinds: Vec<bool>,
    gen_seed: u64,
}

fn arb_blueprint() -> impl Strategy<Value = Blueprint> {
    (
        4usize..=30,
        prop::collection::vec(any::<u32>(), 29),
        prop::collection::vec(0.01f64..1.0, 35),
        prop::collection::vec((any::<u32>(), any::<u32>()), 0..5),
        2usize..=8,
        prop::collection::vec(any::<bool>(), 8),
        any::<u64>(),
    )
        .prop_map(|(n, parents, xs, extra, n_gens, kinds, gen_seed)| Blueprint {
            n,
            parents,
            xs,
            extra,
            n_gens,
            kinds,
            gen_seed,
        })
}

/// Random connected case: a spanning tree plus a few chords, with
/// non-contiguous bus ids to exercise the id→position mapping.
fn build_case(bp: &Blueprint) -> NetworkCase {
    let n = bp.n;
    let id = |i: usize| 3 * i + 7;
    let n_gens = bp.n_gens.min(n - 1);
    let gen_pos = pick_distinct(n, n_gens, bp.gen_seed);

    let mut buses = Vec::with_capacity(n);
    for i in 0..n {
        let kind =
            if gen_pos.contains(&i) { BusKind::Generator } else { BusKind::Load };
        buses.push(Bus { id: id(i), kind, base_kv: 230.0 });
    }

    let mut branches = Vec::new();
    for i in 1..n {
        let p = bp.parents[i - 1] as usize % i;
        branches.push(Branch {
            from: id(p),
            to: id(i),
            x: bp.xs[(i - 1) % bp.xs.len()],
            in_service: true,
        });
    }
    for (k, &(a, b)) in bp.extra.iter().enumerate() {
        let (i, j) = (a as usize % n, b as usize % n);
        if i != j {
            branches.push(Branch {
                from: id(i),
                to: id(j),
                x: bp.xs[(n + k) % bp.xs.len()],
                in_service: true,
            });
        }
    }

    let generators = gen_pos
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let s_i = 80.0 + 40.0 * k as f64;
            let device = if bp.kinds[k % bp.kinds.len()] {
                DeviceParams::generic_sg(s_i)
            } else {
                DeviceParams::generic_gfm(s_i)
            };
            Generator { bus: id(i), s_rated_mva: s_i, dispatch_mw: 25.0, v_setpoint: 1.0, device }
        })
        .collect();

    let loads = (0..n)
        .filter(|i| !gen_pos.contains(i))
        .map(|i| Load { bus: id(i), p_mw: 15.0, q_mvar: 4.0 })
        .collect();

    NetworkCase {
        name: "random".into(),
        base_mva: 100.0,
        f0: 60.0,
        buses,
        branches,
        generators,
        loads,
    }
    .validated()
    .expect("generated case must be valid")
}

proptest! {
    /// The reduced matrix stays a Laplacian (symmetric, zero row sums) and
    /// each load's injection is fully redistributed over generators
    /// (columns of the participation map sum to −1).
    #[test]
    fn kron_reduction_preserves_laplacian_structure(bp in arb_blueprint()) {
        let case = build_case(&bp);
        let net = kron_reduce(&build_susceptance(&case)).unwrap();
        let n = net.gen_index.len();

        for i in 0..n {
            for j in 0..n {
                prop_assert!((net.b_r[(i, j)] - net.b_r[(j, i)]).abs() < 1e-10);
            }
            prop_assert!(net.b_r.row(i).sum().abs() < 1e-10);
            prop_assert!(net.b_r.column(i).sum().abs() < 1e-10);
        }
        for l in 0..net.load_index.len() {
            prop_assert!((net.b_l.column(l).sum() + 1.0).abs() < 1e-10);
        }
    }

    /// Same elimination done independently: dense Laplacian in bus-list
    /// order, permuted generators-first, Schur complement via dense LU.
    #[test]
    fn reduction_matches_dense_block_elimination(bp in arb_blueprint()) {
        let case = build_case(&bp);
        let net = kron_reduce(&build_susceptance(&case)).unwrap();

        let pos = case.bus_positions();
        let nb = case.buses.len();
        let mut full = DMatrix::<f64>::zeros(nb, nb);
        for br in case.branches.iter().filter(|b| b.in_service) {
            let y = 1.0 / br.x;
            let (i, j) = (pos[&br.from], pos[&br.to]);
            full[(i, i)] += y;
            full[(j, j)] += y;
            full[(i, j)] -= y;
            full[(j, i)] -= y;
        }

        let order: Vec<usize> =
            net.gen_index.iter().chain(&net.load_index).map(|b| pos[b]).collect();
        let perm = DMatrix::<f64>::from_fn(nb, nb, |r, c| f64::from(order[r] == c));
        let reordered = &perm * full * perm.transpose();

        let n = net.gen_index.len();
        let m = net.load_index.len();
        let b_gg = reordered.view((0, 0), (n, n)).into_owned();
        let b_gl = reordered.view((0, n), (n, m)).into_owned();
        let b_lg = reordered.view((n, 0), (m, n)).into_owned();
        let b_ll = reordered.view((n, n), (m, m)).into_owned();

        let x = b_ll.lu().solve(&b_lg).expect("B_LL of a connected case is invertible");
        let b_r = b_gg - b_gl * &x;
        let b_l = x.transpose();

        prop_assert!((&b_r - &net.b_r).abs().max() < 1e-10);
        prop_assert!((&b_l - &net.b_l).abs().max() < 1e-10);
    }

    /// State counts follow the composition directly: frequency carries
    /// n−1 relative angles, n frequencies, and one governor state per SG;
    /// voltage carries one error state per device plus one PI state per SG.
    #[test]
    fn state_dimension_law(bp in arb_blueprint()) {
        let case = build_case(&bp);
        let net = kron_reduce(&build_susceptance(&case)).unwrap();
        let n = net.gen_index.len();
        let n_sg = case
            .generators
            .iter()
            .filter(|g| matches!(g.device, DeviceParams::Sg { .. }))
            .count();

        let disturbance =
            DisturbanceSpec { bus: net.load_index[0], dp_mw: 50.0, dq_mvar: 0.0 };
        let constants = Constants::new(case.f0);
        let fm = assemble_frequency_model(
            &net,
            &case.generators,
            &disturbance,
            &constants,
            case.base_mva,
        )
        .unwrap();
        prop_assert_eq!(fm.n_states(), 2 * n - 1 + n_sg);
        prop_assert_eq!(fm.b.ncols(), net.load_index.len());

        let dist = ReactiveDisturbance {
            dq_g: vec![0.01; n],
            gen_buses: net.gen_index.clone(),
        };
        let vm = assemble_voltage_model(&case.generators, &dist, case.base_mva).unwrap();
        prop_assert_eq!(vm.n_states(), n + n_sg);
    }

    /// The reported nadir deviation equals the largest sampled deviation.
    #[test]
    fn nadir_is_the_extreme_deviation(devs in prop::collection::vec(-0.5f64..0.5, 2..120)) {
        let times: Vec<f64> = (0..devs.len()).map(|i| 0.05 * i as f64).collect();
        let f: Vec<f64> = devs.iter().map(|d| 60.0 + d).collect();
        let (f_nadir, t_nadir) = nadir(&times, &f, 60.0).unwrap();
        let worst = devs.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        prop_assert!(((f_nadir - 60.0).abs() - worst).abs() < 1e-12);
        prop_assert!(times.contains(&t_nadir));
    }

    /// Splitting the integration window never changes the integral. Holds
    /// only for one-signed deviations: the trapezoid of |f₀−f| is not
    /// additive across a cut inside a segment where the trace crosses f₀,
    /// because interpolation kinks the absolute value there.
    #[test]
    fn hertz_sec_is_additive_over_subintervals(
        devs in prop::collection::vec(0.0f64..0.5, 3..120),
        cut in 0.1f64..0.9,
    ) {
        let times: Vec<f64> = (0..devs.len()).map(|i| 0.05 * i as f64).collect();
        let f: Vec<f64> = devs.iter().map(|d| 60.0 + d).collect();
        let t_end = *times.last().unwrap();
        let t_cut = cut * t_end;

        let whole = hertz_sec(&times, &f, 60.0, 0.0, t_end).unwrap();
        let left = hertz_sec(&times, &f, 60.0, 0.0, t_cut).unwrap();
        let right = hertz_sec(&times, &f, 60.0, t_cut, t_end).unwrap();
        prop_assert!((whole - (left + right)).abs() < 1e-9 * (1.0 + whole));
    }
}
