//! Newton-Raphson AC power flow, lossless (series reactance only), in polar
//! form with a distributed slack: the active-power imbalance is absorbed
//! across generators proportionally to supplied participation weights, with
//! the extra unknown k (slack scale) paired against the P equation of the
//! highest-participation generator bus so the Jacobian keeps a nonzero
//! diagonal.
//!
//! Generator buses hold |V| (PV), load buses hold P and Q (PQ); reactive
//! limits are not enforced. Powers are pu on the system base throughout.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::case::NetworkCase;
use crate::sparse::{SparseError, SparseMatrix};

#[derive(Debug, thiserror::Error)]
pub enum PfError {
    #[error("no generators in case")]
    NoGenerators,
    #[error("dispatch/participation length {got} does not match generator count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("participation weights must be nonnegative with positive sum")]
    BadParticipation,
    #[error("load references unknown bus {bus}")]
    UnknownLoadBus { bus: usize },
    #[error("did not converge after {iterations} iterations (max mismatch {max_mismatch:.3e} pu)")]
    NotConverged { iterations: usize, max_mismatch: f64 },
    #[error("Jacobian factorization failed: {0}")]
    Singular(#[from] SparseError),
    #[error("solution did not converge; reactive setpoints unavailable")]
    Unconverged,
}

#[derive(Clone, Debug)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, case bus order, pu.
    pub v: Vec<f64>,
    /// Voltage angle per bus, rad; the angle-reference bus holds 0.
    pub theta: Vec<f64>,
    /// Reactive output per generator (injection plus the generator bus's own
    /// static load), gen order, pu.
    pub q_g: Vec<f64>,
    /// Active output per generator, gen order, pu.
    pub p_g: Vec<f64>,
    /// Distributed-slack pickup k·w_i already included in `p_g`.
    pub slack_scale: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

/// Reactive setpoints Q_G0 in generator order.
pub fn reactive_setpoints(sol: &PowerFlowSolution) -> Result<Vec<f64>, PfError> {
    if !sol.converged {
        return Err(PfError::Unconverged);
    }
    Ok(sol.q_g.clone())
}

const MAX_ITER: usize = 30;
const TOL: f64 = 1e-8;

/// Flat-start solve: PQ buses at 1.0 pu, PV buses at their setpoints, all
/// angles zero.
pub fn solve_ac_powerflow(
    case: &NetworkCase,
    loads_pu: &[(usize, f64, f64)],
    gen_dispatch: &[(f64, f64)],
    participation: &[f64],
) -> Result<PowerFlowSolution, PfError> {
    solve_inner(case, loads_pu, gen_dispatch, participation, None)
}

/// Warm-start solve from a previous solution's voltage state.
pub fn solve_ac_powerflow_from(
    case: &NetworkCase,
    loads_pu: &[(usize, f64, f64)],
    gen_dispatch: &[(f64, f64)],
    participation: &[f64],
    start: &PowerFlowSolution,
) -> Result<PowerFlowSolution, PfError> {
    solve_inner(case, loads_pu, gen_dispatch, participation, Some(start))
}

fn solve_inner(
    case: &NetworkCase,
    loads_pu: &[(usize, f64, f64)],
    gen_dispatch: &[(f64, f64)],
    participation: &[f64],
    start: Option<&PowerFlowSolution>,
) -> Result<PowerFlowSolution, PfError> {
    let n = case.buses.len();
    let ng = case.generators.len();
    if ng == 0 {
        return Err(PfError::NoGenerators);
    }
    if gen_dispatch.len() != ng {
        return Err(PfError::DimensionMismatch { expected: ng, got: gen_dispatch.len() });
    }
    if participation.len() != ng {
        return Err(PfError::DimensionMismatch { expected: ng, got: participation.len() });
    }
    let wsum: f64 = participation.iter().sum();
    if !(wsum > 0.0) || participation.iter().any(|&w| w < 0.0) {
        return Err(PfError::BadParticipation);
    }

    let pos = case.bus_positions();

    // Imaginary part of the bus admittance matrix: +1/x off-diagonal,
    // −Σ 1/x on the diagonal. Stored as adjacency for O(nnz) evaluation;
    // parallel branches accumulate.
    let mut b_diag = alloc::vec![0.0f64; n];
    let mut edges: alloc::collections::BTreeMap<(usize, usize), f64> =
        alloc::collections::BTreeMap::new();
    for br in case.branches.iter().filter(|b| b.in_service) {
        let (i, j) = (pos[&br.from], pos[&br.to]);
        let y = 1.0 / br.x;
        b_diag[i] -= y;
        b_diag[j] -= y;
        *edges.entry((i.min(j), i.max(j))).or_insert(0.0) += y;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); n];
    for (&(i, j), &y) in &edges {
        adj[i].push((j, y));
        adj[j].push((i, y));
    }

    let mut p_load = alloc::vec![0.0f64; n];
    let mut q_load = alloc::vec![0.0f64; n];
    for &(bus, p, q) in loads_pu {
        let i = *pos.get(&bus).ok_or(PfError::UnknownLoadBus { bus })?;
        p_load[i] += p;
        q_load[i] += q;
    }

    // Per-bus scheduled generation and roles.
    let mut gen_at = alloc::vec![usize::MAX; n];
    let mut w_bus = alloc::vec![0.0f64; n];
    let mut p_disp = alloc::vec![0.0f64; n];
    let mut is_pv = alloc::vec![false; n];
    for (g, gen) in case.generators.iter().enumerate() {
        let i = pos[&gen.bus];
        gen_at[i] = g;
        w_bus[i] = participation[g] / wsum;
        p_disp[i] = gen_dispatch[g].0;
        is_pv[i] = true;
    }

    // Angle reference: generator bus with the largest participation (first
    // wins on ties); its P equation pairs with the slack unknown k.
    let ref_gen = (0..ng)
        .max_by(|&a, &b| {
            participation[a]
                .total_cmp(&participation[b])
                .then(pos[&case.generators[b].bus].cmp(&pos[&case.generators[a].bus]))
        })
        .expect("ng > 0");
    let ref_bus = pos[&case.generators[ref_gen].bus];

    // Unknown layout: θ (non-reference buses), V (PQ buses), k.
    let mut th_col = alloc::vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if i != ref_bus {
            th_col[i] = next;
            next += 1;
        }
    }
    let mut v_col = alloc::vec![usize::MAX; n];
    for i in 0..n {
        if !is_pv[i] {
            v_col[i] = next;
            next += 1;
        }
    }
    let k_col = next;
    let n_unknowns = next + 1;
    let row_of_p = |i: usize| if i == ref_bus { k_col } else { th_col[i] };

    let mut v = alloc::vec![1.0f64; n];
    let mut theta = alloc::vec![0.0f64; n];
    if let Some(s) = start {
        v.copy_from_slice(&s.v);
        theta.copy_from_slice(&s.theta);
    }
    for i in 0..n {
        if is_pv[i] {
            v[i] = gen_dispatch[gen_at[i]].1;
        }
    }
    let mut k_slack = 0.0f64;

    let mut p_calc = alloc::vec![0.0f64; n];
    let mut q_calc = alloc::vec![0.0f64; n];
    let mut iterations = 0;
    let mut max_mismatch = f64::INFINITY;

    while iterations < MAX_ITER {
        iterations += 1;

        // Lossless injections: P_i = V_iΣV_jB_ij sinθ_ij, Q_i = −V_iΣV_jB_ij cosθ_ij.
        for i in 0..n {
            let mut p = 0.0;
            let mut q = -v[i] * v[i] * b_diag[i];
            for &(j, b_ij) in &adj[i] {
                let d = theta[i] - theta[j];
                let (s, c) = (d.sin(), d.cos());
                p += v[i] * v[j] * b_ij * s;
                q -= v[i] * v[j] * b_ij * c;
            }
            p_calc[i] = p;
            q_calc[i] = q;
        }

        let mut f = alloc::vec![0.0f64; n_unknowns];
        for i in 0..n {
            let sched = if is_pv[i] { p_disp[i] + k_slack * w_bus[i] } else { 0.0 };
            f[row_of_p(i)] = p_calc[i] - (sched - p_load[i]);
            if !is_pv[i] {
                f[v_col[i]] = q_calc[i] - (-q_load[i]);
            }
        }
        max_mismatch = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max_mismatch < TOL {
            let mut p_g = alloc::vec![0.0f64; ng];
            let mut q_g = alloc::vec![0.0f64; ng];
            for i in 0..n {
                if is_pv[i] {
                    p_g[gen_at[i]] = p_calc[i] + p_load[i];
                    q_g[gen_at[i]] = q_calc[i] + q_load[i];
                }
            }
            return Ok(PowerFlowSolution {
                v,
                theta,
                q_g,
                p_g,
                slack_scale: k_slack,
                converged: true,
                iterations,
                max_mismatch,
            });
        }

        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            let rp = row_of_p(i);
            if is_pv[i] && w_bus[i] > 0.0 {
                triplets.push((rp, k_col, -w_bus[i]));
            }
            if i != ref_bus {
                triplets.push((rp, th_col[i], -q_calc[i] - b_diag[i] * v[i] * v[i]));
            }
            if !is_pv[i] {
                triplets.push((rp, v_col[i], p_calc[i] / v[i]));
                let rq = v_col[i];
                triplets.push((rq, th_col[i], p_calc[i]));
                triplets.push((rq, v_col[i], q_calc[i] / v[i] - b_diag[i] * v[i]));
            }
            for &(j, b_ij) in &adj[i] {
                let d = theta[i] - theta[j];
                let (s, c) = (d.sin(), d.cos());
                if j != ref_bus {
                    triplets.push((rp, th_col[j], -v[i] * v[j] * b_ij * c));
                }
                if !is_pv[j] {
                    triplets.push((rp, v_col[j], v[i] * b_ij * s));
                }
                if !is_pv[i] {
                    let rq = v_col[i];
                    if j != ref_bus {
                        triplets.push((rq, th_col[j], -v[i] * v[j] * b_ij * s));
                    }
                    if !is_pv[j] {
                        triplets.push((rq, v_col[j], -v[i] * b_ij * c));
                    }
                }
            }
        }

        let jac = SparseMatrix::from_triplets(n_unknowns, triplets)?;
        let lu = jac.factorize()?;
        let mut dx = f;
        for x in dx.iter_mut() {
            *x = -*x;
        }
        lu.solve_in_place(&mut dx);

        for i in 0..n {
            if i != ref_bus {
                theta[i] += dx[th_col[i]];
            }
            if !is_pv[i] {
                v[i] += dx[v_col[i]];
            }
        }
        k_slack += dx[k_col];
    }

    Err(PfError::NotConverged { iterations, max_mismatch })
}
