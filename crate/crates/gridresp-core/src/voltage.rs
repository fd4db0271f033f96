//! Per-generator reactive disturbance estimation and the decoupled voltage
//! response model.
//!
//! The network enters only through two power-flow solves: the reactive
//! output shift ΔQ_G each generator must absorb to restore its terminal
//! voltage. The dynamics themselves are block-diagonal per device; the state
//! Δ|V| is the setpoint-minus-actual error (positive during a dip). SG AVR
//! states x_PI for GFM devices are removed outright rather than zero-padded,
//! so n_s = 2·|SG| + |GFM| and A_v carries no structural zero eigenvalues.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::case::{DisturbanceSpec, Generator, NetworkCase};
use crate::device::{alpha, DeviceParams, ParamError};
use crate::freq::droop_stiffness;
use crate::lti::{InputKind, InputLabel, LtiModel, StateKind, StateLabel};
use crate::powerflow::{
    reactive_setpoints, solve_ac_powerflow, solve_ac_powerflow_from, PfError,
};

#[derive(Debug, thiserror::Error)]
pub enum VoltError {
    #[error("base power flow failed: {0}")]
    BaseFlow(#[source] PfError),
    #[error("post-disturbance power flow failed: {0}")]
    PostFlow(#[source] PfError),
    #[error("disturbance references unknown bus {bus}")]
    UnknownDisturbanceBus { bus: usize },
    #[error("device parameters invalid: {0}")]
    Param(#[from] ParamError),
    #[error("reactive disturbance has {got} entries for {expected} generators")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Reactive power change each generator absorbs, gen order, pu.
#[derive(Clone, Debug)]
pub struct ReactiveDisturbance {
    pub dq_g: Vec<f64>,
    pub gen_buses: Vec<usize>,
}

/// ΔQ_G = Q_G(post) − Q_G0: two power-flow solves (flat-start base, then the
/// disturbed case warm-started from it, slack distributed by droop
/// stiffness). The disturbance is a load-side step, so it adds directly to
/// the bus's load.
pub fn estimate_reactive_disturbance(
    case: &NetworkCase,
    disturbance: &DisturbanceSpec,
) -> Result<ReactiveDisturbance, VoltError> {
    let gen_buses: Vec<usize> = case.generators.iter().map(|g| g.bus).collect();
    if disturbance.is_null() {
        return Ok(ReactiveDisturbance { dq_g: alloc::vec![0.0; gen_buses.len()], gen_buses });
    }
    if !case.buses.iter().any(|b| b.id == disturbance.bus) {
        return Err(VoltError::UnknownDisturbanceBus { bus: disturbance.bus });
    }

    let s_b = case.base_mva;
    let loads: Vec<(usize, f64, f64)> = case
        .loads
        .iter()
        .map(|l| (l.bus, l.p_mw / s_b, l.q_mvar / s_b))
        .collect();
    let dispatch: Vec<(f64, f64)> = case
        .generators
        .iter()
        .map(|g| (g.dispatch_mw / s_b, g.v_setpoint))
        .collect();
    let mut participation = Vec::with_capacity(case.generators.len());
    for g in &case.generators {
        participation.push(droop_stiffness(&g.device, s_b)?);
    }

    let base =
        solve_ac_powerflow(case, &loads, &dispatch, &participation).map_err(VoltError::BaseFlow)?;
    let q0 = reactive_setpoints(&base).map_err(VoltError::BaseFlow)?;

    let mut post_loads = loads;
    post_loads.push((
        disturbance.bus,
        disturbance.dp_mw / s_b,
        disturbance.dq_mvar / s_b,
    ));
    let post = solve_ac_powerflow_from(case, &post_loads, &dispatch, &participation, &base)
        .map_err(VoltError::PostFlow)?;
    let q1 = reactive_setpoints(&post).map_err(VoltError::PostFlow)?;

    let dq_g = q1.iter().zip(&q0).map(|(a, b)| a - b).collect();
    Ok(ReactiveDisturbance { dq_g, gen_buses })
}

/// Builds the decoupled voltage model ẋ = A_v·x + B_v·ΔQ_G with states
/// [Δ|V| (all generators); x_PI (SGs only)].
pub fn assemble_voltage_model(
    gens: &[Generator],
    dist: &ReactiveDisturbance,
    s_base: f64,
) -> Result<LtiModel, VoltError> {
    let n = gens.len();
    if dist.dq_g.len() != n {
        return Err(VoltError::DimensionMismatch { expected: n, got: dist.dq_g.len() });
    }

    let sg_slots: Vec<usize> = gens
        .iter()
        .enumerate()
        .filter(|(_, g)| matches!(g.device, DeviceParams::Sg { .. }))
        .map(|(i, _)| i)
        .collect();
    let n_s = n + sg_slots.len();

    let mut a = DMatrix::zeros(n_s, n_s);
    let mut b = DMatrix::zeros(n_s, n);

    for (i, g) in gens.iter().enumerate() {
        let a_i = alpha(s_base, g.device.s_rated())?;
        match &g.device {
            DeviceParams::Sg { volt, .. } => {
                a[(i, i)] = -(volt.g * volt.k_p + 1.0) / volt.t_g;
                b[(i, i)] = a_i * volt.g / volt.t_g;
            }
            DeviceParams::Gfm { volt, .. } => {
                a[(i, i)] = -1.0 / volt.t_q;
                b[(i, i)] = a_i * volt.r_q / volt.t_q;
            }
        }
    }
    for (s, &i) in sg_slots.iter().enumerate() {
        if let DeviceParams::Sg { volt, .. } = &gens[i].device {
            a[(i, n + s)] = -volt.g * volt.k_i / volt.t_g;
            a[(n + s, i)] = 1.0 / volt.t_i;
        }
    }

    let u = DVector::from_iterator(n, dist.dq_g.iter().copied());
    let mut states = Vec::with_capacity(n_s);
    for g in gens {
        states.push(StateLabel { kind: StateKind::Dv, bus: g.bus });
    }
    for &i in &sg_slots {
        states.push(StateLabel { kind: StateKind::XPi, bus: gens[i].bus });
    }
    let inputs = gens
        .iter()
        .map(|g| InputLabel { kind: InputKind::GenReactive, bus: g.bus })
        .collect();

    Ok(LtiModel { a, b, u, states, inputs })
}
