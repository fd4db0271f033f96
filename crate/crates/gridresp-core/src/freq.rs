//! Assembly of the network-coupled frequency model.
//!
//! Device swing/droop/governor ODEs are stitched together through the reduced
//! susceptance: generator electrical power is B̃_r·Δδ_rel (angles relative to
//! the reference device, chosen as the last generator) plus B_L·ΔP_L from
//! load-bus injections. State ordering is fixed as
//! [Δδ_rel (n−1); Δω (n); ΔP_M (SGs in list order)], so n_s = 2n − 1 + |SG|.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::case::{Constants, DisturbanceSpec, Generator};
use crate::device::{alpha, DeviceKind, DeviceParams, ParamError};
use crate::lti::{InputKind, InputLabel, LtiModel, StateKind, StateLabel};
use crate::reduction::ReducedNetwork;

#[derive(Debug, thiserror::Error)]
pub enum FreqError {
    #[error("need at least 2 generators, found {n}")]
    TooFewDevices { n: usize },
    #[error("device list does not match reduced network: slot {index} has bus {got}, network expects {expected}")]
    DeviceBusMismatch { index: usize, expected: usize, got: usize },
    #[error("device list length {got} does not match reduced network generator count {expected}")]
    DeviceCountMismatch { expected: usize, got: usize },
    #[error("active-power disturbance at generator bus {bus} is unsupported; attach a stub load bus instead")]
    DisturbanceAtGeneratorBus { bus: usize },
    #[error("disturbance bus {bus} is not a load bus of the reduced network")]
    UnknownDisturbanceBus { bus: usize },
    #[error("device parameters invalid: {0}")]
    Param(#[from] ParamError),
    #[error("total droop stiffness is zero; no device opposes a power imbalance")]
    ZeroStiffness,
}

/// Steady-state power/frequency stiffness c_i of one device (pu power per pu
/// frequency on the system base): what the device ultimately contributes
/// against a sustained imbalance.
pub fn droop_stiffness(device: &DeviceParams, s_base: f64) -> Result<f64, ParamError> {
    let a = alpha(s_base, device.s_rated())?;
    Ok(match device {
        DeviceParams::Sg { freq, .. } => (freq.d + freq.k / freq.r_sg) / a,
        DeviceParams::Gfm { freq, .. } => 1.0 / (a * freq.r),
    })
}

/// Common post-disturbance frequency offset: Δω_ss = −ΣΔP_L / Σ c_i, with
/// ΔP_L load-side pu (a net load increase gives a negative offset).
pub fn steady_state_frequency(
    devices: &[DeviceParams],
    s_base: f64,
    total_dp_l: f64,
) -> Result<f64, FreqError> {
    let mut total = 0.0;
    for d in devices {
        total += droop_stiffness(d, s_base)?;
    }
    if total <= 0.0 {
        return Err(FreqError::ZeroStiffness);
    }
    Ok(-total_dp_l / total)
}

/// Builds ẋ = A_f·x + B_f·ΔP_L for the generator fleet on a reduced network.
///
/// `gens` must be ordered to match `net.gen_index`; the last generator is the
/// angle reference. The disturbance is load-side (a load step of L MW enters
/// as ΔP_L = +L) and lands on its load bus, converted to pu on `s_base`.
/// Disturbances at generator buses are rejected rather than approximated.
pub fn assemble_frequency_model(
    net: &ReducedNetwork,
    gens: &[Generator],
    disturbance: &DisturbanceSpec,
    constants: &Constants,
    s_base: f64,
) -> Result<LtiModel, FreqError> {
    let n = net.gen_index.len();
    if gens.len() != n {
        return Err(FreqError::DeviceCountMismatch { expected: n, got: gens.len() });
    }
    for (i, g) in gens.iter().enumerate() {
        if g.bus != net.gen_index[i] {
            return Err(FreqError::DeviceBusMismatch {
                index: i,
                expected: net.gen_index[i],
                got: g.bus,
            });
        }
    }
    if n < 2 {
        return Err(FreqError::TooFewDevices { n });
    }

    let sg_slots: Vec<usize> = gens
        .iter()
        .enumerate()
        .filter(|(_, g)| g.device.kind() == DeviceKind::Sg)
        .map(|(i, _)| i)
        .collect();
    let n_sg = sg_slots.len();
    let n_s = (n - 1) + n + n_sg;
    let n_loads = net.load_index.len();

    let omega_col = |i: usize| (n - 1) + i;
    let pm_row_of = |s: usize| 2 * n - 1 + s;

    let mut a = DMatrix::zeros(n_s, n_s);
    let mut b = DMatrix::zeros(n_s, n_loads);

    // Relative-angle rows: dΔδ_{i,ref}/dt = −D′_i Δδ_{i,ref} + ω₀(Δω_i − Δω_ref).
    // The diagonal damping uses device i's own D′ (SG) or 0 (GFM); the
    // reference device's D′ does not enter, per the diagonal model form.
    for i in 0..(n - 1) {
        if let DeviceParams::Sg { freq, .. } = &gens[i].device {
            a[(i, i)] = -freq.d_prime;
        }
        a[(i, omega_col(i))] = constants.omega0;
        a[(i, omega_col(n - 1))] = -constants.omega0;
    }

    // Frequency rows: network coupling through B̃_r (reference column
    // dropped), self-damping, governor feed-in, and the load-injection gain.
    for i in 0..n {
        let row = omega_col(i);
        let a_i = alpha(s_base, gens[i].device.s_rated())?;
        let (b_i, d_i) = match &gens[i].device {
            DeviceParams::Sg { freq, .. } => (-a_i / freq.m, -freq.d / freq.m),
            DeviceParams::Gfm { freq, .. } => {
                let g = -a_i * freq.r / freq.t_c;
                (g, -1.0 / freq.t_c)
            }
        };
        for j in 0..(n - 1) {
            a[(row, j)] = b_i * net.b_r[(i, j)];
        }
        a[(row, row)] = d_i;
        for (l, _) in net.load_index.iter().enumerate() {
            b[(row, l)] = -b_i * net.b_l[(i, l)];
        }
    }
    for (s, &i) in sg_slots.iter().enumerate() {
        if let DeviceParams::Sg { freq, .. } = &gens[i].device {
            a[(omega_col(i), pm_row_of(s))] = -1.0 / freq.m;
            a[(pm_row_of(s), omega_col(i))] = freq.k / (freq.t_sg * freq.r_sg);
            a[(pm_row_of(s), pm_row_of(s))] = -1.0 / freq.t_sg;
        }
    }

    let mut u = DVector::zeros(n_loads);
    if disturbance.dp_mw != 0.0 {
        match net.load_index.iter().position(|&bus| bus == disturbance.bus) {
            Some(pos) => u[pos] = disturbance.dp_mw / s_base,
            None => {
                return Err(if net.gen_index.contains(&disturbance.bus) {
                    FreqError::DisturbanceAtGeneratorBus { bus: disturbance.bus }
                } else {
                    FreqError::UnknownDisturbanceBus { bus: disturbance.bus }
                });
            }
        }
    }

    let mut states = Vec::with_capacity(n_s);
    for i in 0..(n - 1) {
        states.push(StateLabel { kind: StateKind::DeltaRel, bus: gens[i].bus });
    }
    for g in gens {
        states.push(StateLabel { kind: StateKind::Omega, bus: g.bus });
    }
    for &i in &sg_slots {
        states.push(StateLabel { kind: StateKind::Pm, bus: gens[i].bus });
    }
    let inputs = net
        .load_index
        .iter()
        .map(|&bus| InputLabel { kind: InputKind::LoadPower, bus })
        .collect();

    Ok(LtiModel { a, b, u, states, inputs })
}
