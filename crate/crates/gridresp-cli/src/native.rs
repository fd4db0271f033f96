//! Native case format: the same network data a MATPOWER file carries, as
//! documented TOML. Device kinds and dynamic parameters deliberately live in
//! separate parameter files (see `params`), keeping one case reusable across
//! device mixes; generators parse as generic synchronous machines.

use gridresp_core::{Branch, Bus, BusKind, DeviceParams, Generator, Load, NetworkCase};
use serde::{Deserialize, Serialize};

fn default_true() -> bool {
    true
}

fn default_f0() -> f64 {
    60.0
}

#[derive(Debug, Serialize, Deserialize)]
struct RawBus {
    id: usize,
    kind: BusKind,
    #[serde(default)]
    base_kv: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawBranch {
    from: usize,
    to: usize,
    x: f64,
    #[serde(default = "default_true")]
    in_service: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawGenerator {
    bus: usize,
    s_rated_mva: f64,
    #[serde(default)]
    dispatch_mw: f64,
    #[serde(default = "default_v")]
    v_setpoint: f64,
}

fn default_v() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLoad {
    bus: usize,
    #[serde(default)]
    p_mw: f64,
    #[serde(default)]
    q_mvar: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCase {
    name: String,
    base_mva: f64,
    #[serde(default = "default_f0")]
    f0: f64,
    #[serde(rename = "bus")]
    buses: Vec<RawBus>,
    #[serde(rename = "branch")]
    branches: Vec<RawBranch>,
    #[serde(rename = "generator")]
    generators: Vec<RawGenerator>,
    #[serde(rename = "load", default)]
    loads: Vec<RawLoad>,
}

#[derive(Debug, thiserror::Error)]
pub enum NativeError {
    #[error("TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("serializing: {0}")]
    Ser(#[from] toml::ser::Error),
    #[error("case validation: {0}")]
    Invalid(#[from] gridresp_core::case::CaseError),
}

pub fn parse_case(src: &str) -> Result<NetworkCase, NativeError> {
    let raw: RawCase = toml::from_str(src)?;
    let case = NetworkCase {
        name: raw.name,
        base_mva: raw.base_mva,
        f0: raw.f0,
        buses: raw
            .buses
            .into_iter()
            .map(|b| Bus { id: b.id, kind: b.kind, base_kv: b.base_kv })
            .collect(),
        branches: raw
            .branches
            .into_iter()
            .map(|b| Branch { from: b.from, to: b.to, x: b.x, in_service: b.in_service })
            .collect(),
        generators: raw
            .generators
            .into_iter()
            .map(|g| Generator {
                bus: g.bus,
                s_rated_mva: g.s_rated_mva,
                dispatch_mw: g.dispatch_mw,
                v_setpoint: g.v_setpoint,
                device: DeviceParams::generic_sg(g.s_rated_mva),
            })
            .collect(),
        loads: raw
            .loads
            .into_iter()
            .map(|l| Load { bus: l.bus, p_mw: l.p_mw, q_mvar: l.q_mvar })
            .collect(),
    };
    Ok(case.validated()?)
}

/// Renders a case back to the native format (used by the synthetic-case
/// generator). Device parameters are not represented, by design.
pub fn to_toml(case: &NetworkCase) -> Result<String, NativeError> {
    let raw = RawCase {
        name: case.name.clone(),
        base_mva: case.base_mva,
        f0: case.f0,
        buses: case
            .buses
            .iter()
            .map(|b| RawBus { id: b.id, kind: b.kind, base_kv: b.base_kv })
            .collect(),
        branches: case
            .branches
            .iter()
            .map(|b| RawBranch { from: b.from, to: b.to, x: b.x, in_service: b.in_service })
            .collect(),
        generators: case
            .generators
            .iter()
            .map(|g| RawGenerator {
                bus: g.bus,
                s_rated_mva: g.s_rated_mva,
                dispatch_mw: g.dispatch_mw,
                v_setpoint: g.v_setpoint,
            })
            .collect(),
        loads: case
            .loads
            .iter()
            .map(|l| RawLoad { bus: l.bus, p_mw: l.p_mw, q_mvar: l.q_mvar })
            .collect(),
    };
    Ok(toml::to_string(&raw)?)
}
