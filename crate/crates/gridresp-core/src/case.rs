//! Raw network description: buses, branches, generators, loads, and the
//! disturbance that a study applies to it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::device::DeviceParams;

/// Role of a bus in the reduced model. Generator buses host exactly one
/// device; everything else (plain loads, GFLs without grid support) is a
/// load bus and gets Kron-eliminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BusKind {
    Generator,
    Load,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Base voltage in kV; informational only, the model is per-unit.
    pub base_kv: f64,
}

/// Transmission branch. Only the series reactance enters the model;
/// resistance, charging and taps in input files are dropped at parse time.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series reactance in pu on the system base. Strictly positive.
    pub x: f64,
    pub in_service: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Load {
    pub bus: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
}

/// One generation device (SG or GFM) attached to a bus. A bus hosts at most
/// one device; cases with several machines on a bus must be pre-aggregated.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Generator {
    pub bus: usize,
    /// Rated capacity S_i in MVA; sets the per-device base scaling α_i = S_B/S_i.
    pub s_rated_mva: f64,
    /// Active-power dispatch used as the power-flow setpoint.
    pub dispatch_mw: f64,
    /// Terminal voltage setpoint held by the power flow (PV bus).
    pub v_setpoint: f64,
    pub device: DeviceParams,
}

/// A validated study case. Construct with [`NetworkCase::validated`]; every
/// operation in this crate assumes the invariants it enforces.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkCase {
    pub name: String,
    /// System base S_B in MVA.
    pub base_mva: f64,
    /// Nominal frequency in Hz.
    pub f0: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

/// Step disturbance applied at t = 0. ΔP/ΔQ are load-side power changes,
/// positive for a load increase: a load step of L MW is ΔP = +L (and drives
/// frequency down).
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisturbanceSpec {
    pub bus: usize,
    pub dp_mw: f64,
    pub dq_mvar: f64,
}

impl DisturbanceSpec {
    pub fn is_null(&self) -> bool {
        self.dp_mw == 0.0 && self.dq_mvar == 0.0
    }
}

/// Nominal frequency constants shared by every device model.
#[derive(Clone, Copy, Debug)]
pub struct Constants {
    pub f0: f64,
    /// ω₀ = 2π·f0 in rad/s.
    pub omega0: f64,
}

impl Constants {
    pub fn new(f0: f64) -> Self {
        Self { f0, omega0: 2.0 * core::f64::consts::PI * f0 }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::new(60.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("system base must be positive, got {0}")]
    NonpositiveBase(f64),
    #[error("nominal frequency must be positive, got {0}")]
    NonpositiveF0(f64),
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("branch {from}-{to} references unknown bus {missing}")]
    UnknownBranchBus { from: usize, to: usize, missing: usize },
    #[error("branch {from}-{to} is a self-loop")]
    SelfLoop { from: usize, to: usize },
    #[error("branch {from}-{to} has nonpositive reactance {x}")]
    NonpositiveReactance { from: usize, to: usize, x: f64 },
    #[error("generator references unknown bus {0}")]
    UnknownGeneratorBus(usize),
    #[error("bus {0} hosts more than one generator; aggregate devices per bus first")]
    MultipleGenerators(usize),
    #[error("generator at bus {bus} has nonpositive rated capacity {s_mva} MVA")]
    NonpositiveCapacity { bus: usize, s_mva: f64 },
    #[error("bus {0} is marked {1:?} but the generator list disagrees")]
    KindMismatch(usize, BusKind),
    #[error("load references unknown bus {0}")]
    UnknownLoadBus(usize),
    #[error("network is not connected over in-service branches (bus {0} unreachable)")]
    Disconnected(usize),
    #[error("device parameters at bus {bus}: {source}")]
    BadDevice {
        bus: usize,
        source: crate::device::ParamError,
    },
}

impl NetworkCase {
    /// Validates every case invariant and returns the case by value.
    pub fn validated(self) -> Result<Self, CaseError> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) {
            return Err(CaseError::NonpositiveBase(self.base_mva));
        }
        if !(self.f0 > 0.0) {
            return Err(CaseError::NonpositiveF0(self.f0));
        }

        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(CaseError::DuplicateBus(b.id));
            }
        }

        for br in &self.branches {
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(CaseError::UnknownBranchBus { from: br.from, to: br.to, missing: end });
                }
            }
            if br.from == br.to {
                return Err(CaseError::SelfLoop { from: br.from, to: br.to });
            }
            if !(br.x > 0.0) {
                return Err(CaseError::NonpositiveReactance { from: br.from, to: br.to, x: br.x });
            }
        }

        let mut gen_buses = BTreeSet::new();
        for g in &self.generators {
            if !ids.contains(&g.bus) {
                return Err(CaseError::UnknownGeneratorBus(g.bus));
            }
            if !gen_buses.insert(g.bus) {
                return Err(CaseError::MultipleGenerators(g.bus));
            }
            if !(g.s_rated_mva > 0.0) {
                return Err(CaseError::NonpositiveCapacity { bus: g.bus, s_mva: g.s_rated_mva });
            }
            g.device
                .validate()
                .map_err(|source| CaseError::BadDevice { bus: g.bus, source })?;
        }

        // Declared bus kinds must agree with where devices actually sit.
        for b in &self.buses {
            let hosts = gen_buses.contains(&b.id);
            let ok = match b.kind {
                BusKind::Generator => hosts,
                BusKind::Load => !hosts,
            };
            if !ok {
                return Err(CaseError::KindMismatch(b.id, b.kind));
            }
        }

        for l in &self.loads {
            if !ids.contains(&l.bus) {
                return Err(CaseError::UnknownLoadBus(l.bus));
            }
        }

        self.check_connected()?;
        Ok(())
    }

    fn check_connected(&self) -> Result<(), CaseError> {
        if self.buses.is_empty() {
            return Ok(());
        }
        let pos = self.bus_positions();
        let mut adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); self.buses.len()];
        for br in self.branches.iter().filter(|b| b.in_service) {
            let (f, t) = (pos[&br.from], pos[&br.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = alloc::vec![false; self.buses.len()];
        let mut stack = alloc::vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(CaseError::Disconnected(self.buses[i].id)),
        }
    }

    /// Map from bus id to position in `buses`.
    pub fn bus_positions(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Generator bus ids in case order. This ordering is the device ordering
    /// everywhere downstream; the last entry is the reference device.
    pub fn gen_buses(&self) -> Vec<usize> {
        self.generators.iter().map(|g| g.bus).collect()
    }

    /// Non-generator bus ids in bus-list order.
    pub fn load_buses(&self) -> Vec<usize> {
        let gens: BTreeSet<usize> = self.gen_buses().into_iter().collect();
        self.buses.iter().map(|b| b.id).filter(|id| !gens.contains(id)).collect()
    }

    /// Total static load (P MW, Q MVAR) attached to a bus.
    pub fn load_at(&self, bus: usize) -> (f64, f64) {
        self.loads
            .iter()
            .filter(|l| l.bus == bus)
            .fold((0.0, 0.0), |(p, q), l| (p + l.p_mw, q + l.q_mvar))
    }
}
