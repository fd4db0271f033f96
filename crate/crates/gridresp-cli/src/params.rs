//! Device parameter files and the rules that bind a device to every
//! generator bus. A parameter file carries `[[sg]]` and `[[gfm]]` records
//! keyed by bus; capacity stays with the case (fitted gains transfer across
//! capacities — only the per-unit base factor changes), so records hold only
//! dynamic parameters.
//!
//! Resolution per generator bus:
//!   1. kind = explicit override if given, else the single record kind
//!      present for the bus, else SG; a bus with records of both kinds and
//!      no override is ambiguous and rejected;
//!   2. parameters = the record for (bus, kind) when present, else the
//!      generic set for that kind at the generator's rated capacity.

use std::collections::BTreeMap;

use gridresp_core::{
    DeviceKind, DeviceParams, Generator, GfmFreqParams, GfmVoltParams, NetworkCase, SgFreqParams,
    SgVoltParams,
};
use serde::Deserialize;

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct SgRecord {
    pub bus: usize,
    pub m: f64,
    pub d: f64,
    #[serde(default)]
    pub d_prime: f64,
    #[serde(default = "default_one")]
    pub k: f64,
    pub r_sg: f64,
    pub t_sg: f64,
    pub g: f64,
    pub t_g: f64,
    pub t_i: f64,
    pub k_p: f64,
    pub k_i: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GfmRecord {
    pub bus: usize,
    pub r: f64,
    pub t_c: f64,
    pub r_q: f64,
    pub t_q: f64,
}

#[derive(Debug, Default, Deserialize)]
struct ParamFile {
    #[serde(default)]
    sg: Vec<SgRecord>,
    #[serde(default)]
    gfm: Vec<GfmRecord>,
}

#[derive(Debug, Default)]
pub struct DeviceTable {
    sg: BTreeMap<usize, SgRecord>,
    gfm: BTreeMap<usize, GfmRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error("TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("duplicate {kind:?} record for bus {bus}")]
    Duplicate { kind: DeviceKind, bus: usize },
    #[error("record references bus {0}, which hosts no generator")]
    NotAGenerator(usize),
    #[error("override references bus {0}, which hosts no generator")]
    UnknownOverride(usize),
    #[error("bus {0} has SG and GFM records but no override choosing between them")]
    Ambiguous(usize),
    #[error("device parameters at bus {bus}: {source}")]
    BadDevice { bus: usize, source: gridresp_core::device::ParamError },
}

impl DeviceTable {
    /// Parses one file and merges it in; duplicate (bus, kind) pairs across
    /// all merged files are rejected.
    pub fn merge_toml(&mut self, src: &str) -> Result<(), ParamsError> {
        let file: ParamFile = toml::from_str(src)?;
        for rec in file.sg {
            if self.sg.insert(rec.bus, rec.clone()).is_some() {
                return Err(ParamsError::Duplicate { kind: DeviceKind::Sg, bus: rec.bus });
            }
        }
        for rec in file.gfm {
            if self.gfm.insert(rec.bus, rec.clone()).is_some() {
                return Err(ParamsError::Duplicate { kind: DeviceKind::Gfm, bus: rec.bus });
            }
        }
        Ok(())
    }

    fn sg_device(&self, bus: usize, s_i: f64) -> DeviceParams {
        match self.sg.get(&bus) {
            Some(r) => DeviceParams::Sg {
                freq: SgFreqParams {
                    s_i,
                    m: r.m,
                    d: r.d,
                    d_prime: r.d_prime,
                    k: r.k,
                    r_sg: r.r_sg,
                    t_sg: r.t_sg,
                },
                volt: SgVoltParams { s_i, g: r.g, t_g: r.t_g, t_i: r.t_i, k_p: r.k_p, k_i: r.k_i },
            },
            None => DeviceParams::generic_sg(s_i),
        }
    }

    fn gfm_device(&self, bus: usize, s_i: f64) -> DeviceParams {
        match self.gfm.get(&bus) {
            Some(r) => DeviceParams::Gfm {
                freq: GfmFreqParams { s_i, r: r.r, t_c: r.t_c },
                volt: GfmVoltParams { s_i, r_q: r.r_q, t_q: r.t_q },
            },
            None => DeviceParams::generic_gfm(s_i),
        }
    }

    /// Applies the resolution rules to every generator of the case, in case
    /// order. `overrides` maps bus id → kind.
    pub fn resolve(
        &self,
        case: &NetworkCase,
        overrides: &BTreeMap<usize, DeviceKind>,
    ) -> Result<Vec<Generator>, ParamsError> {
        let gen_bus = |bus: usize| case.generators.iter().any(|g| g.bus == bus);
        for &bus in self.sg.keys().chain(self.gfm.keys()) {
            if !gen_bus(bus) {
                return Err(ParamsError::NotAGenerator(bus));
            }
        }
        for &bus in overrides.keys() {
            if !gen_bus(bus) {
                return Err(ParamsError::UnknownOverride(bus));
            }
        }

        let mut out = Vec::with_capacity(case.generators.len());
        for g in &case.generators {
            let kind = match overrides.get(&g.bus) {
                Some(&k) => k,
                None => match (self.sg.contains_key(&g.bus), self.gfm.contains_key(&g.bus)) {
                    (true, true) => return Err(ParamsError::Ambiguous(g.bus)),
                    (false, true) => DeviceKind::Gfm,
                    _ => DeviceKind::Sg,
                },
            };
            let device = match kind {
                DeviceKind::Sg => self.sg_device(g.bus, g.s_rated_mva),
                DeviceKind::Gfm => self.gfm_device(g.bus, g.s_rated_mva),
            };
            device
                .validate()
                .map_err(|source| ParamsError::BadDevice { bus: g.bus, source })?;
            out.push(Generator { device, ..g.clone() });
        }
        Ok(out)
    }
}
