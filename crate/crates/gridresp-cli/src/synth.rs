//! The `synth` subcommand: deterministic random test networks of a given
//! size, written in the native TOML case format.

use std::path::PathBuf;

use gridresp_core::{Branch, Bus, BusKind, DeviceParams, Generator, Load, NetworkCase};

use crate::emit;
use crate::error::{CliError, Stage};
use crate::native;

/// Splitmix-style LCG; quality is irrelevant here, reproducibility is not.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        (self.unit() * n as f64) as usize % n.max(1)
    }
}

pub struct SynthArgs {
    pub buses: usize,
    pub gens: usize,
    pub gfm_share: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Random connected network: a spanning tree grown bus by bus plus ~25%
/// chord branches. Generators occupy the first `gens` buses; loads fill a
/// random subset of the rest.
pub fn synth_case(args: &SynthArgs) -> Result<NetworkCase, CliError> {
    if args.buses < 2 {
        return Err(CliError::new(Stage::Usage, "need at least 2 buses"));
    }
    if args.gens < 1 || args.gens >= args.buses {
        return Err(CliError::new(
            Stage::Usage,
            format!("gens must be in [1, buses), got {} of {}", args.gens, args.buses),
        ));
    }
    if !(0.0..=1.0).contains(&args.gfm_share) {
        return Err(CliError::new(
            Stage::Usage,
            format!("gfm-share must be in [0, 1], got {}", args.gfm_share),
        ));
    }

    let mut rng = Lcg::new(args.seed);
    let n = args.buses;
    let n_gfm = (args.gfm_share * args.gens as f64).round() as usize;

    let mut branches = Vec::new();
    for i in 1..n {
        let parent = rng.below(i);
        branches.push(Branch {
            from: parent + 1,
            to: i + 1,
            x: rng.range(0.01, 0.3),
            in_service: true,
        });
    }
    let n_chords = n / 4;
    let mut attempts = 0;
    while branches.len() < n - 1 + n_chords && attempts < 20 * n_chords + 20 {
        attempts += 1;
        let (a, b) = (rng.below(n) + 1, rng.below(n) + 1);
        if a == b || branches.iter().any(|br| (br.from, br.to) == (a, b) || (br.to, br.from) == (a, b))
        {
            continue;
        }
        branches.push(Branch { from: a, to: b, x: rng.range(0.01, 0.3), in_service: true });
    }

    let mut loads = Vec::new();
    for bus in args.gens + 1..=n {
        // Roughly 70% of non-generator buses carry load.
        if rng.unit() < 0.7 {
            let p = rng.range(5.0, 50.0);
            loads.push(Load { bus, p_mw: p, q_mvar: 0.3 * p });
        }
    }
    if loads.is_empty() {
        let p = rng.range(5.0, 50.0);
        loads.push(Load { bus: n, p_mw: p, q_mvar: 0.3 * p });
    }
    let total_load: f64 = loads.iter().map(|l| l.p_mw).sum();

    let mut generators = Vec::new();
    for g in 0..args.gens {
        let s = rng.range(80.0, 400.0);
        let device =
            if g < n_gfm { DeviceParams::generic_gfm(s) } else { DeviceParams::generic_sg(s) };
        generators.push(Generator {
            bus: g + 1,
            s_rated_mva: s,
            dispatch_mw: total_load / args.gens as f64,
            v_setpoint: 1.0,
            device,
        });
    }

    let buses = (1..=n)
        .map(|id| Bus {
            id,
            kind: if id <= args.gens { BusKind::Generator } else { BusKind::Load },
            base_kv: 230.0,
        })
        .collect();

    NetworkCase {
        name: format!("synth-{}bus-{}gen-seed{}", n, args.gens, args.seed),
        base_mva: 100.0,
        f0: 60.0,
        buses,
        branches,
        generators,
        loads,
    }
    .validated()
    .map_err(|e| CliError::new(Stage::Case, e))
}

pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let case = synth_case(args)?;
    let text = native::to_toml(&case).map_err(|e| CliError::new(Stage::Output, e))?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            emit::create_dir(dir)?;
        }
    }
    emit::write_bytes(&args.out, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridresp_core::DeviceKind;

    fn args(buses: usize, gens: usize, share: f64, seed: u64) -> SynthArgs {
        SynthArgs { buses, gens, gfm_share: share, seed, out: PathBuf::from("unused.toml") }
    }

    #[test]
    fn cases_are_valid_and_deterministic() {
        let a = synth_case(&args(40, 8, 0.5, 7)).unwrap();
        let b = synth_case(&args(40, 8, 0.5, 7)).unwrap();
        assert_eq!(native::to_toml(&a).unwrap(), native::to_toml(&b).unwrap());
        assert_eq!(a.generators.len(), 8);
        let gfm = a.generators.iter().filter(|g| g.device.kind() == DeviceKind::Gfm).count();
        assert_eq!(gfm, 4);

        let c = synth_case(&args(40, 8, 0.5, 8)).unwrap();
        assert_ne!(native::to_toml(&a).unwrap(), native::to_toml(&c).unwrap());
    }

    #[test]
    fn round_trips_through_native_format() {
        let case = synth_case(&args(25, 5, 0.0, 3)).unwrap();
        let text = native::to_toml(&case).unwrap();
        let back = native::parse_case(&text).unwrap();
        assert_eq!(back.buses.len(), 25);
        assert_eq!(back.branches.len(), case.branches.len());
        // Native parsing assigns placeholder devices; capacities must survive.
        for (g0, g1) in case.generators.iter().zip(&back.generators) {
            assert_eq!(g0.bus, g1.bus);
            assert_eq!(g0.s_rated_mva, g1.s_rated_mva);
        }
    }

    #[test]
    fn argument_validation() {
        assert!(synth_case(&args(1, 1, 0.0, 0)).is_err());
        assert!(synth_case(&args(10, 10, 0.0, 0)).is_err());
        assert!(synth_case(&args(10, 3, 1.5, 0)).is_err());
    }

    /// Big instances stay connected (validated() checks connectivity).
    #[test]
    fn large_case_builds() {
        let case = synth_case(&args(500, 40, 0.25, 42)).unwrap();
        assert_eq!(case.buses.len(), 500);
        let gfm = case.generators.iter().filter(|g| g.device.kind() == DeviceKind::Gfm).count();
        assert_eq!(gfm, 10);
    }
}
