use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridresp_cli::config::{load_scenario, CliOverrides};
use gridresp_cli::error::CliError;
use gridresp_cli::fitcmd::{self, FitArgs};
use gridresp_cli::scenario::{run_scenario, write_error_report};
use gridresp_cli::sweep::run_sweep;
use gridresp_cli::synth::{self, SynthArgs};

#[derive(Parser)]
#[command(
    name = "gridresp",
    about = "Analytic frequency/voltage response of mixed SG/GFM power networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output sample spacing in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Frequency-model horizon in seconds.
    #[arg(long)]
    horizon_freq: Option<f64>,
    /// Voltage-model horizon in seconds.
    #[arg(long)]
    horizon_volt: Option<f64>,
    /// Dump assembled state-space matrices to matrices.json.
    #[arg(long)]
    dump_matrices: bool,
    /// Also integrate with the RK4 oracle and report the difference.
    #[arg(long)]
    run_oracle: bool,
    /// Emit eigenvalues/damping/stability screening to eigen.json.
    #[arg(long)]
    eigen_report: bool,
}

impl RunFlags {
    fn overrides(&self) -> CliOverrides {
        CliOverrides {
            out: self.out.clone(),
            dt: self.dt,
            horizon_freq: self.horizon_freq,
            horizon_volt: self.horizon_volt,
            dump_matrices: self.dump_matrices,
            run_oracle: self.run_oracle,
            eigen_report: self.eigen_report,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and emit trajectory/metric reports.
    Run(RunFlags),
    /// Re-run a scenario across inverter shares, largest machines first.
    Sweep {
        #[command(flatten)]
        flags: RunFlags,
        /// Comma-separated GFM shares in percent, e.g. 0,25,50,75,100.
        #[arg(long, value_delimiter = ',')]
        shares: Vec<f64>,
    },
    /// Calibrate device parameters from a recorded step response.
    Fit {
        /// Two-column CSV (time, value); one header line allowed.
        #[arg(long)]
        data: PathBuf,
        /// Model family: sg-freq or sg-volt.
        #[arg(long)]
        family: String,
        /// Step magnitude in pu that produced the recording (may be negative).
        #[arg(long, allow_negative_numbers = true)]
        input: f64,
        /// Base-conversion gain S_B/S_i of the recorded device.
        #[arg(long)]
        alpha: f64,
        /// Initial guess, e.g. m=7,d=1,r_sg=0.05,t_sg=7.
        #[arg(long)]
        guess: String,
        /// Optional box constraints, e.g. m=1:20,d=0:10.
        #[arg(long)]
        bounds: Option<String>,
        /// Output directory for fit.json and fit_response.csv.
        #[arg(long, default_value = "out/fit")]
        out: PathBuf,
    },
    /// Generate a random connected test case in the native TOML format.
    Synth {
        /// Total bus count (minimum 2).
        #[arg(long)]
        buses: usize,
        /// Generator count; generators occupy buses 1..=gens.
        #[arg(long)]
        gens: usize,
        /// Fraction of generators assigned inverter devices, in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        gfm_share: f64,
        /// RNG seed; the same seed always yields the same network.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output case file path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(err: CliError, out_dir: Option<&std::path::Path>) -> ExitCode {
    eprintln!("{}", err.to_json());
    if let Some(dir) = out_dir {
        write_error_report(dir, &err);
    }
    ExitCode::from(err.stage.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(flags) => {
            let scenario = match load_scenario(&flags.config, &flags.overrides()) {
                Ok(s) => s,
                Err(e) => return fail(e, None),
            };
            match run_scenario(&scenario) {
                Ok(report) => {
                    for f in &report.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e, Some(&scenario.out_dir)),
            }
        }
        Command::Sweep { flags, shares } => {
            let scenario = match load_scenario(&flags.config, &flags.overrides()) {
                Ok(s) => s,
                Err(e) => return fail(e, None),
            };
            match run_sweep(&scenario, &shares) {
                Ok(report) => {
                    for f in &report.files {
                        println!("{}", f.display());
                    }
                    for (name, err) in &report.failed {
                        eprintln!("{name}: {}", err.to_json());
                    }
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => fail(e, Some(&scenario.out_dir)),
            }
        }
        Command::Fit { data, family, input, alpha, guess, bounds, out } => {
            let args = FitArgs { data, family, input, alpha, guess, bounds, out: out.clone() };
            match fitcmd::run_fit(&args) {
                Ok(()) => {
                    println!("{}", out.join("fit.json").display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e, None),
            }
        }
        Command::Synth { buses, gens, gfm_share, seed, out } => {
            let args = SynthArgs { buses, gens, gfm_share, seed, out: out.clone() };
            match synth::run_synth(&args) {
                Ok(()) => {
                    println!("{}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e, None),
            }
        }
    }
}
