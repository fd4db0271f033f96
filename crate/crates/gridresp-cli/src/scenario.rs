//! The pipeline: case → reduction → disturbance estimate → models →
//! closed-form solve → metrics → files. Stage timings are measured around
//! the same core calls `solve_analytic` composes, so the report splits
//! assembly, factorization, and evaluation without changing semantics.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use gridresp_core::{
    assemble_frequency_model, assemble_voltage_model, build_susceptance, eigen_diagnostics,
    estimate_reactive_disturbance, frequency_metrics, kron_reduce, solve_expm,
    solve_numeric_oracle, solve_spectral, to_frequency_hz, voltage_metrics, Constants,
    FrequencyMetrics, LtiModel, ReducedNetwork, SolveError, SpectralFactorization, StateKind,
    Trajectory, VoltageMetrics,
};
use nalgebra::DMatrix;

use crate::config::Scenario;
use crate::emit;
use crate::error::{CliError, Stage};

/// PMU-style RoCoF estimation rate, samples per second.
pub const ROCOF_SAMPLE_RATE: f64 = 60.0;
/// Settling band as a fraction of the largest deviation.
pub const SETTLING_BAND: f64 = 0.02;
/// Internal RK4 step of the optional numerical cross-check.
pub const ORACLE_DT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Timing {
    pub assembly_ms: f64,
    pub factorization_ms: f64,
    pub evaluation_ms: f64,
    pub total_ms: f64,
}

/// Everything a run produced, kept for sweep summaries and tests.
pub struct RunReport {
    pub gen_buses: Vec<usize>,
    pub freq: Trajectory,
    pub volt: Trajectory,
    pub freq_hz: Vec<(usize, Vec<f64>)>,
    pub volt_dev: Vec<(usize, Vec<f64>)>,
    pub freq_metrics: Vec<(usize, FrequencyMetrics)>,
    pub volt_metrics: Vec<(usize, VoltageMetrics)>,
    pub n_states_freq: usize,
    pub n_states_volt: usize,
    pub timing: Timing,
    pub files: Vec<PathBuf>,
}

struct Solved {
    traj: Trajectory,
    factorization_ms: f64,
    evaluation_ms: f64,
}

/// `SpectralFactorization::new` + `solve_spectral` is exactly what
/// `solve_analytic` runs; timed here per stage.
fn timed_solve(model: &LtiModel, t_end: f64, dt: f64) -> Result<Solved, SolveError> {
    model.validate()?;
    let t0 = Instant::now();
    let fact = SpectralFactorization::new(&model.a);
    let factorization_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let traj = match fact {
        Ok(f) => solve_spectral(model, &f, t_end, dt)?,
        Err(SolveError::SingularEigenbasis) => solve_expm(model, t_end, dt)?,
        Err(e) => return Err(e),
    };
    let evaluation_ms = t1.elapsed().as_secs_f64() * 1e3;
    Ok(Solved { traj, factorization_ms, evaluation_ms })
}

fn mat_json(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<Vec<f64>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
    serde_json::json!(rows)
}

fn model_json(model: &LtiModel) -> Result<serde_json::Value, CliError> {
    Ok(serde_json::json!({
        "a": mat_json(&model.a),
        "b": mat_json(&model.b),
        "u": model.u.iter().copied().collect::<Vec<f64>>(),
        "states": serde_json::to_value(&model.states).map_err(|e| CliError::new(Stage::Output, e))?,
        "inputs": serde_json::to_value(&model.inputs).map_err(|e| CliError::new(Stage::Output, e))?,
    }))
}

fn eigen_json(model: &LtiModel) -> Result<serde_json::Value, CliError> {
    let rep = eigen_diagnostics(model).map_err(|e| CliError::new(Stage::Solve, e))?;
    Ok(serde_json::json!({
        "eigenvalues": rep
            .eigenvalues
            .iter()
            .map(|l| serde_json::json!({"re": l.re, "im": l.im}))
            .collect::<Vec<_>>(),
        "damping_ratios": rep.damping_ratios,
        "stability": serde_json::to_value(rep.stability).map_err(|e| CliError::new(Stage::Output, e))?,
    }))
}

fn bus_series(traj: &Trajectory, kind: StateKind, buses: &[usize]) -> Vec<(usize, Vec<f64>)> {
    buses
        .iter()
        .filter_map(|&bus| traj.state_row(kind, bus).map(|row| (bus, traj.series(row))))
        .collect()
}

/// Runs the full pipeline and writes the scenario's files into its output
/// directory. Every float written is fixed-format, so identical scenarios
/// yield byte-identical files; wall-clock readings go only to timing.json.
pub fn run_scenario(s: &Scenario) -> Result<RunReport, CliError> {
    let case = &s.case;
    let constants = Constants::new(case.f0);
    let gen_buses: Vec<usize> = case.generators.iter().map(|g| g.bus).collect();

    let t_total = Instant::now();

    // Assembly: reduction, the reactive-disturbance power flows, and both
    // state-space builds.
    let t0 = Instant::now();
    let net: ReducedNetwork =
        kron_reduce(&build_susceptance(case)).map_err(|e| CliError::new(Stage::Reduction, e))?;
    let reactive = estimate_reactive_disturbance(case, &s.disturbance)
        .map_err(|e| CliError::new(Stage::Powerflow, e))?;
    let fm = assemble_frequency_model(
        &net,
        &case.generators,
        &s.disturbance,
        &constants,
        case.base_mva,
    )
    .map_err(|e| CliError::new(Stage::Assembly, e))?;
    let vm = assemble_voltage_model(&case.generators, &reactive, case.base_mva)
        .map_err(|e| CliError::new(Stage::Assembly, e))?;
    let assembly_ms = t0.elapsed().as_secs_f64() * 1e3;

    let freq = timed_solve(&fm, s.horizon_freq, s.dt)
        .map_err(|e| CliError::new(Stage::Solve, format!("frequency model: {e}")))?;
    let volt = timed_solve(&vm, s.horizon_volt, s.dt)
        .map_err(|e| CliError::new(Stage::Solve, format!("voltage model: {e}")))?;

    // Evaluation also covers the per-bus series extraction and metrics.
    let t1 = Instant::now();
    let omega = bus_series(&freq.traj, StateKind::Omega, &gen_buses);
    let freq_hz: Vec<(usize, Vec<f64>)> = omega
        .into_iter()
        .map(|(bus, pu)| (bus, to_frequency_hz(case.f0, &pu)))
        .collect();
    let volt_dev = bus_series(&volt.traj, StateKind::Dv, &gen_buses);

    let mut freq_metrics = Vec::with_capacity(freq_hz.len());
    for (bus, f) in &freq_hz {
        let m = frequency_metrics(&freq.traj.times, f, case.f0, ROCOF_SAMPLE_RATE, SETTLING_BAND)
            .map_err(|e| CliError::new(Stage::Metrics, format!("bus {bus}: {e}")))?;
        freq_metrics.push((*bus, m));
    }
    let mut volt_metrics = Vec::with_capacity(volt_dev.len());
    for (bus, dv) in &volt_dev {
        let m = voltage_metrics(&volt.traj.times, dv)
            .map_err(|e| CliError::new(Stage::Metrics, format!("bus {bus}: {e}")))?;
        volt_metrics.push((*bus, m));
    }
    let series_ms = t1.elapsed().as_secs_f64() * 1e3;

    let timing = Timing {
        assembly_ms,
        factorization_ms: freq.factorization_ms + volt.factorization_ms,
        evaluation_ms: freq.evaluation_ms + volt.evaluation_ms + series_ms,
        total_ms: t_total.elapsed().as_secs_f64() * 1e3,
    };

    // Emission: fixed-format CSV + JSON. Order of files and of keys within
    // them is fixed.
    emit::create_dir(&s.out_dir)?;
    let mut files = Vec::new();

    let freq_csv = s.out_dir.join("frequency.csv");
    emit::write_trajectory_csv(&freq_csv, &freq.traj.times, &freq_hz)?;
    files.push(freq_csv);

    let volt_csv = s.out_dir.join("voltage.csv");
    emit::write_trajectory_csv(&volt_csv, &volt.traj.times, &volt_dev)?;
    files.push(volt_csv);

    let mut freq_map = serde_json::Map::new();
    for (bus, m) in &freq_metrics {
        freq_map.insert(
            bus.to_string(),
            serde_json::to_value(m).map_err(|e| CliError::new(Stage::Output, e))?,
        );
    }
    let mut volt_map = serde_json::Map::new();
    for (bus, m) in &volt_metrics {
        volt_map.insert(
            bus.to_string(),
            serde_json::to_value(m).map_err(|e| CliError::new(Stage::Output, e))?,
        );
    }
    let metrics_path = s.out_dir.join("metrics.json");
    emit::write_json(
        &metrics_path,
        &serde_json::json!({
            "schema": 1,
            "f0_hz": case.f0,
            "frequency": freq_map,
            "voltage": volt_map,
        }),
    )?;
    files.push(metrics_path);

    let timing_path = s.out_dir.join("timing.json");
    emit::write_json(
        &timing_path,
        &serde_json::json!({
            "schema": 1,
            "n_states_freq": fm.n_states(),
            "n_states_volt": vm.n_states(),
            "assembly_ms": timing.assembly_ms,
            "factorization_ms": timing.factorization_ms,
            "evaluation_ms": timing.evaluation_ms,
            "total_ms": timing.total_ms,
            "used_expm_fallback": {
                "frequency": freq.traj.used_expm_fallback,
                "voltage": volt.traj.used_expm_fallback,
            },
        }),
    )?;
    files.push(timing_path);

    if s.eigen_report {
        let path = s.out_dir.join("eigen.json");
        emit::write_json(
            &path,
            &serde_json::json!({
                "schema": 1,
                "frequency": eigen_json(&fm)?,
                "voltage": eigen_json(&vm)?,
            }),
        )?;
        files.push(path);
    }

    if s.dump_matrices {
        let path = s.out_dir.join("matrices.json");
        emit::write_json(
            &path,
            &serde_json::json!({
                "schema": 1,
                "b_r": mat_json(&net.b_r),
                "b_l": mat_json(&net.b_l),
                "frequency": model_json(&fm)?,
                "voltage": model_json(&vm)?,
            }),
        )?;
        files.push(path);
    }

    if s.run_oracle {
        let of = solve_numeric_oracle(&fm, s.horizon_freq, ORACLE_DT, s.dt)
            .map_err(|e| CliError::new(Stage::Solve, format!("frequency oracle: {e}")))?;
        let ov = solve_numeric_oracle(&vm, s.horizon_volt, ORACLE_DT, s.dt)
            .map_err(|e| CliError::new(Stage::Solve, format!("voltage oracle: {e}")))?;

        let of_hz: Vec<(usize, Vec<f64>)> = bus_series(&of, StateKind::Omega, &gen_buses)
            .into_iter()
            .map(|(bus, pu)| (bus, to_frequency_hz(case.f0, &pu)))
            .collect();
        let ov_dev = bus_series(&ov, StateKind::Dv, &gen_buses);

        let path = s.out_dir.join("oracle_frequency.csv");
        emit::write_trajectory_csv(&path, &of.times, &of_hz)?;
        files.push(path);
        let path = s.out_dir.join("oracle_voltage.csv");
        emit::write_trajectory_csv(&path, &ov.times, &ov_dev)?;
        files.push(path);

        let diff_f = (&freq.traj.values - &of.values).abs().max();
        let diff_v = (&volt.traj.values - &ov.values).abs().max();
        let path = s.out_dir.join("oracle.json");
        emit::write_json(
            &path,
            &serde_json::json!({
                "schema": 1,
                "dt_internal_s": ORACLE_DT,
                "max_abs_state_diff_freq": diff_f,
                "max_abs_state_diff_volt": diff_v,
            }),
        )?;
        files.push(path);
    }

    Ok(RunReport {
        gen_buses,
        freq: freq.traj,
        volt: volt.traj,
        freq_hz,
        volt_dev,
        freq_metrics,
        volt_metrics,
        n_states_freq: fm.n_states(),
        n_states_volt: vm.n_states(),
        timing,
        files,
    })
}

/// Writes the machine-readable error report next to the other outputs when
/// possible; failures to write it are ignored (stderr still carries it).
pub fn write_error_report(out_dir: &std::path::Path, err: &CliError) {
    if std::fs::create_dir_all(out_dir).is_ok() {
        let _ = std::fs::write(out_dir.join("error.json"), format!("{}\n", err.to_json()));
    }
}

/// Sweep helper: device-kind assignment reaching `target_gfm` inverters.
/// Synchronous machines are supplanted largest capacity first (ties by bus
/// id ascending); if the case starts with more inverters than the target,
/// the smallest-capacity inverters revert first.
pub fn kinds_for_share(
    case: &gridresp_core::NetworkCase,
    base: &BTreeMap<usize, gridresp_core::DeviceKind>,
    target_gfm: usize,
) -> BTreeMap<usize, gridresp_core::DeviceKind> {
    use gridresp_core::DeviceKind;

    let mut kinds: BTreeMap<usize, DeviceKind> = case
        .generators
        .iter()
        .map(|g| (g.bus, base.get(&g.bus).copied().unwrap_or(g.device.kind())))
        .collect();

    let mut current: usize = kinds.values().filter(|k| **k == DeviceKind::Gfm).count();
    let mut by_capacity: Vec<(f64, usize)> =
        case.generators.iter().map(|g| (g.s_rated_mva, g.bus)).collect();

    if current < target_gfm {
        // Largest capacity first, bus id ascending on ties.
        by_capacity.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, bus) in by_capacity {
            if current == target_gfm {
                break;
            }
            if kinds[&bus] == DeviceKind::Sg {
                kinds.insert(bus, DeviceKind::Gfm);
                current += 1;
            }
        }
    } else if current > target_gfm {
        by_capacity.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, bus) in by_capacity {
            if current == target_gfm {
                break;
            }
            if kinds[&bus] == DeviceKind::Gfm {
                kinds.insert(bus, DeviceKind::Sg);
                current -= 1;
            }
        }
    }
    kinds
}
