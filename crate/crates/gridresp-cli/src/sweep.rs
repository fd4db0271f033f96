//! Share sweep: one scenario per grid-forming share, devices reassigned by
//! the deterministic largest-capacity-first rule, outputs in per-share
//! directories plus a long-format metrics CSV for box plots.

use std::path::PathBuf;

use crate::config::Scenario;
use crate::emit;
use crate::error::{CliError, Stage};
use crate::scenario::{kinds_for_share, run_scenario, write_error_report, RunReport};

pub struct SweepReport {
    pub completed: Vec<(String, RunReport)>,
    pub failed: Vec<(String, CliError)>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    /// 0 when everything ran; otherwise the most severe per-scenario code.
    pub fn exit_code(&self) -> i32 {
        self.failed.iter().map(|(_, e)| e.stage.exit_code()).max().unwrap_or(0)
    }
}

fn share_label(share: f64) -> String {
    if share.fract() == 0.0 {
        format!("share_{:03}", share as u32)
    } else {
        format!("share_{share}")
    }
}

/// Runs every share, continuing past per-scenario failures; the summary
/// files land in the sweep's root output directory.
pub fn run_sweep(base: &Scenario, shares: &[f64]) -> Result<SweepReport, CliError> {
    if shares.is_empty() {
        return Err(CliError::new(Stage::Usage, "share list is empty"));
    }
    for &s in shares {
        if !(0.0..=100.0).contains(&s) || !s.is_finite() {
            return Err(CliError::new(Stage::Usage, format!("share {s} outside [0, 100]")));
        }
    }
    let mut seen = Vec::new();
    for &s in shares {
        if !seen.contains(&s) {
            seen.push(s);
        }
    }

    let n_gens = base.case.generators.len();
    let mut completed = Vec::new();
    let mut failed: Vec<(String, CliError)> = Vec::new();

    for &share in &seen {
        let label = share_label(share);
        let target = (share / 100.0 * n_gens as f64).round() as usize;
        let kinds = kinds_for_share(&base.case, &base.overrides, target);

        let result = base.rebind_devices(&kinds).and_then(|gens| {
            let mut s = base.clone();
            s.name = format!("{}_{label}", base.name);
            s.case.generators = gens;
            s.out_dir = base.out_dir.join(&label);
            run_scenario(&s)
        });
        match result {
            Ok(report) => completed.push((label, report)),
            Err(err) => {
                write_error_report(&base.out_dir.join(&label), &err);
                failed.push((label, err));
            }
        }
    }

    emit::create_dir(&base.out_dir)?;
    let mut files = Vec::new();

    // Long format: scenario, bus, metric, value. State counts ride along as
    // scenario-level rows with an empty bus column.
    let mut csv = String::from("scenario,bus,metric,value\n");
    for (label, report) in &completed {
        for (bus, m) in &report.freq_metrics {
            let mut push = |metric: &str, v: f64| {
                csv.push_str(&format!("{label},{bus},{metric},{}\n", emit::fmt_float(v)));
            };
            push("nadir_hz", m.nadir_hz);
            push("nadir_time_s", m.nadir_time_s);
            push("rocof_hz_per_s", m.rocof_hz_per_s);
            push("hertz_sec", m.hertz_sec);
            if let Some(ts) = m.settling_time_s {
                push("settling_time_s", ts);
            }
            push("steady_state_deviation_hz", m.steady_state_deviation_hz);
        }
        for (bus, m) in &report.volt_metrics {
            let mut push = |metric: &str, v: f64| {
                csv.push_str(&format!("{label},{bus},{metric},{}\n", emit::fmt_float(v)));
            };
            push("max_deviation_pu", m.max_deviation_pu);
            push("max_deviation_time_s", m.max_deviation_time_s);
            push("final_deviation_pu", m.final_deviation_pu);
        }
        csv.push_str(&format!(
            "{label},,n_states_freq,{}\n",
            emit::fmt_float(report.n_states_freq as f64)
        ));
        csv.push_str(&format!(
            "{label},,n_states_volt,{}\n",
            emit::fmt_float(report.n_states_volt as f64)
        ));
    }
    let csv_path = base.out_dir.join("sweep_metrics.csv");
    emit::write_bytes(&csv_path, csv.as_bytes())?;
    files.push(csv_path);

    let summary_path = base.out_dir.join("sweep.json");
    emit::write_json(
        &summary_path,
        &serde_json::json!({
            "schema": 1,
            "shares": seen,
            "completed": completed.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
            "failed": failed
                .iter()
                .map(|(l, e)| serde_json::json!({
                    "scenario": l,
                    "stage": e.stage,
                    "cause": e.cause,
                }))
                .collect::<Vec<_>>(),
        }),
    )?;
    files.push(summary_path);

    Ok(SweepReport { completed, failed, files })
}
