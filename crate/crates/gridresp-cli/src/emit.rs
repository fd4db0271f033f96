//! Deterministic output writers. All CSV floats use one fixed format (9
//! significant digits, scientific) so identical runs produce byte-identical
//! files; JSON goes through serde_json, whose float rendering is the
//! shortest exact round-trip and therefore equally stable.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{staged, CliError, Stage};

/// 9 significant digits: one leading digit plus eight after the point.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::new(Stage::Output, format!("creating {}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::new(Stage::Output, format!("writing {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(staged(Stage::Output))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// One time column plus one column per series, header carrying the bus ids.
pub fn write_trajectory_csv(
    path: &Path,
    times: &[f64],
    columns: &[(usize, Vec<f64>)],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push('t');
    for (bus, _) in columns {
        out.push(',');
        out.push_str(&bus.to_string());
    }
    out.push('\n');

    for (k, t) in times.iter().enumerate() {
        out.push_str(&fmt_float(*t));
        for (bus, series) in columns {
            debug_assert_eq!(series.len(), times.len(), "series for bus {bus}");
            out.push(',');
            out.push_str(&fmt_float(series[k]));
        }
        out.push('\n');
    }

    let mut f = fs::File::create(path)
        .map_err(|e| CliError::new(Stage::Output, format!("creating {}: {e}", path.display())))?;
    f.write_all(out.as_bytes())
        .map_err(|e| CliError::new(Stage::Output, format!("writing {}: {e}", path.display())))
}
