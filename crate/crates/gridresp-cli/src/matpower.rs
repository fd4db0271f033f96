//! Reader for the MATPOWER case subset this tool consumes: `baseMVA` and the
//! `bus`, `gen`, and `branch` tables. Shunts, transformer ratios, and limits
//! are ignored — only series reactance enters the network model. Devices
//! come out as generic synchronous machines; kind and parameters are decided
//! later by the scenario's parameter files and overrides.

use std::collections::BTreeMap;

use gridresp_core::{Branch, Bus, BusKind, DeviceParams, Generator, Load, NetworkCase};

#[derive(Debug, thiserror::Error)]
pub enum MatpowerError {
    #[error("missing `mpc.{0}` section")]
    MissingSection(&'static str),
    #[error("mpc.{section} row {row}: expected at least {want} columns, got {got}")]
    ShortRow { section: &'static str, row: usize, want: usize, got: usize },
    #[error("mpc.{section} row {row}: bad number {token:?}")]
    BadNumber { section: &'static str, row: usize, token: String },
    #[error("gen row {row} references undefined bus {bus}")]
    UnknownGenBus { row: usize, bus: usize },
    #[error("case validation: {0}")]
    Invalid(#[from] gridresp_core::case::CaseError),
}

/// `%` comments run to end of line; strings appear only in assignments we
/// skip, so stripping is safe on the whole source.
fn strip_comments(src: &str) -> String {
    src.lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Finds `mpc.<name>` used as an assignment target, returning the offset just
/// past the key. A plain substring search would also hit `mpc.gencost` when
/// looking for `mpc.gen`, so the next non-space character must be `=`.
fn find_assign(src: &str, name: &str) -> Option<usize> {
    let key = format!("mpc.{name}");
    let mut from = 0;
    while let Some(pos) = src[from..].find(&key) {
        let end = from + pos + key.len();
        if src[end..].trim_start().starts_with('=') {
            return Some(end);
        }
        from = end;
    }
    None
}

fn scalar(src: &str, name: &'static str) -> Option<f64> {
    let rest = &src[find_assign(src, name)?..];
    let rest = rest.trim_start().strip_prefix('=')?.trim_start();
    let end = rest.find(';')?;
    rest[..end].trim().parse().ok()
}

fn matrix(src: &str, name: &'static str) -> Result<Vec<Vec<f64>>, MatpowerError> {
    let start = find_assign(src, name).ok_or(MatpowerError::MissingSection(name))?;
    let rest = &src[start..];
    let open = rest.find('[').ok_or(MatpowerError::MissingSection(name))?;
    let close = rest[open..].find(']').ok_or(MatpowerError::MissingSection(name))? + open;
    let body = &rest[open + 1..close];

    let mut rows = Vec::new();
    for (row, line) in body.split(';').enumerate() {
        let tokens: Vec<&str> = line.split([' ', '\t', '\n', ',']).filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            continue;
        }
        let mut vals = Vec::with_capacity(tokens.len());
        for token in tokens {
            vals.push(token.parse::<f64>().map_err(|_| MatpowerError::BadNumber {
                section: name,
                row,
                token: token.to_string(),
            })?);
        }
        rows.push(vals);
    }
    Ok(rows)
}

fn need(
    row: &[f64],
    idx: usize,
    section: &'static str,
    rownum: usize,
) -> Result<f64, MatpowerError> {
    row.get(idx).copied().ok_or(MatpowerError::ShortRow {
        section,
        row: rownum,
        want: idx + 1,
        got: row.len(),
    })
}

/// Parses the case and validates the result. `f0` is not part of the format
/// and defaults to 60 Hz.
pub fn parse_case(src: &str, name: &str) -> Result<NetworkCase, MatpowerError> {
    let src = strip_comments(src);
    let base_mva = scalar(&src, "baseMVA").unwrap_or(100.0);

    let bus_rows = matrix(&src, "bus")?;
    let gen_rows = matrix(&src, "gen")?;
    let branch_rows = matrix(&src, "branch")?;

    // Column layout: bus = [id type Pd Qd ... baseKV ...]; gen = [bus Pg Qg
    // Qmax Qmin Vg mBase status Pmax ...]; branch = [f t r x b ... status ...].
    let mut bus_ids = BTreeMap::new();
    let mut buses = Vec::new();
    let mut loads = Vec::new();
    for (k, row) in bus_rows.iter().enumerate() {
        let id = need(row, 0, "bus", k)? as usize;
        let p_mw = need(row, 2, "bus", k)?;
        let q_mvar = need(row, 3, "bus", k)?;
        let base_kv = row.get(9).copied().unwrap_or(0.0);
        bus_ids.insert(id, ());
        buses.push(Bus { id, kind: BusKind::Load, base_kv });
        if p_mw != 0.0 || q_mvar != 0.0 {
            loads.push(Load { bus: id, p_mw, q_mvar });
        }
    }

    let mut generators = Vec::new();
    for (k, row) in gen_rows.iter().enumerate() {
        let bus = need(row, 0, "gen", k)? as usize;
        if !bus_ids.contains_key(&bus) {
            return Err(MatpowerError::UnknownGenBus { row: k, bus });
        }
        let status = row.get(7).copied().unwrap_or(1.0);
        if status <= 0.0 {
            continue;
        }
        let dispatch_mw = need(row, 1, "gen", k)?;
        let v_setpoint = need(row, 5, "gen", k)?;
        let m_base = row.get(6).copied().unwrap_or(0.0);
        let p_max = row.get(8).copied().unwrap_or(0.0);
        // Machine MVA base when given, else capability, else the system base.
        let s_rated_mva = if m_base > 0.0 {
            m_base
        } else if p_max > 0.0 {
            p_max
        } else {
            base_mva
        };
        generators.push(Generator {
            bus,
            s_rated_mva,
            dispatch_mw,
            v_setpoint,
            device: DeviceParams::generic_sg(s_rated_mva),
        });
    }

    for b in &mut buses {
        if generators.iter().any(|g| g.bus == b.id) {
            b.kind = BusKind::Generator;
        }
    }

    let mut branches = Vec::new();
    for (k, row) in branch_rows.iter().enumerate() {
        let from = need(row, 0, "branch", k)? as usize;
        let to = need(row, 1, "branch", k)? as usize;
        let x = need(row, 3, "branch", k)?;
        let in_service = row.get(10).copied().unwrap_or(1.0) > 0.0;
        branches.push(Branch { from, to, x, in_service });
    }

    Ok(NetworkCase {
        name: name.to_string(),
        base_mva,
        f0: 60.0,
        buses,
        branches,
        generators,
        loads,
    }
    .validated()?)
}
