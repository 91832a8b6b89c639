//! Files written by `simulate` and `sweep`.
//!
//! A simulation directory holds `snapshots/snapshot_{step:06}.txt` in the
//! snapshot format, `diagnostics.csv` with one row per step, and
//! `summary.txt`. A sweep directory holds `report.txt` and its JSON mirror
//! `report.json`. All floats carry 17 significant digits, so every file is a
//! pure function of its inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::convergence::ConvergenceReport;
use crate::error::{FlowError, Result};
use crate::estimates::DiagnosticsRecord;
use crate::flow::{Termination, Trajectory};
use crate::geometry::snapshot::{fmt17, Snapshot};

pub const DIAGNOSTICS_HEADER: &str =
    "t,length,energy,dissipation,k0,k1,k2,k3,k4,b0L,b0R,b2L,b2R,b4L,b4R,lam_res,maxE,maxLam";
pub const DIAGNOSTICS_COLUMNS: usize = 18;

pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:06}.txt")
}

/// The CSV columns of one record, in header order.
pub fn diagnostics_row(r: &DiagnosticsRecord) -> [f64; DIAGNOSTICS_COLUMNS] {
    let b = &r.boundary_residuals;
    let k = &r.kappa_l2_sq;
    [
        r.t,
        r.length,
        r.energy_feps,
        r.dissipation_rate,
        k[0],
        k[1],
        k[2],
        k[3],
        k[4],
        b.kappa[0],
        b.kappa[1],
        b.kappa_ss[0],
        b.kappa_ss[1],
        b.kappa_ssss[0],
        b.kappa_ssss[1],
        r.lambda_endpoint_residual,
        r.max_abs_e,
        r.max_abs_lambda,
    ]
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * DIAGNOSTICS_COLUMNS * 24);
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        let row: Vec<String> = diagnostics_row(r).iter().map(|v| fmt17(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads back a diagnostics CSV; `origin` only labels errors.
pub fn parse_diagnostics_csv(text: &str, origin: &Path) -> Result<Vec<[f64; DIAGNOSTICS_COLUMNS]>> {
    let err = |line: usize, reason: String| FlowError::Parse {
        path: origin.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == DIAGNOSTICS_HEADER => {}
        _ => return Err(err(1, "missing or unexpected header".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut row = [0.0; DIAGNOSTICS_COLUMNS];
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != DIAGNOSTICS_COLUMNS {
                return Err(err(i + 2, format!("expected {DIAGNOSTICS_COLUMNS} fields, found {}", fields.len())));
            }
            for (slot, f) in row.iter_mut().zip(fields) {
                *slot = f.parse().map_err(|e| err(i + 2, format!("`{f}`: {e}")))?;
            }
            Ok(row)
        })
        .collect()
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::ReachedTEnd => "reached_t_end",
        Termination::SingularityDetected => "singularity_detected",
        Termination::SolverFailure => "solver_failure",
    }
}

pub fn trajectory_summary(traj: &Trajectory) -> String {
    let last = traj.last_state();
    let mut out = String::new();
    let _ = writeln!(out, "terminated_by={}", termination_name(traj.terminated_by));
    let _ = writeln!(out, "steps={}", last.step_index);
    let _ = writeln!(out, "final_time={}", fmt17(last.time));
    let _ = writeln!(out, "dt={}", fmt17(traj.dt));
    let _ = writeln!(out, "epsilon={}", fmt17(traj.epsilon));
    let _ = writeln!(out, "n={}", last.curve.nodes().len() - 1);
    let _ = writeln!(out, "snapshots={}", traj.states.len());
    if let Some(t) = traj.stopped_at {
        let _ = writeln!(out, "stopped_at={}", fmt17(t));
    }
    if let Some(r) = &traj.stop_reason {
        let _ = writeln!(out, "stop_reason={r}");
    }
    out
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the snapshots, diagnostics, and summary of a run; returns the
/// snapshot paths in step order.
pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    create_dir(&snap_dir)?;
    let mut paths = Vec::with_capacity(traj.states.len());
    for state in &traj.states {
        let snap = Snapshot::from_state(&state.curve, &state.cache, state.time, state.epsilon);
        let path = snap_dir.join(snapshot_file_name(state.step_index));
        fs::write(&path, snap.to_text())?;
        paths.push(path);
    }
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&traj.diagnostics))?;
    fs::write(dir.join("summary.txt"), trajectory_summary(traj))?;
    Ok(paths)
}

fn fmt_or(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        fmt17(v)
    }
}

pub fn report_text(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# n={} dt={} t_end={} delta={} k_max={} snapshots={} reference={}",
        report.n,
        fmt17(report.dt),
        fmt17(report.t_end),
        fmt17(report.delta),
        report.k_max,
        report.snapshot_count,
        termination_name(report.reference_terminated_by)
    );
    let header: Vec<String> = (0..=report.k_max).map(|k| format!("d{k}")).collect();
    let _ = writeln!(out, "eps,{}", header.join(","));
    for row in &report.rows {
        let d: Vec<String> = row.distances.iter().map(|v| fmt_or(*v)).collect();
        let _ = writeln!(out, "{},{}", fmt17(row.epsilon), d.join(","));
    }
    let orders: Vec<String> = report
        .fitted_order
        .iter()
        .map(|o| o.map_or_else(|| "n/a".into(), fmt17))
        .collect();
    let _ = writeln!(out, "# fitted_order,{}", orders.join(","));
    let mono: Vec<&str> = report.monotone.iter().map(|m| if *m { "true" } else { "false" }).collect();
    let _ = writeln!(out, "# monotone,{}", mono.join(","));
    for row in &report.rows {
        if row.terminated_by != Termination::ReachedTEnd || row.note.is_some() {
            let _ = writeln!(
                out,
                "# eps={} terminated_by={} note={}",
                fmt17(row.epsilon),
                termination_name(row.terminated_by),
                row.note.as_deref().unwrap_or("")
            );
        }
    }
    out
}

/// JSON mirror of [`report_text`]; unmeasurable distances become `null`.
pub fn report_json(report: &ConvergenceReport) -> Value {
    let num = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    json!({
        "n": report.n,
        "dt": report.dt,
        "t_end": report.t_end,
        "delta": report.delta,
        "k_max": report.k_max,
        "snapshot_count": report.snapshot_count,
        "reference_terminated_by": termination_name(report.reference_terminated_by),
        "rows": report.rows.iter().map(|r| json!({
            "epsilon": r.epsilon,
            "distances": r.distances.iter().map(|d| num(*d)).collect::<Vec<_>>(),
            "terminated_by": termination_name(r.terminated_by),
            "note": r.note,
        })).collect::<Vec<_>>(),
        "fitted_order": report.fitted_order,
        "monotone": report.monotone,
    })
}

/// Writes `report.txt` and `report.json`.
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    fs::write(dir.join("report.txt"), report_text(report))?;
    let mut json = serde_json::to_string_pretty(&report_json(report))
        .map_err(|e| FlowError::BadParams(format!("report serialization: {e}")))?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}

/// Rows of a report text as `(eps, distances)`, `nan` read back as NaN.
pub fn parse_report_rows(text: &str, origin: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let err = |reason: String| FlowError::Parse {
        path: origin.to_path_buf(),
        reason,
    };
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("eps,") && !l.is_empty())
        .map(|line| {
            let vals = line
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| err(format!("`{f}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            let (eps, d) = vals.split_first().ok_or_else(|| err("empty row".into()))?;
            Ok((*eps, d.to_vec()))
        })
        .collect()
}
