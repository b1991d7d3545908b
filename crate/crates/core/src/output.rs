//! Run artifacts: trajectory CSV and metadata JSON sidecar.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::scenario::Scenario;
use crate::sim::{SimError, Termination, TrajectoryRecord};

/// Shortest round-trip decimal, switching to exponent form for very small
/// or large magnitudes.
pub fn format_cell(v: f64) -> String {
    format!("{v:?}")
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METADATA_FILE: &str = "metadata.json";

fn per_edge(values: &[f64]) -> Value {
    let map: Map<String, Value> = values
        .iter()
        .enumerate()
        .map(|(k, v)| (format!("d{}", k + 2), json!(v)))
        .collect();
    Value::Object(map)
}

/// Termination reason with edges named by their CSV column (`d3` is the
/// edge ending at agent 3).
pub fn termination_json(termination: &Termination) -> Value {
    match termination {
        Termination::Completed => json!({"kind": "completed"}),
        Termination::Aborted { error } => match error {
            SimError::BarrierViolation { edge, t, d } => {
                json!({"kind": "barrier_violation", "edge": format!("d{}", edge + 1), "t": t, "d": d})
            }
            SimError::DegenerateEdge { edge, t, norm } => {
                json!({"kind": "degenerate_edge", "edge": format!("d{}", edge + 1), "t": t, "norm": norm})
            }
            SimError::NonFiniteState { t } => json!({"kind": "non_finite_state", "t": t}),
            SimError::InvalidInitial(msg) => json!({"kind": "invalid_initial", "message": msg}),
        },
    }
}

pub fn metadata(scenario: &Scenario, record: &TrajectoryRecord, wall_time_s: f64) -> Value {
    let phi: Map<String, Value> = record
        .max_abs_phi
        .iter()
        .enumerate()
        .map(|(k, v)| (format!("phi{}", k + 2), json!(v)))
        .collect();
    json!({
        "scenario_label": scenario.label,
        "termination": termination_json(&record.termination),
        "min_d": per_edge(&record.min_d),
        "max_abs_phi": phi,
        "wall_time_s": wall_time_s,
        "config_echo": scenario.to_value(),
    })
}

/// Writes `trajectory.csv` and `metadata.json` into `dir`, creating it if
/// needed. Returns the two paths.
pub fn write_run(dir: &Path, scenario: &Scenario, record: &TrajectoryRecord, wall_time_s: f64) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(TRAJECTORY_FILE);
    let mut w = BufWriter::new(File::create(&csv)?);
    record.write_csv(&mut w)?;
    w.flush()?;
    let meta = dir.join(METADATA_FILE);
    let text = serde_json::to_string_pretty(&metadata(scenario, record, wall_time_s)).expect("metadata serializes");
    fs::write(&meta, text + "\n")?;
    Ok((csv, meta))
}
