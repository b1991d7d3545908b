use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use formsim::analysis::setpoints::{classify_limit, Classification, ClassifyOptions};
use formsim::analysis::verify::{run_suites, Suite};
use formsim::output::{format_cell, termination_json, write_run};
use formsim::scenario::{apply_overrides, load_scenario, load_scenario_value, preset, Scenario, ScenarioError, PRESET_NAMES};
use formsim::sim::{error_states, run, SimError, TrajectoryRecord};

const EXIT_IO: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_CLAIM: u8 = 4;

#[derive(Parser)]
#[command(name = "formsim", version, about = "Formation tracking with divergent-flow barrier feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory.csv + metadata.json.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run numerical claim suites.
    Verify {
        /// Seed for every randomized suite.
        #[arg(long)]
        seed: u64,
        /// Suites to run (default: all).
        #[arg(long = "suite", value_enum)]
        suites: Vec<SuiteArg>,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a scenario over a parameter grid in parallel.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// `key=v1,v2,...`; repeated keys form a Cartesian grid.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        /// Aggregate CSV path.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write every run's trajectory under this directory.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
    /// List or export embedded presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Export {
        name: String,
        /// Destination file (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Embedded preset name.
    #[arg(long)]
    preset: Option<String>,
    /// `key=value` override, applied in order before validation.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemma1,
    Lyapunov,
    Setpoints,
    Instability,
    Preset,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Lemma1 => Suite::Lemma1,
            SuiteArg::Lyapunov => Suite::Lyapunov,
            SuiteArg::Setpoints => Suite::Setpoints,
            SuiteArg::Instability => Suite::Instability,
            SuiteArg::Preset => Suite::Preset,
        }
    }
}

fn scenario_error_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn load(source: &Source, extra: &[String]) -> Result<Scenario, ScenarioError> {
    let mut value = match (&source.scenario, &source.preset) {
        (Some(path), _) if source.sets.is_empty() && extra.is_empty() => return load_scenario(path),
        (Some(path), _) => load_scenario_value(path)?,
        (None, Some(name)) => preset(name)?.to_value(),
        (None, None) => unreachable!("clap requires a source"),
    };
    apply_overrides(&mut value, &source.sets)?;
    apply_overrides(&mut value, extra)?;
    Scenario::from_value(value)
}

fn exit_for(record: &TrajectoryRecord) -> u8 {
    match record.violation() {
        None => 0,
        Some(SimError::BarrierViolation { .. } | SimError::DegenerateEdge { .. }) => EXIT_VIOLATION,
        Some(_) => EXIT_IO,
    }
}

fn cmd_run(source: &Source, out: &Path) -> Result<u8, (u8, String)> {
    let scenario = load(source, &[]).map_err(|e| (scenario_error_code(&e), e.to_string()))?;
    let start = Instant::now();
    let record = run(&scenario.initial, &scenario.formation, &scenario.controller, &scenario.sim)
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();
    let (csv, meta) = write_run(out, &scenario, &record, wall).map_err(|e| (EXIT_IO, e.to_string()))?;
    let min_d = record.overall_min_d();
    match record.violation() {
        None => eprintln!(
            "{}: completed to t = {} (min d = {min_d:.6}); wrote {} and {}",
            scenario.label,
            record.final_state.t,
            csv.display(),
            meta.display()
        ),
        Some(e) => eprintln!("{}: {e}; wrote {} and {}", scenario.label, csv.display(), meta.display()),
    }
    Ok(exit_for(&record))
}

fn cmd_verify(seed: u64, suites: &[SuiteArg], json: Option<&Path>) -> Result<u8, (u8, String)> {
    let selected: Vec<Suite> = if suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        suites.iter().map(|&s| s.into()).collect()
    };
    let report = run_suites(&selected, seed);
    print!("{}", report.human_readable());
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    if let Some(path) = json {
        fs::write(path, text + "\n").map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    }
    Ok(if report.passed { 0 } else { EXIT_CLAIM })
}

fn grid_points(grid: &[String]) -> Result<Vec<Vec<String>>, String> {
    let mut points: Vec<Vec<String>> = vec![Vec::new()];
    for axis in grid {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| format!("bad grid axis `{axis}`: expected key=v1,v2,..."))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(format!("grid axis `{key}` has no values"));
        }
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(format!("{key}={v}"));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// First recorded time after which every follower stays within `tol` of its
/// desired position; empty when never settled.
fn settling_time(scenario: &Scenario, record: &TrajectoryRecord, tol: f64) -> Option<f64> {
    let mut settled_since = None;
    for row in &record.rows {
        let off = error_states(&row.state(), &scenario.formation)
            .iter()
            .any(|e| e.p_tilde.norm() >= tol);
        if off {
            settled_since = None;
        } else if settled_since.is_none() {
            settled_since = Some(row.t);
        }
    }
    if record.completed() {
        settled_since
    } else {
        None
    }
}

fn class_label(c: &Classification) -> String {
    match c {
        Classification::SetPoint { index, .. } => format!("m{index}"),
        Classification::NotConverged { .. } => "not_converged".to_string(),
    }
}

struct SweepRow {
    index: usize,
    line: String,
}

fn cmd_sweep(source: &Source, grid: &[String], out: &Path, runs_dir: Option<&Path>) -> Result<u8, (u8, String)> {
    let points = grid_points(grid).map_err(|e| (EXIT_VALIDATION, e))?;
    let scenarios = points
        .iter()
        .map(|p| load(source, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| (scenario_error_code(&e), e.to_string()))?;
    let keys: Vec<&str> = grid.iter().filter_map(|g| g.split_once('=').map(|(k, _)| k)).collect();
    let followers = scenarios[0].agent_count() - 1;

    let (tx, rx) = mpsc::channel::<Result<(SweepRow, Option<(Scenario, TrajectoryRecord, f64)>), String>>();
    let keep_runs = runs_dir.is_some();
    scenarios
        .into_par_iter()
        .zip(points.par_iter())
        .enumerate()
        .for_each_with(tx, |tx, (index, (scenario, point))| {
            let start = Instant::now();
            let result = run(&scenario.initial, &scenario.formation, &scenario.controller, &scenario.sim)
                .map_err(|e| format!("run {index}: {e}"))
                .map(|record| {
                    let wall = start.elapsed().as_secs_f64();
                    let classify = ClassifyOptions::for_safety_distance(scenario.formation.safety_distance);
                    let classes = classify_limit(&record, &scenario.formation, &classify);
                    let settle = settling_time(&scenario, &record, classify.tol_pos);
                    let mut cells: Vec<String> = point
                        .iter()
                        .map(|kv| kv.split_once('=').map(|(_, v)| v).unwrap_or("").replace(',', ";"))
                        .collect();
                    cells.push(termination_json(&record.termination)["kind"].as_str().unwrap_or("").to_string());
                    cells.extend(record.min_d.iter().map(|d| format_cell(*d)));
                    cells.extend(classes.iter().map(class_label));
                    cells.push(settle.map(format_cell).unwrap_or_default());
                    let row = SweepRow {
                        index,
                        line: cells.join(","),
                    };
                    (row, keep_runs.then_some((scenario, record, wall)))
                });
            tx.send(result).expect("collector alive");
        });

    let mut rows = Vec::new();
    for msg in rx {
        let (row, run) = msg.map_err(|e| (EXIT_VALIDATION, e))?;
        if let (Some(dir), Some((scenario, record, wall))) = (runs_dir, run) {
            write_run(&dir.join(format!("run-{:04}", row.index)), &scenario, &record, wall)
                .map_err(|e| (EXIT_IO, e.to_string()))?;
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.index);

    let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    header.push("termination".to_string());
    header.extend((2..=followers + 1).map(|i| format!("min_d{i}")));
    header.extend((2..=followers + 1).map(|i| format!("class{i}")));
    header.push("settling_time".to_string());
    let mut text = header.join(",") + "\n";
    for r in &rows {
        text.push_str(&r.line);
        text.push('\n');
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| (EXIT_IO, e.to_string()))?;
    }
    fs::write(out, text).map_err(|e| (EXIT_IO, format!("{}: {e}", out.display())))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(0)
}

fn cmd_preset(action: &PresetAction) -> Result<u8, (u8, String)> {
    match action {
        PresetAction::List => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        PresetAction::Export { name, out } => {
            let text = preset(name).map_err(|e| (EXIT_VALIDATION, e.to_string()))?.to_json_pretty() + "\n";
            match out {
                Some(path) => fs::write(path, text).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { source, out } => cmd_run(source, out),
        Command::Verify { seed, suites, json } => cmd_verify(*seed, suites, json.as_deref()),
        Command::Sweep {
            source,
            grid,
            out,
            runs_dir,
        } => cmd_sweep(source, grid, out, runs_dir.as_deref()),
        Command::Preset { action } => cmd_preset(action),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
