//! Scenario files: JSON documents bundling a formation, controller gains,
//! integration settings and the initial state.
//!
//! Units are SI throughout: positions and lengths in metres, velocities in
//! m/s, times in seconds, angular rates in rad/s.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::control::{ControllerConfig, FollowerGains, NominalVariant};
use crate::formation::{EdgeSpec, FormationSpec, LeaderTrajectory, OmegaSignal};
use crate::geom3::{UnitVec3, Vec3};
use crate::sim::{AgentState, SimConfig, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    pub formation: FormationSpec,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    /// State at `t = 0`, leader first.
    pub initial: WorldState,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Tolerance on the leader's initial state versus its reference.
pub const LEADER_START_TOLERANCE: f64 = 1e-9;

impl Scenario {
    pub fn agent_count(&self) -> usize {
        self.formation.agent_count()
    }

    /// Every violated invariant, one message per problem.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.label.trim().is_empty() {
            problems.push("label must not be empty".to_string());
        }
        problems.extend(self.formation.validate());
        let n = self.formation.agent_count();
        problems.extend(self.controller.validate(n.saturating_sub(1)));
        let r = self.formation.safety_distance;
        problems.extend(self.sim.validate(r));
        if self.initial.t != 0.0 {
            problems.push(format!("initial.t must be 0 (got {})", self.initial.t));
        }
        let agents = &self.initial.agents;
        if agents.len() != n {
            problems.push(format!(
                "initial.agents has {} entries but the formation has {n} agents",
                agents.len()
            ));
            return problems;
        }
        for (k, a) in agents.iter().enumerate() {
            if !(a.p.is_finite() && a.v.is_finite()) {
                problems.push(format!("initial.agents[{k}] is not finite"));
            }
        }
        for k in 1..n {
            let d = (agents[k].p - agents[k - 1].p).norm() - r;
            if !(d > self.sim.d_floor_for(r)) {
                problems.push(format!(
                    "initial.agents[{k}] starts within the safety distance of agent {} (d = {d})",
                    k - 1
                ));
            }
        }
        if !problems.iter().any(|p| p.starts_with("formation.leader")) {
            let reference = self.formation.leader.at(0.0);
            let dp = (agents[0].p - reference.position).max_abs();
            let dv = (agents[0].v - reference.velocity).max_abs();
            if dp > LEADER_START_TOLERANCE || dv > LEADER_START_TOLERANCE {
                problems.push(format!(
                    "initial.agents[0] must match the leader reference at t = 0 (off by {dp:e} m, {dv:e} m/s)"
                ));
            }
        }
        problems
    }

    pub fn from_value(value: Value) -> Result<Self, ScenarioError> {
        let text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        let problems = scenario.validate();
        if problems.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Validation(problems))
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenarios serialize")
    }

    /// Re-validates after applying `key=value` overrides.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self, ScenarioError> {
        let mut value = self.to_value();
        apply_overrides(&mut value, sets)?;
        Self::from_value(value)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

/// Loads a scenario as raw JSON so overrides can be applied before
/// validation.
pub fn load_scenario_value(path: &Path) -> Result<Value, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_literal(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key=value` assignments in order.
///
/// Shortcuts: `k_p`, `k_v`, `k_o` set the gain of every follower; `variant`,
/// `dt`, `t_end` and `d_floor` address the controller and integrator. Any
/// other key is a dotted path into the document, with array indices as
/// plain numbers (`controller.followers.1.k_o=3`). Values parse as JSON
/// when possible and fall back to strings.
pub fn apply_overrides(value: &mut Value, sets: &[String]) -> Result<(), ScenarioError> {
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| ScenarioError::Override(set.clone(), "expected key=value".to_string()))?;
        let key = key.trim();
        let literal = parse_literal(raw.trim());
        match key {
            "k_p" | "k_v" | "k_o" => {
                let followers = value
                    .pointer_mut("/controller/followers")
                    .and_then(Value::as_array_mut)
                    .ok_or_else(|| ScenarioError::Override(set.clone(), "no controller.followers array".to_string()))?;
                for f in followers {
                    let obj = f
                        .as_object_mut()
                        .ok_or_else(|| ScenarioError::Override(set.clone(), "follower gains must be objects".to_string()))?;
                    obj.insert(key.to_string(), literal.clone());
                }
            }
            "variant" => set_path(value, &["controller", "variant"], literal, set)?,
            "dt" | "t_end" | "d_floor" => set_path(value, &["sim", key], literal, set)?,
            path => {
                // `a[1].b` and `a.1.b` address the same element
                let path = path.replace('[', ".").replace(']', "");
                let parts: Vec<&str> = path.split('.').collect();
                if parts.iter().any(|p| p.is_empty()) {
                    return Err(ScenarioError::Override(set.clone(), "empty path segment".to_string()));
                }
                set_path(value, &parts, literal, set)?;
            }
        }
    }
    Ok(())
}

fn set_path(root: &mut Value, parts: &[&str], new: Value, set: &str) -> Result<(), ScenarioError> {
    let err = |msg: String| ScenarioError::Override(set.to_string(), msg);
    let (last, parents) = parts.split_last().expect("non-empty path");
    let mut cur = root;
    for part in parents {
        cur = match cur {
            Value::Object(map) => map.get_mut(*part).ok_or_else(|| err(format!("no field `{part}`")))?,
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| err(format!("`{part}` is not an array index")))?;
                let len = items.len();
                items.get_mut(idx).ok_or_else(|| err(format!("index {idx} out of range ({len} entries)")))?
            }
            _ => return Err(err(format!("cannot descend into `{part}`"))),
        };
    }
    match cur {
        Value::Object(map) => {
            map.insert(last.to_string(), new);
        }
        Value::Array(items) => {
            let idx: usize = last.parse().map_err(|_| err(format!("`{last}` is not an array index")))?;
            let len = items.len();
            *items.get_mut(idx).ok_or_else(|| err(format!("index {idx} out of range ({len} entries)")))? = new;
        }
        _ => return Err(err(format!("cannot set `{last}` on a scalar"))),
    }
    Ok(())
}

pub const PRESET_NAMES: [&str; 4] = ["paper-4agent", "paper-4agent-no-barrier", "rotating-3agent", "head-on-pair"];

/// Four agents converging to a static formation. Edge lengths, directions
/// and initial positions are chosen so that the barrier-free controller
/// produces a collision while the full controller does not.
pub fn paper_4agent() -> Scenario {
    let gains = |k_p: f64, k_v: f64, k_o: f64| FollowerGains::new(k_p, k_v, k_o);
    let leader = Vec3::ZERO;
    let p = [
        leader,
        Vec3::new(-1.5, 0.2, 0.1),
        Vec3::new(1.2, 0.1, -0.2),
        Vec3::new(1.0, 3.5, 0.3),
    ];
    let v = [Vec3::ZERO, Vec3::new(0.2, 0.0, 0.0), Vec3::new(-0.2, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.0)];
    Scenario {
        label: "paper-4agent".to_string(),
        formation: FormationSpec {
            safety_distance: 0.5,
            edges: vec![
                EdgeSpec::fixed(2.0, UnitVec3::X),
                EdgeSpec::fixed(2.0, UnitVec3::Y),
                EdgeSpec::fixed(2.0, UnitVec3::Z),
            ],
            leader: LeaderTrajectory::Stationary { position: leader },
            max_edge_length: None,
        },
        controller: ControllerConfig {
            variant: NominalVariant::Distributed,
            followers: vec![gains(10.0, 7.0, 7.0), gains(14.0, 11.0, 11.0), gains(16.0, 12.0, 12.0)],
        },
        sim: SimConfig {
            record_stride: 10,
            ..SimConfig::new(1e-3, 30.0)
        },
        initial: WorldState {
            t: 0.0,
            agents: p.iter().zip(&v).map(|(p, v)| AgentState { p: *p, v: *v }).collect(),
        },
    }
}

fn rotating_3agent() -> Scenario {
    let leader = LeaderTrajectory::ConstantVelocity {
        position: Vec3::ZERO,
        velocity: Vec3::new(0.3, 0.0, 0.0),
    };
    let formation = FormationSpec {
        safety_distance: 0.4,
        edges: vec![
            EdgeSpec {
                length: 1.5,
                direction: UnitVec3::Y,
                omega: OmegaSignal::Constant {
                    axis: Vec3::new(0.0, 0.0, 0.5),
                },
            },
            EdgeSpec {
                length: 1.2,
                direction: UnitVec3::X,
                omega: OmegaSignal::Sinusoidal {
                    axis: Vec3::new(0.0, 1.0, 0.0),
                    bias: 0.0,
                    amplitude: 0.6,
                    frequency: 0.8,
                    phase: 0.0,
                },
            },
        ],
        leader,
        max_edge_length: None,
    };
    let agents = vec![
        AgentState {
            p: Vec3::ZERO,
            v: Vec3::new(0.3, 0.0, 0.0),
        },
        AgentState {
            p: Vec3::new(-1.0, -1.0, 0.5),
            v: Vec3::ZERO,
        },
        AgentState {
            p: Vec3::new(1.0, -2.0, -0.5),
            v: Vec3::ZERO,
        },
    ];
    Scenario {
        label: "rotating-3agent".to_string(),
        formation,
        controller: ControllerConfig::uniform(2, FollowerGains::new(10.0, 7.0, 7.0), NominalVariant::Distributed),
        sim: SimConfig {
            record_stride: 10,
            ..SimConfig::new(1e-3, 20.0)
        },
        initial: WorldState { t: 0.0, agents },
    }
}

fn head_on_pair() -> Scenario {
    Scenario {
        label: "head-on-pair".to_string(),
        formation: FormationSpec {
            safety_distance: 0.5,
            edges: vec![EdgeSpec::fixed(2.0, UnitVec3::X)],
            leader: LeaderTrajectory::Stationary { position: Vec3::ZERO },
            max_edge_length: None,
        },
        controller: ControllerConfig::uniform(1, FollowerGains::new(10.0, 7.0, 7.0), NominalVariant::Distributed),
        sim: SimConfig {
            record_stride: 10,
            ..SimConfig::new(1e-3, 6.0)
        },
        initial: WorldState {
            t: 0.0,
            agents: vec![
                AgentState::default(),
                AgentState {
                    p: Vec3::new(-2.0, 0.0, 0.0),
                    v: Vec3::ZERO,
                },
            ],
        },
    }
}

pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    match name {
        "paper-4agent" => Ok(paper_4agent()),
        "paper-4agent-no-barrier" => {
            let mut s = paper_4agent();
            s.label = name.to_string();
            s.controller.followers.iter_mut().for_each(|g| g.k_o = 0.0);
            Ok(s)
        }
        "rotating-3agent" => Ok(rotating_3agent()),
        "head-on-pair" => Ok(head_on_pair()),
        other => Err(ScenarioError::UnknownPreset(other.to_string())),
    }
}
