//! Runs started next to an unstable set point, rotated off the collapsed
//! direction by `R(ε) = exp(ε Ω)`.

use serde::{Deserialize, Serialize};

use super::lyapunov::lyapunov;
use super::setpoints::{classify_limit, Classification, ClassifyOptions};
use crate::control::{ControllerConfig, EdgeObservables};
use crate::formation::FormationSpec;
use crate::geom3::{exp_so3, SkewMat3, Vec3};
use crate::sim::{run, AgentState, SimConfig, SimError, Termination, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetup {
    /// Follower whose edge starts collapsed.
    pub agent: usize,
    pub epsilon: f64,
    pub omega: SkewMat3,
    /// Radial margin: the edge starts at length `(1 + delta) r`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub escaped: bool,
    pub termination: Termination,
    /// One per follower.
    pub classification: Vec<Classification>,
    /// `L` of the probed edge at the rotated start.
    pub l_start: f64,
    /// `L` at the same radial margin without rotation.
    pub l_unrotated: f64,
    /// `L` at the exact unstable point, `ẽ = -(r + c) g*`, `ν̃ = 0`.
    pub l_unstable: f64,
    /// `L` at `ẽ = -r R(ε) g* - c g*`, `ν̃ = 0` (no radial margin).
    pub l_rotated_exact: f64,
    pub min_d: f64,
}

/// Initial state of a probe at `t = 0`: upstream and downstream edges at
/// their desired values, every relative velocity on the desired rotation.
pub fn probe_initial_state(spec: &FormationSpec, setup: &ProbeSetup) -> WorldState {
    let n = spec.agent_count();
    let leader = spec.leader.at(0.0);
    let rot = exp_so3(&setup.omega, setup.epsilon);
    let r = spec.safety_distance;
    let mut agents = vec![AgentState {
        p: leader.position,
        v: leader.velocity,
    }];
    for k in 1..n {
        let desired = spec.desired_edge(k, 0.0);
        let e = if k == setup.agent {
            let g = desired.e_star / spec.edges[k - 1].length;
            -(rot.apply(&g) * ((1.0 + setup.delta) * r))
        } else {
            desired.e_star
        };
        let prev = agents[k - 1];
        agents.push(AgentState {
            p: prev.p + e,
            v: prev.v + desired.omega.apply(&e),
        });
    }
    WorldState { t: 0.0, agents }
}

fn potential_at(spec: &FormationSpec, ctrl: &ControllerConfig, agent: usize, e: Vec3) -> f64 {
    let desired = spec.desired_edge(agent, 0.0);
    let follower = AgentState {
        p: e,
        v: desired.omega.apply(&e),
    };
    let obs = EdgeObservables::measure(&follower, &AgentState::default(), 0.0, &desired)
        .expect("probe edge has nonzero length");
    lyapunov(&obs, ctrl.gains(agent)).value
}

pub fn instability_probe(
    spec: &FormationSpec,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
    setup: &ProbeSetup,
    classify: &ClassifyOptions,
) -> Result<ProbeOutcome, SimError> {
    let k = setup.agent;
    assert!(k >= 1 && k < spec.agent_count(), "agent {k} is not a follower");
    let initial = probe_initial_state(spec, setup);
    let r = spec.safety_distance;
    let g = spec.desired_edge(k, 0.0).e_star / spec.edges[k - 1].length;
    let rot = exp_so3(&setup.omega, setup.epsilon);
    let l_start = potential_at(spec, ctrl, k, initial.agents[k].p - initial.agents[k - 1].p);
    let l_unrotated = potential_at(spec, ctrl, k, -(g * ((1.0 + setup.delta) * r)));
    let l_unstable = potential_at(spec, ctrl, k, -(g * r));
    let l_rotated_exact = potential_at(spec, ctrl, k, -(rot.apply(&g) * r));

    let record = run(&initial, spec, ctrl, sim)?;
    let classification = classify_limit(&record, spec, classify);
    let escaped = record.completed() && classification.iter().all(|c| c.is_desired());
    Ok(ProbeOutcome {
        escaped,
        min_d: record.overall_min_d(),
        termination: record.termination,
        classification,
        l_start,
        l_unrotated,
        l_unstable,
        l_rotated_exact,
    })
}

/// Rotation generators used by the standard probe set for an edge along
/// `g*`: two orthonormal perpendiculars, their two diagonals and one
/// oblique axis.
pub fn standard_probe_axes(g: Vec3) -> Vec<SkewMat3> {
    let g = g / g.norm();
    let helper = if g.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let a = g.cross(&helper);
    let a = a / a.norm();
    let b = g.cross(&a);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let oblique = (g + a + b) / 3f64.sqrt();
    [a, b, (a + b) * s, (a - b) * s, oblique]
        .into_iter()
        .map(crate::geom3::skew)
        .collect()
}
