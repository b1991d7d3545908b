//! Closed-loop integration of the double-integrator chain.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::lyapunov::{lyapunov, lyapunov_rate_with_cascade};
use crate::control::{formation_inputs, ControlError, ControllerConfig, FormationInputs};
use crate::formation::FormationSpec;
use crate::geom3::Vec3;
use crate::output::format_cell;
use crate::ode::{dopri45, rk4_refined, rk4_step, AdaptiveTolerance, Refinement};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub p: Vec3,
    pub v: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    #[serde(default)]
    pub t: f64,
    pub agents: Vec<AgentState>,
}

impl WorldState {
    fn pack(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(6 * self.agents.len());
        for a in &self.agents {
            x.extend_from_slice(&a.p.to_array());
            x.extend_from_slice(&a.v.to_array());
        }
        x
    }

    fn unpack(t: f64, x: &[f64]) -> WorldState {
        WorldState {
            t,
            agents: x
                .chunks_exact(6)
                .map(|c| AgentState {
                    p: Vec3::new(c[0], c[1], c[2]),
                    v: Vec3::new(c[3], c[4], c[5]),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.agents.iter().all(|a| a.p.is_finite() && a.v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Rk45Adaptive {
        #[serde(default)]
        tolerance: AdaptiveTolerance,
    },
}

fn default_stride() -> usize {
    1
}

fn default_refine_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Base step (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// Abort threshold on `d` (m). Defaults to `1e-6 · r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_floor: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// RK4 steps refine whenever some `d < refine_fraction · r`.
    #[serde(default = "default_refine_fraction")]
    pub refine_fraction: f64,
    #[serde(default)]
    pub refinement: Refinement,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimConfig {
            dt,
            t_end,
            integrator: Integrator::Rk4,
            d_floor: None,
            record_stride: 1,
            refine_fraction: default_refine_fraction(),
            refinement: Refinement::default(),
        }
    }

    pub fn d_floor_for(&self, safety_distance: f64) -> f64 {
        self.d_floor.unwrap_or(1e-6 * safety_distance)
    }

    pub fn validate(&self, safety_distance: f64) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("sim.dt must be positive (got {})", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            problems.push(format!("sim.t_end must be positive (got {})", self.t_end));
        }
        let floor = self.d_floor_for(safety_distance);
        if !(floor > 0.0 && floor < 0.1 * safety_distance) {
            problems.push(format!(
                "sim.d_floor must lie in (0, 0.1·r) = (0, {}) (got {floor})",
                0.1 * safety_distance
            ));
        }
        if self.record_stride == 0 {
            problems.push("sim.record_stride must be at least 1".to_string());
        }
        if !(self.refine_fraction >= 0.0) {
            problems.push("sim.refine_fraction must be non-negative".to_string());
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimError {
    /// `edge` is the follower's agent index.
    #[error("barrier violated on edge {edge} at t = {t}: d = {d:e}")]
    BarrierViolation { edge: usize, t: f64, d: f64 },
    #[error("edge {edge} degenerated at t = {t} (|e| = {norm:e})")]
    DegenerateEdge { edge: usize, t: f64, norm: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid initial state: {0}")]
    InvalidInitial(String),
}

impl SimError {
    fn from_control(edge: usize, t: f64, err: ControlError) -> Self {
        match err {
            ControlError::BarrierViolation { d } => SimError::BarrierViolation { edge, t, d },
            ControlError::DegenerateEdge { norm } => SimError::DegenerateEdge { edge, t, norm },
        }
    }
}

/// Evaluates the controller and enforces the barrier floor.
pub fn evaluate(
    state: &WorldState,
    spec: &FormationSpec,
    ctrl: &ControllerConfig,
    d_floor: f64,
) -> Result<FormationInputs, SimError> {
    if !state.is_finite() {
        return Err(SimError::NonFiniteState { t: state.t });
    }
    let out = formation_inputs(spec, ctrl, state.t, &state.agents)
        .map_err(|(edge, e)| SimError::from_control(edge, state.t, e))?;
    if let Some((k, o)) = out.observables.iter().enumerate().find(|(_, o)| o.d <= d_floor) {
        return Err(SimError::BarrierViolation {
            edge: k + 1,
            t: state.t,
            d: o.d,
        });
    }
    if out.inputs.iter().any(|u| !u.is_finite()) {
        return Err(SimError::NonFiniteState { t: state.t });
    }
    Ok(out)
}

fn min_gap(state: &WorldState, r: f64) -> f64 {
    state
        .agents
        .windows(2)
        .map(|w| (w[1].p - w[0].p).norm() - r)
        .fold(f64::INFINITY, f64::min)
}

/// Advances the world by one base step `sim.dt`, re-evaluating the control
/// at every internal stage.
pub fn step(
    state: &WorldState,
    spec: &FormationSpec,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
) -> Result<WorldState, SimError> {
    step_by(state, spec, ctrl, sim, sim.dt)
}

fn step_by(
    state: &WorldState,
    spec: &FormationSpec,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
    h: f64,
) -> Result<WorldState, SimError> {
    let r = spec.safety_distance;
    let d_floor = sim.d_floor_for(r);
    let mut rhs = |t: f64, x: &[f64]| -> Result<Vec<f64>, SimError> {
        let world = WorldState::unpack(t, x);
        let inputs = evaluate(&world, spec, ctrl, d_floor)?;
        let mut dx = Vec::with_capacity(x.len());
        for (a, u) in world.agents.iter().zip(&inputs.inputs) {
            dx.extend_from_slice(&a.v.to_array());
            dx.extend_from_slice(&u.to_array());
        }
        Ok(dx)
    };
    let x = state.pack();
    let next = match sim.integrator {
        Integrator::Rk4 => {
            if min_gap(state, r) < sim.refine_fraction * r {
                rk4_refined(&mut rhs, state.t, &x, h, &sim.refinement)?
            } else {
                match rk4_step(&mut rhs, state.t, &x, h) {
                    Ok(next) => next,
                    Err(_) => rk4_refined(&mut rhs, state.t, &x, h, &sim.refinement)?,
                }
            }
        }
        Integrator::Rk45Adaptive { tolerance } => dopri45(&mut rhs, state.t, &x, h, &tolerance)?,
    };
    let next = WorldState::unpack(state.t + h, &next);
    if !next.is_finite() {
        return Err(SimError::NonFiniteState { t: next.t });
    }
    Ok(next)
}

/// Per-follower tracking errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    /// `e_i - e*_i`
    pub e_tilde: Vec3,
    /// `ν_i - Ω*_i e_i`
    pub nu_tilde: Vec3,
    /// `p_i - p*_i`
    pub p_tilde: Vec3,
    /// `v_i - v*_i`
    pub v_tilde: Vec3,
}

/// Tracking errors of every follower; entry `i - 1` belongs to agent `i`.
pub fn error_states(state: &WorldState, spec: &FormationSpec) -> Vec<ErrorState> {
    let desired = spec.desired_kinematics(state.t);
    (1..spec.agent_count())
        .map(|i| {
            let edge = spec.desired_edge(i, state.t);
            let e = state.agents[i].p - state.agents[i - 1].p;
            let nu = state.agents[i].v - state.agents[i - 1].v;
            ErrorState {
                e_tilde: e - edge.e_star,
                nu_tilde: nu - edge.omega.apply(&e),
                p_tilde: state.agents[i].p - desired[i].position,
                v_tilde: state.agents[i].v - desired[i].velocity,
            }
        })
        .collect()
}

/// One logged instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub t: f64,
    pub agents: Vec<AgentState>,
    /// Every agent's input, leader first.
    pub inputs: Vec<Vec3>,
    /// Per follower, in chain order.
    pub d: Vec<f64>,
    pub phi: Vec<f64>,
    pub e_tilde: Vec<Vec3>,
    pub nu_tilde: Vec<Vec3>,
    pub lyapunov: Vec<f64>,
    /// Analytic `dL/dt`, including the cascade term of the distributed law.
    pub lyapunov_rate: Vec<f64>,
}

impl RecordRow {
    fn new(state: &WorldState, spec: &FormationSpec, ctrl: &ControllerConfig, eval: &FormationInputs) -> Self {
        let followers = spec.agent_count() - 1;
        let mut lyap = Vec::with_capacity(followers);
        let mut rate = Vec::with_capacity(followers);
        for (k, obs) in eval.observables.iter().enumerate() {
            let gains = ctrl.gains(k + 1);
            lyap.push(lyapunov(obs, gains).value);
            let cascade = eval.feedforward[k] - eval.inputs[k];
            rate.push(lyapunov_rate_with_cascade(obs, gains, cascade));
        }
        RecordRow {
            t: state.t,
            agents: state.agents.clone(),
            inputs: eval.inputs.clone(),
            d: eval.observables.iter().map(|o| o.d).collect(),
            phi: eval.observables.iter().map(|o| o.phi).collect(),
            e_tilde: eval.observables.iter().map(|o| o.e_tilde).collect(),
            nu_tilde: eval.observables.iter().map(|o| o.nu_tilde).collect(),
            lyapunov: lyap,
            lyapunov_rate: rate,
        }
    }

    pub fn state(&self) -> WorldState {
        WorldState {
            t: self.t,
            agents: self.agents.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Aborted { error: SimError },
}

/// Time-indexed log of a run plus how it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub agent_count: usize,
    pub rows: Vec<RecordRow>,
    pub termination: Termination,
    /// Last state reached (recorded or not).
    pub final_state: WorldState,
    /// Per follower, over every accepted step.
    pub min_d: Vec<f64>,
    pub max_abs_phi: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn violation(&self) -> Option<&SimError> {
        match &self.termination {
            Termination::Aborted { error } => Some(error),
            Termination::Completed => None,
        }
    }

    pub fn overall_min_d(&self) -> f64 {
        self.min_d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn overall_max_abs_phi(&self) -> f64 {
        self.max_abs_phi.iter().copied().fold(0.0, f64::max)
    }

    pub fn csv_header(agent_count: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for q in ["p", "v"] {
            for i in 1..=agent_count {
                for axis in ["x", "y", "z"] {
                    cols.push(format!("{q}{i}{axis}"));
                }
            }
        }
        for i in 2..=agent_count {
            for axis in ["x", "y", "z"] {
                cols.push(format!("u{i}{axis}"));
            }
        }
        for q in ["d", "phi", "L"] {
            for i in 2..=agent_count {
                cols.push(format!("{q}{i}"));
            }
        }
        cols
    }

    /// One row per record; agents numbered from 1 (the leader).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.agent_count).join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            line.push_str(&format_cell(row.t));
            let mut push = |v: f64| {
                line.push(',');
                line.push_str(&format_cell(v));
            };
            for a in &row.agents {
                a.p.to_array().into_iter().for_each(&mut push);
            }
            for a in &row.agents {
                a.v.to_array().into_iter().for_each(&mut push);
            }
            for u in &row.inputs[1..] {
                u.to_array().into_iter().for_each(&mut push);
            }
            row.d.iter().chain(&row.phi).chain(&row.lyapunov).copied().for_each(&mut push);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Integrates from `initial` to `sim.t_end`. A barrier violation or blow-up
/// ends the run early; the record up to that point is kept and the reason
/// is stored in [`TrajectoryRecord::termination`].
pub fn run(
    initial: &WorldState,
    spec: &FormationSpec,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
) -> Result<TrajectoryRecord, SimError> {
    let n = spec.agent_count();
    if initial.agents.len() != n {
        return Err(SimError::InvalidInitial(format!(
            "{} agent states for a formation of {n}",
            initial.agents.len()
        )));
    }
    let r = spec.safety_distance;
    for i in 1..n {
        let d = (initial.agents[i].p - initial.agents[i - 1].p).norm() - r;
        if !(d > 0.0) {
            return Err(SimError::InvalidInitial(format!(
                "edge {i} starts inside the safety distance (d = {d})"
            )));
        }
    }
    let d_floor = sim.d_floor_for(r);
    let steps = ((sim.t_end - initial.t) / sim.dt - 1e-9).ceil().max(0.0) as usize;
    let stride = sim.record_stride.max(1);

    let mut rows = Vec::with_capacity(steps / stride + 2);
    let mut min_d = vec![f64::INFINITY; n - 1];
    let mut max_abs_phi = vec![0.0f64; n - 1];
    let mut state = initial.clone();
    let mut termination = Termination::Completed;

    for k in 0..=steps {
        let eval = match evaluate(&state, spec, ctrl, d_floor) {
            Ok(eval) => eval,
            Err(error) => {
                termination = Termination::Aborted { error };
                break;
            }
        };
        for (j, o) in eval.observables.iter().enumerate() {
            min_d[j] = min_d[j].min(o.d);
            max_abs_phi[j] = max_abs_phi[j].max(o.phi.abs());
        }
        if k % stride == 0 || k == steps {
            rows.push(RecordRow::new(&state, spec, ctrl, &eval));
        }
        if k == steps {
            break;
        }
        let h = if k + 1 == steps {
            sim.t_end - state.t
        } else {
            initial.t + (k + 1) as f64 * sim.dt - state.t
        };
        match step_by(&state, spec, ctrl, sim, h) {
            Ok(mut next) => {
                next.t = if k + 1 == steps {
                    sim.t_end
                } else {
                    initial.t + (k + 1) as f64 * sim.dt
                };
                state = next;
            }
            Err(error) => {
                if let Some(last) = rows.last() {
                    if last.t < state.t {
                        rows.push(RecordRow::new(&state, spec, ctrl, &eval));
                    }
                }
                if let SimError::BarrierViolation { edge, d, .. } = error {
                    min_d[edge - 1] = min_d[edge - 1].min(d);
                }
                termination = Termination::Aborted { error };
                break;
            }
        }
    }

    Ok(TrajectoryRecord {
        agent_count: n,
        rows,
        termination,
        final_state: state,
        min_d,
        max_abs_phi,
    })
}
