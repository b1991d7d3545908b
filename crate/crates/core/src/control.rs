//! Follower control law: a PD-like nominal tracking term plus the
//! divergent-flow barrier term `-k_o g φ`, with `φ = ḋ/d`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formation::{DesiredEdgeState, FormationSpec};
use crate::geom3::{UnitVec3, Vec3, MIN_DIRECTION_NORM};
use crate::sim::AgentState;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("edge length {norm:e} too small to define a direction")]
    DegenerateEdge { norm: f64 },
    #[error("barrier violated: d = {d:e}")]
    BarrierViolation { d: f64 },
}

/// Relative measurements available to one follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeObservables {
    /// `e = p_i - p_{i-1}`
    pub e: Vec3,
    /// `ν = v_i - v_{i-1}`
    pub nu: Vec3,
    /// `d = |e| - r`
    pub d: f64,
    pub g: UnitVec3,
    /// Divergent flow `ḋ/d = gᵀν / d`.
    pub phi: f64,
    /// `ẽ = e - e*`
    pub e_tilde: Vec3,
    /// `ν̃ = ν - Ω* e`
    pub nu_tilde: Vec3,
}

impl EdgeObservables {
    pub fn measure(
        follower: &AgentState,
        neighbor: &AgentState,
        safety_distance: f64,
        desired: &DesiredEdgeState,
    ) -> Result<Self, ControlError> {
        let e = follower.p - neighbor.p;
        let nu = follower.v - neighbor.v;
        let norm = e.norm();
        if !(norm >= MIN_DIRECTION_NORM) {
            return Err(ControlError::DegenerateEdge { norm });
        }
        let d = norm - safety_distance;
        if !(d > 0.0) {
            return Err(ControlError::BarrierViolation { d });
        }
        let g = UnitVec3::new(e).map_err(|_| ControlError::DegenerateEdge { norm })?;
        Ok(EdgeObservables {
            e,
            nu,
            d,
            g,
            phi: g.get().dot(&nu) / d,
            e_tilde: e - desired.e_star,
            nu_tilde: nu - desired.omega.apply(&e),
        })
    }

    /// `ḋ = gᵀν`
    pub fn d_dot(&self) -> f64 {
        self.phi * self.d
    }
}

/// Bounded positive shaping function used to saturate the nominal gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapingFunction {
    /// `h(s) = η / √(1 + s)`
    InverseSqrt { eta: f64 },
    /// `h(s) = value`; turns the nominal law into a plain PD.
    Constant { value: f64 },
}

impl Default for ShapingFunction {
    fn default() -> Self {
        ShapingFunction::InverseSqrt { eta: 1.0 }
    }
}

impl ShapingFunction {
    /// Defined for `s >= 0`.
    pub fn value(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0, "shaping function evaluated at negative argument {s}");
        match *self {
            ShapingFunction::InverseSqrt { eta } => eta / (1.0 + s).sqrt(),
            ShapingFunction::Constant { value } => value,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            ShapingFunction::InverseSqrt { eta } => -0.5 * eta / (1.0 + s).powf(1.5),
            ShapingFunction::Constant { .. } => 0.0,
        }
    }

    /// `∫_0^upper h(s) ds`
    pub fn integral(&self, upper: f64) -> f64 {
        match *self {
            ShapingFunction::InverseSqrt { eta } => 2.0 * eta * ((1.0 + upper).sqrt() - 1.0),
            ShapingFunction::Constant { value } => value * upper,
        }
    }

    pub fn upper_bound(&self) -> f64 {
        match *self {
            ShapingFunction::InverseSqrt { eta } => eta,
            ShapingFunction::Constant { value } => value,
        }
    }
}

/// Gains of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerGains {
    pub k_p: f64,
    pub k_v: f64,
    /// Barrier gain; zero disables collision avoidance.
    pub k_o: f64,
    /// Applied to `|ẽ|²`.
    #[serde(default)]
    pub h_p: ShapingFunction,
    /// Applied to `|ν̃|`.
    #[serde(default)]
    pub h_v: ShapingFunction,
}

impl FollowerGains {
    pub fn new(k_p: f64, k_v: f64, k_o: f64) -> Self {
        FollowerGains {
            k_p,
            k_v,
            k_o,
            h_p: ShapingFunction::default(),
            h_v: ShapingFunction::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalVariant {
    /// Feeds forward the neighbor's actual input `u_{i-1}`.
    Centralized,
    /// Feeds forward the neighbor's desired acceleration `u*_{i-1}`.
    #[default]
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    #[serde(default)]
    pub variant: NominalVariant,
    /// One entry per follower, in chain order.
    pub followers: Vec<FollowerGains>,
}

impl ControllerConfig {
    pub fn uniform(followers: usize, gains: FollowerGains, variant: NominalVariant) -> Self {
        ControllerConfig {
            variant,
            followers: vec![gains; followers],
        }
    }

    /// Gains of follower `i` (agent index, `i >= 1`).
    pub fn gains(&self, i: usize) -> &FollowerGains {
        &self.followers[i - 1]
    }

    pub fn validate(&self, followers: usize) -> Vec<String> {
        let mut problems = Vec::new();
        if self.followers.len() != followers {
            problems.push(format!(
                "controller.followers has {} entries but the formation has {followers} followers",
                self.followers.len()
            ));
        }
        for (k, g) in self.followers.iter().enumerate() {
            let label = format!("controller.followers[{k}]");
            if !(g.k_p.is_finite() && g.k_p > 0.0) {
                problems.push(format!("{label}.k_p must be positive (got {})", g.k_p));
            }
            if !(g.k_v.is_finite() && g.k_v > 0.0) {
                problems.push(format!("{label}.k_v must be positive (got {})", g.k_v));
            }
            if !(g.k_o.is_finite() && g.k_o >= 0.0) {
                problems.push(format!("{label}.k_o must be non-negative (got {})", g.k_o));
            }
            for (name, h) in [("h_p", g.h_p), ("h_v", g.h_v)] {
                let bound = h.upper_bound();
                if !(bound.is_finite() && bound > 0.0) {
                    problems.push(format!("{label}.{name} must be strictly positive (got {bound})"));
                }
            }
        }
        problems
    }
}

/// `-k_o g φ`
pub fn barrier_feedback(obs: &EdgeObservables, k_o: f64) -> Vec3 {
    obs.g.get() * (-k_o * obs.phi)
}

fn nominal_core(obs: &EdgeObservables, gains: &FollowerGains, u_e_star_of_e: Vec3) -> Vec3 {
    let hp = gains.h_p.value(obs.e_tilde.norm_squared());
    let hv = gains.h_v.value(obs.nu_tilde.norm());
    obs.e_tilde * (-gains.k_p * hp) + obs.nu_tilde * (-gains.k_v * hv) + u_e_star_of_e
}

/// Nominal law fed by the neighbor's actual input `u_prev`.
pub fn nominal_centralized(
    obs: &EdgeObservables,
    gains: &FollowerGains,
    u_e_star_of_e: Vec3,
    u_prev: Vec3,
) -> Vec3 {
    nominal_core(obs, gains, u_e_star_of_e) + u_prev
}

/// Nominal law fed by the neighbor's desired acceleration `u*_{i-1}`.
pub fn nominal_distributed(
    obs: &EdgeObservables,
    gains: &FollowerGains,
    u_e_star_of_e: Vec3,
    u_star_prev: Vec3,
) -> Vec3 {
    nominal_core(obs, gains, u_e_star_of_e) + u_star_prev
}

/// Full follower input: selected nominal law plus barrier feedback.
///
/// `feedforward` is `u_{i-1}` for the centralized variant and `u*_{i-1}`
/// for the distributed one.
pub fn control_input(
    obs: &EdgeObservables,
    gains: &FollowerGains,
    desired: &DesiredEdgeState,
    variant: NominalVariant,
    feedforward: Vec3,
) -> Vec3 {
    // the relative feedforward acts on the measured edge, not on e*
    let u_e = desired.relative_feedforward(&obs.e);
    let nominal = match variant {
        NominalVariant::Centralized => nominal_centralized(obs, gains, u_e, feedforward),
        NominalVariant::Distributed => nominal_distributed(obs, gains, u_e, feedforward),
    };
    nominal + barrier_feedback(obs, gains.k_o)
}

/// Inputs of the whole formation at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationInputs {
    /// One input per agent, leader first.
    pub inputs: Vec<Vec3>,
    /// One entry per follower; `observables[i - 1]` belongs to edge `i`.
    pub observables: Vec<EdgeObservables>,
    /// Feedforward term each follower used (`u_{i-1}` or `u*_{i-1}`).
    pub feedforward: Vec<Vec3>,
    /// Desired acceleration `u*_{i-1}` of each follower's neighbor.
    pub desired_neighbor_input: Vec<Vec3>,
}

/// Evaluates every agent's input. The leader applies its reference
/// acceleration; followers are evaluated in chain order because the
/// centralized variant needs the neighbor's input.
pub fn formation_inputs(
    spec: &FormationSpec,
    cfg: &ControllerConfig,
    t: f64,
    agents: &[AgentState],
) -> Result<FormationInputs, (usize, ControlError)> {
    let n = spec.agent_count();
    debug_assert_eq!(agents.len(), n);
    let mut inputs = Vec::with_capacity(n);
    let mut observables = Vec::with_capacity(n - 1);
    let mut feedforward = Vec::with_capacity(n - 1);
    let mut desired_neighbor_input = Vec::with_capacity(n - 1);

    let mut u_star_prev = spec.leader.at(t).acceleration;
    inputs.push(u_star_prev);
    for i in 1..n {
        let desired = spec.desired_edge(i, t);
        let obs = EdgeObservables::measure(&agents[i], &agents[i - 1], spec.safety_distance, &desired)
            .map_err(|e| (i, e))?;
        let ff = match cfg.variant {
            NominalVariant::Centralized => inputs[i - 1],
            NominalVariant::Distributed => u_star_prev,
        };
        let u = control_input(&obs, cfg.gains(i), &desired, cfg.variant, ff);
        desired_neighbor_input.push(u_star_prev);
        u_star_prev += desired.relative_feedforward(&desired.e_star);
        inputs.push(u);
        observables.push(obs);
        feedforward.push(ff);
    }
    Ok(FormationInputs {
        inputs,
        observables,
        feedforward,
        desired_neighbor_input,
    })
}
