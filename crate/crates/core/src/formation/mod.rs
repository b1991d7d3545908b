//! Chain formation description and the desired trajectories it induces.
//!
//! Agents are indexed from 0; agent 0 is the leader. Edge `i` (for
//! `1 <= i < n`) is the relative position `e_i = p_i - p_{i-1}` measured by
//! follower `i` with respect to its only neighbor `i - 1`.

mod signals;

use serde::{Deserialize, Serialize};

use crate::geom3::{Mat3, SkewMat3, UnitVec3, Vec3};

pub use signals::{Kinematics, LeaderTrajectory, OmegaSignal, SampledPath};

/// Desired shape of one edge: `e*_i(0) = length · direction`, then rotated
/// by the edge's angular velocity signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    /// Constant edge length `c_i` (m); must exceed the safety distance.
    pub length: f64,
    /// Reference direction `g*_i` at `t = 0`.
    pub direction: UnitVec3,
    #[serde(default)]
    pub omega: OmegaSignal,
}

impl EdgeSpec {
    pub fn fixed(length: f64, direction: UnitVec3) -> Self {
        EdgeSpec {
            length,
            direction,
            omega: OmegaSignal::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    /// Safety distance `r` (m).
    pub safety_distance: f64,
    /// Edges `2..n` of the chain, in order; `edges[k]` joins agents `k` and `k + 1`.
    pub edges: Vec<EdgeSpec>,
    pub leader: LeaderTrajectory,
    /// Optional upper bound `D` on desired edge lengths. Only validated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edge_length: Option<f64>,
}

/// Desired relative state of one edge at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredEdgeState {
    pub e_star: Vec3,
    /// `ν* = Ω* e*`
    pub nu_star: Vec3,
    pub omega: SkewMat3,
    pub omega_dot: SkewMat3,
    /// `Ω̇* + Ω*²`, applied to `e` or `e*` to get the relative feedforward.
    pub accel_operator: Mat3,
}

impl DesiredEdgeState {
    /// `u*_e(x) = (Ω̇* + Ω*²) x`
    pub fn relative_feedforward(&self, x: &Vec3) -> Vec3 {
        self.accel_operator.mul_vec(x)
    }
}

impl FormationSpec {
    pub fn agent_count(&self) -> usize {
        self.edges.len() + 1
    }

    /// Every violated structural invariant, as human-readable messages.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let r = self.safety_distance;
        if !(r.is_finite() && r > 0.0) {
            problems.push(format!("formation.safety_distance must be positive (got {r})"));
        }
        if self.edges.is_empty() {
            problems.push("formation.edges: at least one follower is required (n >= 2)".to_string());
        }
        for (k, edge) in self.edges.iter().enumerate() {
            let label = format!("formation.edges[{k}]");
            if !(edge.length.is_finite() && edge.length > r) {
                problems.push(format!(
                    "{label}.length must exceed the safety distance {r} (got {})",
                    edge.length
                ));
            }
            if let Some(bound) = self.max_edge_length {
                if !(edge.length < bound) {
                    problems.push(format!(
                        "{label}.length {} must be below max_edge_length {bound}",
                        edge.length
                    ));
                }
            }
            edge.omega.validate(&label, &mut problems);
        }
        self.leader.validate(&mut problems);
        problems
    }

    /// Desired state of edge `i` (`1 <= i < n`).
    pub fn desired_edge(&self, i: usize, t: f64) -> DesiredEdgeState {
        assert!(i >= 1 && i < self.agent_count(), "edge index {i} out of range");
        let edge = &self.edges[i - 1];
        let e0 = edge.direction.get() * edge.length;
        let omega = edge.omega.value(t);
        let omega_dot = edge.omega.derivative(t);
        let e_star = match edge.omega {
            OmegaSignal::Zero => e0,
            _ => edge.omega.transport(t).apply(&e0),
        };
        DesiredEdgeState {
            e_star,
            nu_star: omega.apply(&e_star),
            omega,
            omega_dot,
            accel_operator: omega_dot.matrix() + omega.squared(),
        }
    }

    /// Desired position, velocity and acceleration of every agent, leader first.
    pub fn desired_kinematics(&self, t: f64) -> Vec<Kinematics> {
        let mut out = Vec::with_capacity(self.agent_count());
        let mut acc = self.leader.at(t);
        out.push(acc);
        for i in 1..self.agent_count() {
            let edge = self.desired_edge(i, t);
            acc = Kinematics {
                position: acc.position + edge.e_star,
                velocity: acc.velocity + edge.nu_star,
                acceleration: acc.acceleration + edge.relative_feedforward(&edge.e_star),
            };
            out.push(acc);
        }
        out
    }

    fn desired_agent(&self, i: usize, t: f64) -> Kinematics {
        assert!(i < self.agent_count(), "agent index {i} out of range");
        let mut acc = self.leader.at(t);
        for j in 1..=i {
            let edge = self.desired_edge(j, t);
            acc.position += edge.e_star;
            acc.velocity += edge.nu_star;
            acc.acceleration += edge.relative_feedforward(&edge.e_star);
        }
        acc
    }

    /// `p*_i = p*_1 + Σ_{j<=i} e*_j`
    pub fn desired_position(&self, i: usize, t: f64) -> Vec3 {
        self.desired_agent(i, t).position
    }

    pub fn desired_velocity(&self, i: usize, t: f64) -> Vec3 {
        self.desired_agent(i, t).velocity
    }

    /// `u*_i = p̈*_1 + Σ_{j<=i} (Ω̇*_j + Ω*_j²) e*_j`
    pub fn desired_feedforward(&self, i: usize, t: f64) -> Vec3 {
        self.desired_agent(i, t).acceleration
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::{exp_so3, skew};
    use std::f64::consts::PI;

    fn chain(omegas: Vec<OmegaSignal>, leader: LeaderTrajectory) -> FormationSpec {
        let dirs = [UnitVec3::X, UnitVec3::Y, UnitVec3::Z];
        FormationSpec {
            safety_distance: 0.5,
            edges: omegas
                .into_iter()
                .enumerate()
                .map(|(k, omega)| EdgeSpec {
                    length: 2.0,
                    direction: dirs[k % 3],
                    omega,
                })
                .collect(),
            leader,
            max_edge_length: None,
        }
    }

    fn still() -> LeaderTrajectory {
        LeaderTrajectory::Stationary { position: Vec3::ZERO }
    }

    #[test]
    fn static_edge_is_constant() {
        let spec = chain(vec![OmegaSignal::Zero], still());
        for t in [0.0, 1.0, 123.4] {
            let d = spec.desired_edge(1, t);
            assert_eq!(d.e_star, Vec3::new(2.0, 0.0, 0.0));
            assert_eq!(d.nu_star, Vec3::ZERO);
        }
    }

    #[test]
    fn quarter_turn_of_constant_generator() {
        let w = 0.7;
        let spec = chain(vec![OmegaSignal::Constant { axis: Vec3::Z * w }], still());
        let d = spec.desired_edge(1, PI / (2.0 * w));
        assert!((d.e_star - Vec3::new(0.0, 2.0, 0.0)).max_abs() < 1e-12);
    }

    #[test]
    fn static_chain_sum() {
        let spec = chain(vec![OmegaSignal::Zero, OmegaSignal::Zero], still());
        assert_eq!(spec.desired_position(0, 3.0), Vec3::ZERO);
        assert_eq!(spec.desired_position(2, 3.0), Vec3::new(2.0, 2.0, 0.0));
    }

    #[test]
    fn rotating_chain_equals_leader_plus_partial_sums() {
        let leader = LeaderTrajectory::Sinusoidal {
            center: Vec3::new(1.0, 0.0, 2.0),
            amplitude: Vec3::new(0.5, 0.3, 0.0),
            frequency: 0.4,
            phase: Vec3::ZERO,
        };
        let spec = chain(
            vec![
                OmegaSignal::Constant { axis: Vec3::Z * 0.3 },
                OmegaSignal::Sinusoidal {
                    axis: Vec3::new(1.0, 0.0, 1.0),
                    bias: 0.0,
                    amplitude: 0.4,
                    frequency: 1.1,
                    phase: 0.2,
                },
                OmegaSignal::Zero,
            ],
            leader.clone(),
        );
        let t = 2.3;
        let mut expected = leader.at(t).position;
        for i in 1..4 {
            // independent summation: rotate each initial edge directly
            let edge = &spec.edges[i - 1];
            let rotated = edge.omega.transport(t).apply(&(edge.direction.get() * edge.length));
            expected += rotated;
            assert!((spec.desired_position(i, t) - expected).max_abs() < 1e-10);
            // telescoping
            let diff = spec.desired_position(i, t) - spec.desired_position(i - 1, t);
            assert!((diff - spec.desired_edge(i, t).e_star).max_abs() < 1e-12);
        }
        let all = spec.desired_kinematics(t);
        for (i, k) in all.iter().enumerate() {
            assert!((k.position - spec.desired_position(i, t)).max_abs() < 1e-12);
            assert!((k.acceleration - spec.desired_feedforward(i, t)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn static_feedforward_is_leader_acceleration() {
        let leader = LeaderTrajectory::ConstantAcceleration {
            position: Vec3::ZERO,
            velocity: Vec3::X,
            acceleration: Vec3::new(0.0, 0.0, -1.0),
        };
        let spec = chain(vec![OmegaSignal::Zero; 3], leader);
        for i in 0..4 {
            assert_eq!(spec.desired_feedforward(i, 1.5), Vec3::new(0.0, 0.0, -1.0));
        }
    }

    #[test]
    fn constant_generator_feedforward_is_centripetal() {
        let w = 0.9;
        let leader = LeaderTrajectory::ConstantAcceleration {
            position: Vec3::ZERO,
            velocity: Vec3::ZERO,
            acceleration: Vec3::new(0.1, 0.0, 0.0),
        };
        let spec = chain(vec![OmegaSignal::Constant { axis: Vec3::Z * w }], leader);
        let t = 0.8;
        // d²/dt² [exp(tΩ) e0] = Ω² exp(tΩ) e0; for e0 ⟂ axis it is -w² e*(t)
        let e = exp_so3(&skew(Vec3::Z * w), t).apply(&Vec3::new(2.0, 0.0, 0.0));
        let expected = Vec3::new(0.1, 0.0, 0.0) - e * (w * w);
        assert!((spec.desired_feedforward(1, t) - expected).max_abs() < 1e-12);
    }

    #[test]
    fn periodic_generator_gives_periodic_feedforward() {
        let freq = 1.7;
        let spec = chain(
            vec![OmegaSignal::Sinusoidal {
                axis: Vec3::new(0.0, 1.0, 1.0),
                bias: 0.0,
                amplitude: 0.6,
                frequency: freq,
                phase: 0.0,
            }],
            still(),
        );
        let period = 2.0 * PI / freq;
        let a = spec.desired_feedforward(1, 0.0);
        let b = spec.desired_feedforward(1, period);
        assert!((a - b).max_abs() < 1e-12);
    }

    #[test]
    fn desired_position_second_difference_matches_feedforward() {
        let spec = chain(
            vec![
                OmegaSignal::Sinusoidal {
                    axis: Vec3::new(0.3, 1.0, 0.0),
                    bias: 0.2,
                    amplitude: 0.5,
                    frequency: 0.9,
                    phase: 0.1,
                },
                OmegaSignal::Constant { axis: Vec3::new(0.0, 0.4, 0.4) },
            ],
            LeaderTrajectory::Sinusoidal {
                center: Vec3::ZERO,
                amplitude: Vec3::new(1.0, 0.0, 0.5),
                frequency: 0.5,
                phase: Vec3::ZERO,
            },
        );
        let t = 1.9;
        for h in [1e-2, 5e-3] {
            for i in 0..3 {
                let fd = (spec.desired_position(i, t + h) - spec.desired_position(i, t) * 2.0
                    + spec.desired_position(i, t - h))
                    / (h * h);
                let err = (fd - spec.desired_feedforward(i, t)).max_abs();
                assert!(err < h * h + 1e-7, "agent {i}, h {h}: {err}");
                let fd_v = (spec.desired_position(i, t + h) - spec.desired_position(i, t - h)) / (2.0 * h);
                assert!((fd_v - spec.desired_velocity(i, t)).max_abs() < h * h);
            }
        }
    }

    #[test]
    fn validation_reports_every_problem() {
        let mut spec = chain(vec![OmegaSignal::Zero, OmegaSignal::Zero], still());
        spec.edges[0].length = 0.5;
        spec.edges[1].length = 0.2;
        let problems = spec.validate();
        assert_eq!(problems.len(), 2, "{problems:?}");
        spec.edges.clear();
        assert!(!spec.validate().is_empty());
    }

    #[test]
    fn optional_length_bound_is_checked() {
        let mut spec = chain(vec![OmegaSignal::Zero], still());
        spec.max_edge_length = Some(1.5);
        assert_eq!(spec.validate().len(), 1);
        spec.max_edge_length = Some(3.0);
        assert!(spec.validate().is_empty());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn desired_edges_preserve_length(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, az in -2.0..2.0f64,
            amp in 0.0..1.5f64, freq in 0.1..3.0f64, t in 0.0..50.0f64,
        ) {
            let spec = FormationSpec {
                safety_distance: 0.3,
                edges: vec![
                    EdgeSpec { length: 1.7, direction: UnitVec3::new(Vec3::new(1.0, 2.0, -1.0)).unwrap(),
                        omega: OmegaSignal::Constant { axis: Vec3::new(ax, ay, az) } },
                    EdgeSpec { length: 2.4, direction: UnitVec3::Z,
                        omega: OmegaSignal::Sinusoidal { axis: Vec3::new(az, ax, ay), bias: 0.1, amplitude: amp, frequency: freq, phase: 0.0 } },
                ],
                leader: LeaderTrajectory::Stationary { position: Vec3::ZERO },
                max_edge_length: None,
            };
            prop_assert!((spec.desired_edge(1, t).e_star.norm() - 1.7).abs() < 1e-8);
            prop_assert!((spec.desired_edge(2, t).e_star.norm() - 2.4).abs() < 1e-8);
            // the desired relative velocity is tangent to the sphere of radius c
            let d = spec.desired_edge(2, t);
            prop_assert!(d.e_star.dot(&d.nu_star).abs() < 1e-9);
        }
    }
}
