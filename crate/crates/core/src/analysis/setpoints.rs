//! Equilibrium set points of the chain and classification of where a
//! trajectory ended up.

use serde::{Deserialize, Serialize};

use crate::formation::FormationSpec;
use crate::geom3::Vec3;
use crate::sim::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
}

/// One equilibrium of agent `k`: every upstream edge `j ≤ k` settles either
/// at its desired length `c_j` or collapsed to `-r` along `g*_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPoint {
    /// 1-based; `m - 1` is the bitmask of collapsed edges (bit `j - 1` for
    /// edge `j`).
    pub index: usize,
    /// Signed length per upstream edge, `c_j` or `-r`.
    pub choices: Vec<f64>,
    pub position: Vec3,
    pub velocity: Vec3,
    pub stability: Stability,
}

/// All `2^k` set points of agent `k` (leader = 0) at time `t`, `m = 1` first.
pub fn enumerate_set_points(spec: &FormationSpec, agent: usize, t: f64) -> Vec<SetPoint> {
    assert!(agent >= 1 && agent < spec.agent_count(), "agent {agent} is not a follower");
    let leader = spec.leader.at(t);
    let edges: Vec<_> = (1..=agent)
        .map(|j| {
            let desired = spec.desired_edge(j, t);
            let c = spec.edges[j - 1].length;
            (c, desired.e_star / c, desired.nu_star / c)
        })
        .collect();
    let r = spec.safety_distance;
    (0..1usize << agent)
        .map(|mask| {
            let choices: Vec<f64> = edges
                .iter()
                .enumerate()
                .map(|(j, (c, _, _))| if mask >> j & 1 == 1 { -r } else { *c })
                .collect();
            let mut position = leader.position;
            let mut velocity = leader.velocity;
            for (s, (_, g, g_dot)) in choices.iter().zip(&edges) {
                position += *g * *s;
                velocity += *g_dot * *s;
            }
            SetPoint {
                index: mask + 1,
                choices,
                position,
                velocity,
                stability: if mask == 0 {
                    Stability::AsymptoticallyStable
                } else {
                    Stability::Unstable
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    SetPoint {
        index: usize,
        mean_distance: f64,
        mean_speed: f64,
    },
    /// Closest candidate by mean tail distance.
    NotConverged {
        nearest: usize,
        mean_distance: f64,
        mean_speed: f64,
    },
}

impl Classification {
    pub fn index(&self) -> Option<usize> {
        match self {
            Classification::SetPoint { index, .. } => Some(*index),
            Classification::NotConverged { .. } => None,
        }
    }

    pub fn is_desired(&self) -> bool {
        self.index() == Some(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub tol_pos: f64,
    pub tol_vel: f64,
    /// Fraction of the recorded time span forming the tail window.
    pub tail_fraction: f64,
}

impl ClassifyOptions {
    pub fn for_safety_distance(r: f64) -> Self {
        ClassifyOptions {
            tol_pos: 1e-2 * r,
            tol_vel: 1e-3,
            tail_fraction: 0.1,
        }
    }
}

/// Classifies each follower (entry `k - 1` for agent `k`) by the mean
/// distance and relative speed to every set point over the tail window.
pub fn classify_limit(record: &TrajectoryRecord, spec: &FormationSpec, opts: &ClassifyOptions) -> Vec<Classification> {
    let n = spec.agent_count();
    let Some(last) = record.rows.last() else {
        return (1..n)
            .map(|_| Classification::NotConverged {
                nearest: 1,
                mean_distance: f64::INFINITY,
                mean_speed: f64::INFINITY,
            })
            .collect();
    };
    let t0 = record.rows[0].t;
    let cut = last.t - opts.tail_fraction * (last.t - t0);
    let tail: Vec<_> = record.rows.iter().filter(|r| r.t >= cut).collect();
    let mut sums: Vec<Vec<(f64, f64)>> = (1..n).map(|k| vec![(0.0, 0.0); 1 << k]).collect();
    for row in &tail {
        for k in 1..n {
            for (acc, sp) in sums[k - 1].iter_mut().zip(enumerate_set_points(spec, k, row.t)) {
                acc.0 += (row.agents[k].p - sp.position).norm();
                acc.1 += (row.agents[k].v - sp.velocity).norm();
            }
        }
    }
    let count = tail.len() as f64;
    sums.into_iter()
        .map(|per_point| {
            let (m, (dist, speed)) = per_point
                .into_iter()
                .map(|(d, s)| (d / count, s / count))
                .enumerate()
                .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .expect("at least one set point");
            if dist < opts.tol_pos && speed < opts.tol_vel {
                Classification::SetPoint {
                    index: m + 1,
                    mean_distance: dist,
                    mean_speed: speed,
                }
            } else {
                Classification::NotConverged {
                    nearest: m + 1,
                    mean_distance: dist,
                    mean_speed: speed,
                }
            }
        })
        .collect()
}
