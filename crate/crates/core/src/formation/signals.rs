//! Reference signals: per-edge angular velocity and the leader trajectory.

use serde::{Deserialize, Serialize};

use crate::geom3::{exp_so3, skew, Rot3, SkewMat3, Vec3};

/// Angular-velocity generator `Ω*(t)` of one desired edge.
///
/// Every family keeps a fixed axis on each interval, so the edge transport
/// `e*(t) = R(t) e*(0)` has a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaSignal {
    Zero,
    /// `Ω*(t) = axis×`
    Constant { axis: Vec3 },
    /// `Ω*(t) = (bias + amplitude·sin(frequency·t + phase)) axis×`
    Sinusoidal {
        axis: Vec3,
        #[serde(default)]
        bias: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Ω*(t) = axes[k]×` on `[switch_times[k-1], switch_times[k])`.
    PiecewiseConstant { switch_times: Vec<f64>, axes: Vec<Vec3> },
}

impl Default for OmegaSignal {
    fn default() -> Self {
        OmegaSignal::Zero
    }
}

impl OmegaSignal {
    pub fn value(&self, t: f64) -> SkewMat3 {
        match self {
            OmegaSignal::Zero => SkewMat3::ZERO,
            OmegaSignal::Constant { axis } => skew(*axis),
            OmegaSignal::Sinusoidal {
                axis,
                bias,
                amplitude,
                frequency,
                phase,
            } => skew(*axis * (bias + amplitude * (frequency * t + phase).sin())),
            OmegaSignal::PiecewiseConstant { switch_times, axes } => {
                skew(axes.get(segment_of(switch_times, t)).copied().unwrap_or_default())
            }
        }
    }

    /// Time derivative of `Ω*`; zero inside pieces of the piecewise family.
    pub fn derivative(&self, t: f64) -> SkewMat3 {
        match self {
            OmegaSignal::Sinusoidal {
                axis,
                amplitude,
                frequency,
                phase,
                ..
            } => skew(*axis * (amplitude * frequency * (frequency * t + phase).cos())),
            _ => SkewMat3::ZERO,
        }
    }

    /// Rotation `R(t)` solving `Ṙ = Ω*(t) R`, `R(0) = I`.
    pub fn transport(&self, t: f64) -> Rot3 {
        match self {
            OmegaSignal::Zero => Rot3::IDENTITY,
            OmegaSignal::Constant { axis } => exp_so3(&skew(*axis), t),
            OmegaSignal::Sinusoidal {
                axis,
                bias,
                amplitude,
                frequency,
                phase,
            } => {
                let angle = if *frequency == 0.0 {
                    (bias + amplitude * phase.sin()) * t
                } else {
                    bias * t + amplitude / frequency * (phase.cos() - (frequency * t + phase).cos())
                };
                exp_so3(&skew(*axis), angle)
            }
            OmegaSignal::PiecewiseConstant { switch_times, axes } => {
                if t <= 0.0 {
                    return exp_so3(&skew(axes.first().copied().unwrap_or_default()), t);
                }
                let mut rot = Rot3::IDENTITY;
                let mut start = 0.0;
                for (k, axis) in axes.iter().enumerate() {
                    let end = switch_times.get(k).copied().unwrap_or(f64::INFINITY);
                    if end <= start {
                        continue;
                    }
                    let stop = end.min(t);
                    rot = exp_so3(&skew(*axis), stop - start).compose(&rot);
                    if t <= end {
                        break;
                    }
                    start = end;
                }
                rot
            }
        }
    }

    pub(crate) fn validate(&self, label: &str, problems: &mut Vec<String>) {
        match self {
            OmegaSignal::Zero => {}
            OmegaSignal::Constant { axis } => {
                if !axis.is_finite() {
                    problems.push(format!("{label}: omega axis must be finite"));
                }
            }
            OmegaSignal::Sinusoidal {
                axis,
                bias,
                amplitude,
                frequency,
                phase,
            } => {
                if !axis.is_finite() || ![bias, amplitude, frequency, phase].iter().all(|v| v.is_finite()) {
                    problems.push(format!("{label}: sinusoidal omega parameters must be finite"));
                }
            }
            OmegaSignal::PiecewiseConstant { switch_times, axes } => {
                if axes.len() != switch_times.len() + 1 {
                    problems.push(format!(
                        "{label}: piecewise omega needs one more axis than switch times ({} axes, {} switches)",
                        axes.len(),
                        switch_times.len()
                    ));
                }
                if switch_times.windows(2).any(|w| w[1] <= w[0]) || switch_times.iter().any(|s| *s <= 0.0) {
                    problems.push(format!("{label}: switch times must be positive and strictly increasing"));
                }
            }
        }
    }
}

fn segment_of(switch_times: &[f64], t: f64) -> usize {
    switch_times.partition_point(|s| *s <= t)
}

/// Position, velocity and acceleration of the leader reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// Smooth leader reference `p*_1(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeaderTrajectory {
    Stationary { position: Vec3 },
    ConstantVelocity { position: Vec3, velocity: Vec3 },
    ConstantAcceleration {
        position: Vec3,
        velocity: Vec3,
        acceleration: Vec3,
    },
    /// `center + amplitude ⊙ sin(frequency·t + phase)` component-wise.
    Sinusoidal {
        center: Vec3,
        amplitude: Vec3,
        frequency: f64,
        #[serde(default)]
        phase: Vec3,
    },
    Sampled(SampledPath),
}

impl LeaderTrajectory {
    pub fn at(&self, t: f64) -> Kinematics {
        match self {
            LeaderTrajectory::Stationary { position } => Kinematics {
                position: *position,
                velocity: Vec3::ZERO,
                acceleration: Vec3::ZERO,
            },
            LeaderTrajectory::ConstantVelocity { position, velocity } => Kinematics {
                position: *position + *velocity * t,
                velocity: *velocity,
                acceleration: Vec3::ZERO,
            },
            LeaderTrajectory::ConstantAcceleration {
                position,
                velocity,
                acceleration,
            } => Kinematics {
                position: *position + *velocity * t + *acceleration * (0.5 * t * t),
                velocity: *velocity + *acceleration * t,
                acceleration: *acceleration,
            },
            LeaderTrajectory::Sinusoidal {
                center,
                amplitude,
                frequency,
                phase,
            } => {
                let arg = |p: f64| frequency * t + p;
                let s = Vec3::new(arg(phase.x).sin(), arg(phase.y).sin(), arg(phase.z).sin());
                let c = Vec3::new(arg(phase.x).cos(), arg(phase.y).cos(), arg(phase.z).cos());
                Kinematics {
                    position: *center + amplitude.component_mul(&s),
                    velocity: amplitude.component_mul(&c) * *frequency,
                    acceleration: amplitude.component_mul(&s) * -(frequency * frequency),
                }
            }
            LeaderTrajectory::Sampled(path) => path.at(t),
        }
    }

    pub(crate) fn validate(&self, problems: &mut Vec<String>) {
        let finite = match self {
            LeaderTrajectory::Stationary { position } => position.is_finite(),
            LeaderTrajectory::ConstantVelocity { position, velocity } => {
                position.is_finite() && velocity.is_finite()
            }
            LeaderTrajectory::ConstantAcceleration {
                position,
                velocity,
                acceleration,
            } => position.is_finite() && velocity.is_finite() && acceleration.is_finite(),
            LeaderTrajectory::Sinusoidal {
                center,
                amplitude,
                frequency,
                phase,
            } => center.is_finite() && amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            LeaderTrajectory::Sampled(_) => true,
        };
        if !finite {
            problems.push("formation.leader: trajectory parameters must be finite".to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampledPathRaw {
    times: Vec<f64>,
    positions: Vec<Vec3>,
}

/// Leader path through sampled waypoints, smoothed by a natural cubic
/// spline per coordinate. Outside the sampled interval the path continues
/// along the end tangent, which keeps it twice differentiable because the
/// natural spline has zero curvature at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledPathRaw", into = "SampledPathRaw")]
pub struct SampledPath {
    times: Vec<f64>,
    positions: Vec<Vec3>,
    /// Second derivatives at the knots.
    curvature: Vec<Vec3>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, positions: Vec<Vec3>) -> Result<Self, String> {
        if times.len() != positions.len() {
            return Err(format!(
                "sampled leader path: {} times but {} positions",
                times.len(),
                positions.len()
            ));
        }
        if times.len() < 2 {
            return Err("sampled leader path needs at least two samples".to_string());
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("sampled leader path: times must be strictly increasing".to_string());
        }
        if times.iter().any(|t| !t.is_finite()) || positions.iter().any(|p| !p.is_finite()) {
            return Err("sampled leader path: samples must be finite".to_string());
        }
        let curvature = natural_spline_curvature(&times, &positions);
        Ok(SampledPath {
            times,
            positions,
            curvature,
        })
    }

    pub fn at(&self, t: f64) -> Kinematics {
        let n = self.times.len();
        if t <= self.times[0] || t >= self.times[n - 1] {
            let k = if t <= self.times[0] { 0 } else { n - 2 };
            let end = if t <= self.times[0] { k } else { k + 1 };
            let slope = self.segment(k, self.times[end]).velocity;
            return Kinematics {
                position: self.positions[end] + slope * (t - self.times[end]),
                velocity: slope,
                acceleration: Vec3::ZERO,
            };
        }
        let k = self.times.partition_point(|s| *s <= t) - 1;
        self.segment(k, t)
    }

    fn segment(&self, k: usize, t: f64) -> Kinematics {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        let (y0, y1) = (self.positions[k], self.positions[k + 1]);
        let (m0, m1) = (self.curvature[k], self.curvature[k + 1]);
        let position = y0 * a
            + y1 * b
            + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        let velocity = (y1 - y0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0);
        let acceleration = m0 * a + m1 * b;
        Kinematics {
            position,
            velocity,
            acceleration,
        }
    }
}

impl TryFrom<SampledPathRaw> for SampledPath {
    type Error = String;
    fn try_from(raw: SampledPathRaw) -> Result<Self, Self::Error> {
        SampledPath::new(raw.times, raw.positions)
    }
}

impl From<SampledPath> for SampledPathRaw {
    fn from(p: SampledPath) -> Self {
        SampledPathRaw {
            times: p.times,
            positions: p.positions,
        }
    }
}

/// Thomas algorithm on the natural-spline tridiagonal system.
fn natural_spline_curvature(times: &[f64], ys: &[Vec3]) -> Vec<Vec3> {
    let n = times.len();
    let mut m = vec![Vec3::ZERO; n];
    if n < 3 {
        return m;
    }
    let interior = n - 2;
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![Vec3::ZERO; interior];
    for i in 1..n - 1 {
        let h0 = times[i] - times[i - 1];
        let h1 = times[i + 1] - times[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0) * 6.0;
    }
    for i in 1..interior {
        let lower = times[i + 1] - times[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] = rhs[i] - rhs[i - 1] * w;
    }
    m[interior] = rhs[interior - 1] / diag[interior - 1];
    for i in (0..interior - 1).rev() {
        m[i + 1] = (rhs[i] - m[i + 2] * upper[i]) / diag[i];
    }
    m
}
