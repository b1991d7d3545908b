//! Scalar barrier dynamics `d̈ = -k_o ḋ/d - α(t)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{rk4_refined, rk4_step, Refinement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    /// rad/s, nonzero
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Bounded disturbance `α(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSignal {
    Constant { value: f64 },
    /// `offset + Σ A sin(f t + φ)`
    Harmonics {
        #[serde(default)]
        offset: f64,
        terms: Vec<Harmonic>,
    },
}

impl AlphaSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            AlphaSignal::Constant { value } => *value,
            AlphaSignal::Harmonics { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|h| h.amplitude * (h.frequency * t + h.phase).sin())
                        .sum::<f64>()
            }
        }
    }

    /// `∫₀ᵗ α`
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            AlphaSignal::Constant { value } => value * t,
            AlphaSignal::Harmonics { offset, terms } => {
                offset * t
                    + terms
                        .iter()
                        .map(|h| h.amplitude / h.frequency * (h.phase.cos() - (h.frequency * t + h.phase).cos()))
                        .sum::<f64>()
            }
        }
    }

    /// `sup |α|`
    pub fn bound(&self) -> f64 {
        match self {
            AlphaSignal::Constant { value } => value.abs(),
            AlphaSignal::Harmonics { offset, terms } => {
                offset.abs() + terms.iter().map(|h| h.amplitude.abs()).sum::<f64>()
            }
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            AlphaSignal::Constant { value } => value.is_finite(),
            AlphaSignal::Harmonics { offset, terms } => {
                offset.is_finite()
                    && terms.iter().all(|h| {
                        h.amplitude.is_finite() && h.frequency.is_finite() && h.frequency != 0.0 && h.phase.is_finite()
                    })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBarrierSystem {
    pub k_o: f64,
    pub alpha: AlphaSignal,
    pub d0: f64,
    pub d_dot0: f64,
}

impl ScalarBarrierSystem {
    pub fn validate(&self) -> Result<(), Lemma1Error> {
        if !(self.k_o.is_finite() && self.k_o > 0.0) {
            return Err(Lemma1Error::Invalid(format!("k_o must be positive (got {})", self.k_o)));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Lemma1Error::Invalid(format!("d0 must be positive (got {})", self.d0)));
        }
        if !self.d_dot0.is_finite() {
            return Err(Lemma1Error::Invalid("initial ḋ must be finite".to_string()));
        }
        if !self.alpha.is_valid() {
            return Err(Lemma1Error::Invalid("α must be finite with nonzero frequencies".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Lemma1Error {
    #[error("invalid scalar system: {0}")]
    Invalid(String),
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StageError {
    Floor { d: f64 },
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Stop once `d` would fall to this value.
    pub d_floor: f64,
    pub record_stride: usize,
    /// Steps refine whenever `d < refine_fraction · d0` or `k_o dt / d > 0.5`.
    pub refine_fraction: f64,
    pub refinement: Refinement,
}

impl ScalarOptions {
    pub fn new(sys: &ScalarBarrierSystem, horizon: f64, dt: f64) -> Self {
        ScalarOptions {
            horizon,
            dt,
            d_floor: 1e-12 * sys.d0,
            record_stride: 1,
            refine_fraction: 0.1,
            refinement: Refinement::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarTermination {
    Completed,
    FloorReached { t: f64, d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarTrajectory {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub d_dot: Vec<f64>,
    pub phi: Vec<f64>,
    /// `∫₀ᵗ α`, integrated alongside the state.
    pub alpha_integral: Vec<f64>,
    /// Over every step, not just recorded ones.
    pub min_d: f64,
    pub max_abs_phi: f64,
    pub termination: ScalarTermination,
}

impl ScalarTrajectory {
    pub fn terminal_phi(&self) -> f64 {
        *self.phi.last().expect("trajectory has at least the initial row")
    }

    pub fn terminal_d(&self) -> f64 {
        *self.d.last().expect("trajectory has at least the initial row")
    }
}

/// Integrates with default options (floor `1e-12 · d0`, every step recorded).
pub fn lemma1_simulate(sys: &ScalarBarrierSystem, horizon: f64, dt: f64) -> Result<ScalarTrajectory, Lemma1Error> {
    lemma1_simulate_with(sys, &ScalarOptions::new(sys, horizon, dt))
}

pub fn lemma1_simulate_with(sys: &ScalarBarrierSystem, opts: &ScalarOptions) -> Result<ScalarTrajectory, Lemma1Error> {
    sys.validate()?;
    if !(opts.dt > 0.0 && opts.horizon > 0.0) {
        return Err(Lemma1Error::Invalid("dt and horizon must be positive".to_string()));
    }
    let mut rhs = |t: f64, x: &[f64]| -> Result<Vec<f64>, StageError> {
        let (d, d_dot) = (x[0], x[1]);
        if !(d.is_finite() && d_dot.is_finite()) {
            return Err(StageError::NonFinite);
        }
        if d <= opts.d_floor {
            return Err(StageError::Floor { d });
        }
        let a = sys.alpha.value(t);
        Ok(vec![d_dot, -sys.k_o * d_dot / d - a, a])
    };

    let steps = (opts.horizon / opts.dt - 1e-9).ceil() as usize;
    let stride = opts.record_stride.max(1);
    let mut out = ScalarTrajectory {
        t: Vec::new(),
        d: Vec::new(),
        d_dot: Vec::new(),
        phi: Vec::new(),
        alpha_integral: Vec::new(),
        min_d: sys.d0,
        max_abs_phi: (sys.d_dot0 / sys.d0).abs(),
        termination: ScalarTermination::Completed,
    };
    let push = |out: &mut ScalarTrajectory, t: f64, x: &[f64]| {
        out.t.push(t);
        out.d.push(x[0]);
        out.d_dot.push(x[1]);
        out.phi.push(x[1] / x[0]);
        out.alpha_integral.push(x[2]);
    };

    let mut x = vec![sys.d0, sys.d_dot0, 0.0];
    let mut t = 0.0;
    push(&mut out, t, &x);
    for k in 1..=steps {
        let t_next = if k == steps { opts.horizon } else { k as f64 * opts.dt };
        let h = t_next - t;
        let stiff = x[0] < opts.refine_fraction * sys.d0 || sys.k_o * h / x[0] > 0.5;
        let result = if stiff {
            rk4_refined(&mut rhs, t, &x, h, &opts.refinement)
        } else {
            rk4_step(&mut rhs, t, &x, h).or_else(|_| rk4_refined(&mut rhs, t, &x, h, &opts.refinement))
        };
        match result {
            Ok(next) if next.iter().all(|v| v.is_finite()) => {
                x = next;
                t = t_next;
                if x[0] <= opts.d_floor {
                    out.termination = ScalarTermination::FloorReached { t, d: x[0] };
                    out.min_d = out.min_d.min(x[0]);
                    break;
                }
                out.min_d = out.min_d.min(x[0]);
                out.max_abs_phi = out.max_abs_phi.max((x[1] / x[0]).abs());
                if k % stride == 0 || k == steps {
                    push(&mut out, t, &x);
                }
            }
            Ok(_) | Err(StageError::NonFinite) => return Err(Lemma1Error::NonFiniteState { t }),
            Err(StageError::Floor { d }) => {
                out.termination = ScalarTermination::FloorReached { t, d };
                out.min_d = out.min_d.min(d);
                break;
            }
        }
    }
    if out.t.last() != Some(&t) {
        push(&mut out, t, &x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(k_o: f64, alpha: AlphaSignal, d0: f64, d_dot0: f64) -> ScalarBarrierSystem {
        ScalarBarrierSystem { k_o, alpha, d0, d_dot0 }
    }

    #[test]
    fn resting_without_disturbance_stays_put() {
        let traj = lemma1_simulate(&system(2.0, AlphaSignal::Constant { value: 0.0 }, 1.3, 0.0), 5.0, 0.01).unwrap();
        assert!(traj.d.iter().all(|d| *d == 1.3));
        assert_eq!(traj.termination, ScalarTermination::Completed);
    }

    #[test]
    fn constant_disturbance_drives_phi_to_ratio() {
        // φ → -α⁰/k_o = -0.5
        let traj = lemma1_simulate(&system(2.0, AlphaSignal::Constant { value: 1.0 }, 1.0, 0.0), 20.0, 1e-3).unwrap();
        assert_eq!(traj.termination, ScalarTermination::Completed);
        assert!((traj.terminal_phi() + 0.5).abs() < 0.01 * 0.5, "{}", traj.terminal_phi());
        assert!(traj.terminal_d() < 1e-3);
        assert!(traj.d_dot.last().unwrap().abs() < 1e-3);
        assert!(traj.min_d > 0.0);
    }

    #[test]
    fn log_identity_holds_along_trajectory() {
        // k_o ln(d/d0) = -(ḋ - ḋ0) - ∫α
        let alpha = AlphaSignal::Harmonics {
            offset: 0.3,
            terms: vec![Harmonic { amplitude: 0.8, frequency: 1.7, phase: 0.4 }],
        };
        let sys = system(3.0, alpha.clone(), 0.7, -0.4);
        let traj = lemma1_simulate(&sys, 8.0, 1e-3).unwrap();
        for k in (0..traj.t.len()).step_by(97) {
            let lhs = sys.k_o * (traj.d[k] / sys.d0).ln();
            let rhs = -(traj.d_dot[k] - sys.d_dot0) - alpha.integral(traj.t[k]);
            assert!((lhs - rhs).abs() < 1e-7, "t = {}: {lhs} vs {rhs}", traj.t[k]);
            assert!((traj.alpha_integral[k] - alpha.integral(traj.t[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn bounded_integral_keeps_gap_open() {
        let alpha = AlphaSignal::Harmonics {
            offset: 0.0,
            terms: vec![Harmonic { amplitude: 1.0, frequency: 1.0, phase: 0.0 }],
        };
        let traj = lemma1_simulate(&system(2.0, alpha, 1.0, 0.0), 60.0, 1e-3).unwrap();
        assert!(traj.min_d > 0.1);
    }

    #[test]
    fn stiff_start_is_refined_not_crashed() {
        // d0 small with large closing speed: φ(0) = -100
        let traj = lemma1_simulate(&system(10.0, AlphaSignal::Constant { value: 0.5 }, 0.01, -1.0), 2.0, 1e-2).unwrap();
        assert!(traj.min_d > 0.0);
        assert!(traj.phi.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn invalid_systems_are_rejected() {
        let a = AlphaSignal::Constant { value: 1.0 };
        assert!(lemma1_simulate(&system(0.0, a.clone(), 1.0, 0.0), 1.0, 0.1).is_err());
        assert!(lemma1_simulate(&system(1.0, a.clone(), -1.0, 0.0), 1.0, 0.1).is_err());
        assert!(lemma1_simulate(&system(1.0, a, 1.0, f64::NAN), 1.0, 0.1).is_err());
    }

    #[test]
    fn alpha_integral_matches_quadrature() {
        let alpha = AlphaSignal::Harmonics {
            offset: -0.2,
            terms: vec![
                Harmonic { amplitude: 0.5, frequency: 2.0, phase: 1.0 },
                Harmonic { amplitude: 0.25, frequency: 0.3, phase: 0.0 },
            ],
        };
        let n = 2000;
        let t = 3.0;
        let h = t / n as f64;
        let simpson: f64 = (0..n)
            .map(|k| {
                let a = k as f64 * h;
                h / 6.0 * (alpha.value(a) + 4.0 * alpha.value(a + 0.5 * h) + alpha.value(a + h))
            })
            .sum();
        assert!((simpson - alpha.integral(t)).abs() < 1e-12);
        assert!((alpha.bound() - 0.95).abs() < 1e-15);
    }
}
