//! Explicit integrators over flat `f64` state vectors.
//!
//! Right-hand sides are fallible: an `Err` from any stage means the trial
//! step left the admissible region (e.g. crossed the barrier floor). The
//! refining integrators retry such steps with smaller sub-steps and only
//! give up once the minimum sub-step is reached.

use serde::{Deserialize, Serialize};

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<E, F>(f: &mut F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Step-doubling control for RK4 sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// Accept a sub-step once `max |full - two halves|` is below this.
    pub tolerance: f64,
    /// Smallest sub-step is `h / 2^max_halvings`.
    pub max_halvings: u32,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            tolerance: 1e-9,
            max_halvings: 20,
        }
    }
}

/// Advances `x` from `t` to `t + h` with RK4 sub-steps, halving until the
/// step-doubling error estimate meets the tolerance or the halving budget
/// is spent. Stage errors shrink the sub-step too; at the minimum sub-step
/// they propagate.
pub fn rk4_refined<E, F>(f: &mut F, t: f64, x: &[f64], h: f64, refine: &Refinement) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let h_min = h / 2f64.powi(refine.max_halvings as i32);
    let t_end = t + h;
    let mut now = t;
    let mut state = x.to_vec();
    let mut sub = h;
    loop {
        let remaining = t_end - now;
        if remaining <= h_min * 1e-6 {
            return Ok(state);
        }
        let step = sub.min(remaining);
        let at_floor = step <= h_min * (1.0 + 1e-9);
        let trial = rk4_step(f, now, &state, step).and_then(|full| {
            let mid = rk4_step(f, now, &state, 0.5 * step)?;
            let halves = rk4_step(f, now + 0.5 * step, &mid, 0.5 * step)?;
            Ok((max_abs_diff(&full, &halves), halves))
        });
        match trial {
            Ok((err, halves)) if err <= refine.tolerance || at_floor => {
                state = halves;
                now += step;
                if err < refine.tolerance / 32.0 && sub < h {
                    sub *= 2.0;
                }
            }
            Ok(_) => sub = 0.5 * step,
            Err(e) if at_floor => return Err(e),
            Err(_) => sub = 0.5 * step,
        }
    }
}

/// Tolerances for the embedded Dormand-Prince 5(4) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for AdaptiveTolerance {
    fn default() -> Self {
        AdaptiveTolerance {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri_trial<E, F>(f: &mut F, t: f64, x: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>), E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut xs = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = DP_A[stage][j];
            if a != 0.0 {
                xs.iter_mut().zip(kj).for_each(|(s, kv)| *s += h * a * kv);
            }
        }
        k.push(f(t + DP_C[stage] * h, &xs)?);
    }
    let combine = |b: &[f64; 7]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + h * (0..7).map(|s| b[s] * k[s][i]).sum::<f64>())
            .collect()
    };
    Ok((combine(&DP_B5), combine(&DP_B4)))
}

/// Advances from `t` to `t + h` with adaptive Dormand-Prince 5(4) steps.
pub fn dopri45<E, F>(f: &mut F, t: f64, x: &[f64], h: f64, tol: &AdaptiveTolerance) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let t_end = t + h;
    let h_min = h * 1e-9;
    let mut now = t;
    let mut state = x.to_vec();
    let mut sub = h;
    loop {
        let remaining = t_end - now;
        if remaining <= h_min * 1e-3 {
            return Ok(state);
        }
        let step = sub.min(remaining);
        let at_floor = step <= h_min;
        match dopri_trial(f, now, &state, step) {
            Ok((high, low)) => {
                let norm = (high
                    .iter()
                    .zip(&low)
                    .zip(&state)
                    .map(|((a, b), s)| {
                        let scale = tol.atol + tol.rtol * a.abs().max(s.abs());
                        ((a - b) / scale).powi(2)
                    })
                    .sum::<f64>()
                    / high.len().max(1) as f64)
                    .sqrt();
                if norm <= 1.0 || at_floor {
                    state = high;
                    now += step;
                }
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                sub = (step * factor).min(h);
            }
            Err(e) if at_floor => return Err(e),
            Err(_) => sub = 0.5 * step,
        }
    }
}
