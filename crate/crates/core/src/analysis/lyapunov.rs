//! Per-edge Lyapunov function `L = (k_p/2) ∫₀^{|ẽ|²} h_p + ½|ν̃|²`.

use serde::{Deserialize, Serialize};

use crate::control::{EdgeObservables, FollowerGains};
use crate::geom3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValue {
    pub value: f64,
    pub potential: f64,
    pub kinetic: f64,
    /// Analytic `dL/dt` without the cascade term.
    pub rate: f64,
}

pub fn lyapunov(obs: &EdgeObservables, gains: &FollowerGains) -> LyapunovValue {
    let potential = 0.5 * gains.k_p * gains.h_p.integral(obs.e_tilde.norm_squared());
    let kinetic = 0.5 * obs.nu_tilde.norm_squared();
    LyapunovValue {
        value: potential + kinetic,
        potential,
        kinetic,
        rate: lyapunov_rate(obs, gains),
    }
}

/// `-k_v h_v(|ν̃|) |ν̃|² - k_o ḋ²/d`, exact when the neighbor's input equals
/// the feedforward the follower used.
pub fn lyapunov_rate(obs: &EdgeObservables, gains: &FollowerGains) -> f64 {
    let nt = obs.nu_tilde.norm();
    let d_dot = obs.d_dot();
    -gains.k_v * gains.h_v.value(nt) * nt * nt - gains.k_o * d_dot * d_dot / obs.d
}

/// Adds `ν̃ᵀ(ff - u_{i-1})`, the perturbation from a neighbor whose input
/// differs from the feedforward.
pub fn lyapunov_rate_with_cascade(obs: &EdgeObservables, gains: &FollowerGains, ff_minus_neighbor: Vec3) -> f64 {
    lyapunov_rate(obs, gains) + obs.nu_tilde.dot(&ff_minus_neighbor)
}

/// Fourth-order central difference on uniformly spaced samples. Entries
/// closer than two samples to either end are `None`.
pub fn five_point_derivative(samples: &[f64], dt: f64) -> Vec<Option<f64>> {
    (0..samples.len())
        .map(|k| {
            if k < 2 || k + 2 >= samples.len() {
                return None;
            }
            let s = |j: usize| samples[j];
            Some((s(k - 2) - 8.0 * s(k - 1) + 8.0 * s(k + 1) - s(k + 2)) / (12.0 * dt))
        })
        .collect()
}
