//! Numerical checks of the closed loop's analytical properties.

pub mod lemma1;
pub mod lyapunov;
pub mod probe;
pub mod setpoints;
pub mod verify;

pub use lemma1::{lemma1_simulate, AlphaSignal, ScalarBarrierSystem, ScalarTrajectory};
pub use lyapunov::{lyapunov, lyapunov_rate, lyapunov_rate_with_cascade, LyapunovValue};
pub use probe::{instability_probe, ProbeOutcome, ProbeSetup};
pub use setpoints::{classify_limit, enumerate_set_points, Classification, SetPoint, Stability};
