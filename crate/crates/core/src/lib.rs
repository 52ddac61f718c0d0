//! Online conformal prediction under intermittently observed labels, plus a
//! small interactive imitation-learning testbed built on top of it.
//!
//! The numerical core (`conformal`, `forecast`, `nn`) is generic over the
//! scalar type via `num-traits`; the aliases below pin `f64`, which is what
//! the benchmark and simulation layers use.

pub mod bench;
pub mod buffer;
pub mod conformal;
pub mod env;
pub mod float;
pub mod forecast;
pub mod nn;
pub mod seeded;

pub use float::Real;

/// `f64` scalar quantile tracker.
pub type ScalarTracker = conformal::ScalarTracker<f64>;
/// `f64` per-dimension interval tracker.
pub type VectorIntervalTracker = conformal::VectorIntervalTracker<f64>;
/// `f64` adaptive-alpha tracker.
pub type AciTracker = conformal::AciTracker<f64>;
/// `f64` step-size schedule.
pub type GammaSchedule = conformal::GammaSchedule<f64>;
/// `f64` scalar observation event.
pub type ObservationEvent = conformal::ObservationEvent<f64>;
/// `f64` vector observation event.
pub type VectorObservationEvent = conformal::VectorObservationEvent<f64>;
/// `f64` autoregressive forecaster.
pub type ArModel = forecast::ArModel<f64>;
/// `f64` feedforward network.
pub type Mlp = nn::Mlp<f64>;
/// `f64` training buffer.
pub type ReplayBuffer = buffer::ReplayBuffer<f64>;
