//! Simulation and verification laboratory for the one-dimensional
//! time-inhomogeneous diffusion
//!
//! ```text
//! dX_t = dB_t + rho sgn(X_t) |X_t|^alpha / t^beta dt,    X_1 = x0 >= 0.
//! ```
//!
//! The crate classifies any parameter triple (rho, alpha, beta) into its
//! long-time regime, simulates killed paths (including explosive ones),
//! applies the exact change-of-time scaling transforms, evaluates and
//! samples the predicted limit laws, and verifies the predictions by
//! Monte Carlo at desk scale.
//!
//! Modules:
//!
//! * [`model`] — parameters, drift/potential, envelopes, phase classifier.
//! * [`time_change`] — changes of time, the path-space scaling transform,
//!   and the transformed drift.
//! * [`engine`] — Euler–Maruyama schemes with singularity handling,
//!   explosion detection, and the pinned-bridge Girsanov functional.
//! * [`laws`] — limit-law evaluation, normalizers, samplers, blow-up
//!   profiles and transient rates.
//! * [`stats`] — ensembles, Kolmogorov–Smirnov verdicts, dual
//!   explosion-probability estimators, envelope diagnostics.
//! * [`experiment`] — configuration, verification bundles, sweeps, CSV/JSON.

// Guards of the form !(x > 0.0) are deliberate: they reject NaN, which the
// inverted comparison would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod experiment;
pub mod laws;
pub mod model;
pub mod quad;
pub mod stats;
pub mod time_change;

pub use engine::{
    simulate, simulate_bridge_functional, simulate_path, simulate_transformed,
    simulate_transformed_path, ExplosionReport, RngStreamSpec, Scheme, SimConfig,
};
pub use error::{Error, Result};
pub use laws::{law_cdf, law_sample, limit_package, CompiledLaw, LawDescriptor};
pub use model::{
    classify, drift, envelope_value, potential, validate, EnvelopeKind, EnvelopeSpec,
    Normalization, Params, Recurrence, Regime, ValidityClass,
};
pub use quad::Quadrature;
pub use stats::{
    envelope_diagnostic, explosion_prob_direct, explosion_prob_girsanov,
    explosion_prob_girsanov_with_eps, ks_distance, rate_check, run_ensemble, EnsembleSpec,
    EstimateWithCi, Functional, KsReport,
};
pub use time_change::{scaling_apply, scaling_invert, transformed_drift, KilledPath, TimeChange};
