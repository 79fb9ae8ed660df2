//! Simulation library for measurement-feedback coherent Ising machines built
//! from degenerate optical parametric oscillators (DOPOs).
//!
//! The crate provides several levels of description for the same optical
//! network, from cheap moment closures to exact (cutoff-limited) density
//! matrix evolution:
//!
//! - [`ct`]: continuous-time trajectory models — the five-moment skew-Gaussian
//!   closure and its Gaussian and GAPP reductions, with homodyne measurement
//!   feedback and chaotic amplitude control.
//! - [`qme`]: continuous-time stochastic master equation in the photon-number
//!   basis, including measurement back-action terms.
//! - [`dc`]: discrete-component round-trip models (per-component beam
//!   splitters, probe squeezing, projective homodyne readout), both as a
//!   skew-Gaussian pipeline and as a two-mode density-matrix pipeline.
//! - [`meanfield`]: mean-field-coupled single-pulse steady states, with
//!   analytic oracles built on terminating hypergeometric series.
//! - [`wigner`]: Wigner-function diagnostics from density matrices.
//! - [`instances`]: Ising instance generation (discrete-coupling and Wishart
//!   planted ensembles), energies, and a brute-force ground-state oracle.
//! - [`metrics`]: success probabilities, MVMTS, deviation diagnostics and
//!   scaling fits.
//! - [`campaign`]: deterministic, seed-keyed parallel campaign execution.

pub use ndarray;

pub mod campaign;
pub mod ct;
pub mod dc;
pub mod instances;
pub mod meanfield;
pub mod metrics;
pub mod noise;
pub mod params;
pub mod qme;
pub mod record;
pub mod state;
pub mod wigner;

pub use instances::Instance;
pub use noise::NoiseStream;
pub use params::{CacVariant, DerivedParams, ModelKind, SystemParams, TauFormula};
pub use record::TrajectoryRecord;
pub use state::{MomentState, PulseState, QuadratureState};
