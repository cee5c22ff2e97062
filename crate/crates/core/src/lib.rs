//! Barrier-based construction of admissible (viability) sets and maximal
//! robust positively invariant sets for SIR and SEIR epidemic models with a
//! hard cap on the infective proportion.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`]: model variants, parameter bounds, tolerances, states.
//! * [`models`]: vector fields, feedback laws, adjoint right-hand sides and
//!   switching functionals for the four model variants.
//! * [`integrate`]: fixed-step RK4 with event location.
//! * [`analysis`]: closed-form classification, usable parts and tangent sets.
//! * [`barrier`]: barrier curves, assembled sets and membership queries.
//! * [`policy`]: forward simulation, the set-based switching law, Monte Carlo
//!   sweeps and the brute-force membership oracle.
//! * [`export`]: config loading, CSV/JSON output and run manifests.

pub mod analysis;
pub mod barrier;
pub mod error;
pub mod export;
pub mod geometry;
pub mod integrate;
pub mod models;
pub mod policy;
pub mod scenario;

pub use error::{Error, Result};
pub use scenario::{ModelVariant, Scenario, SetKind, StateVec, Tolerances};
