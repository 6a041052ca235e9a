//! Solvers for the control-volume model of a liquid film flowing down a
//! vertical fibre.
//!
//! * [`model`]: drag, curvature and entropy-potential closures.
//! * [`grid`]: periodic mesh, centred differences and direct solvers.
//! * [`pde`]: fully implicit transient solver for the radius/velocity system.
//! * [`travelling`]: Newton solver for periodic travelling waves with the
//!   speed as an unknown, plus first-integral validators.
//! * [`diagnostics`]: energy and entropy functionals, their a priori bounds,
//!   certification of trajectories and peak tracking.
//! * [`cli`]: configuration files, CSV/JSON output and the `fibreflow`
//!   command-line entry points.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
pub mod pde;
pub mod travelling;

pub use error::{Error, Result};
pub use grid::{Grid, PeriodicField};
pub use model::{FlowProfile, ModelParams};
