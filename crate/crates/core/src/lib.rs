//! Stability analysis and linear-feedback stabilization of Caputo
//! fractional-order systems `D^q x = f(x)`, `0 < q <= 1`.
//!
//! - [`system`]: systems as data, equilibria, feedback gains
//! - [`models`]: fractional Toda lattices
//! - [`integrator`]: Adams-Bashforth-Moulton predictor-corrector
//! - [`stability`]: Jacobians, spectra, the Matignon test, Newton equilibria
//! - [`control`]: feedback around an equilibrium, gain sweeps
//! - [`cli`]: the `fracstab` command-line front end

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod models;
pub mod special;
pub mod stability;
pub mod system;

pub use control::{
    gain_sweep, make_controlled, toda2_prop41_classify, verify_convergence, ControlledSystem,
    GainAxis, GainGrid,
};
pub use error::{Error, Result};
pub use integrator::{convergence_probe, integrate, IntegrationConfig, Termination, Trajectory};
pub use models::{
    lipschitz_bound, toda2_controlled, toda2_feedback, toda2_matrix_form, toda_lattice,
};
pub use special::mittag_leffler;
pub use stability::{
    analyze, critical_order, eigenvalues, find_equilibria, jacobian, matignon_classify,
    sign_shortcut, StabilityReport, Verdict,
};
pub use system::{make_system, ControlGains, EquilibriumState, FractionalOrder, FractionalSystem};
