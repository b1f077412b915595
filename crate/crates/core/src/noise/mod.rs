//! Brownian paths, the velocity noise basis and the OU convolution.

pub mod basis;
pub mod ou;
pub mod path;

pub use basis::{build_mode_basis, ModeBasis};
pub use ou::{
    default_burn_in, ou_stationary_init, ou_stationary_init_bins, ou_step, ou_step_bins,
    sample_w1_increment, w1_coefficients, OuState,
};
pub use path::PathStore;
