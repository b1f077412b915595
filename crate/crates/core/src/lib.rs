//! Stochastic nematic liquid-crystal flow on a rectangle: discretization,
//! noise, time stepping, diagnostics and random-attractor experiments.

pub mod attractor;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod noise;
pub mod ops;
pub mod potential;
pub mod verify;

pub use error::{Error, Result};
pub use model::{GridSpec, Field, ScalarField, SimulationParams, State, VectorField2, VectorField3};
pub use potential::PotentialCoeffs;
