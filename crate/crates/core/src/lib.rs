//! Numerical laboratory for the one-dimensional damped wave equation with
//! localized interior damping and dynamic (Wentzell-type) boundary feedback.

pub mod banded;
pub mod energy;
pub mod expm;
pub mod model;
pub mod semidiscrete;
pub mod solver_fd;
pub mod solver_riemann;
pub mod spectral;
pub mod oracles;
pub mod verify;
pub mod cli;
