//! Eigenvalue-parameterized penalty-matrix tuning for feedback control laws.

pub mod astro;
pub mod attitude;
pub mod dual;
pub mod glc;
pub mod harness;
pub mod matrixkit;
pub mod pdparam;
pub mod propagate;
pub mod qlaw;
pub mod swarm;
pub mod zermelo;
