//! Simulation and verification toolkit for dissipatively stabilized displaced
//! Fock states of a mechanical resonator driven through a linearized
//! optomechanical interaction with a linear and a quadratic coupling.
//!
//! Mode ordering for two-mode objects is always (cavity, mechanics).
//! Quadratures follow `q = (b + b†)/√2`, `p = (b − b†)/(i√2)`.

pub mod analytic;
pub mod dynamics;
mod error;
pub mod fockspace;
pub mod hermite;
pub mod metrics;
pub mod phasespace;

pub use error::{Error, Result};
pub use fockspace::{CMatrix, CVector, C64};
