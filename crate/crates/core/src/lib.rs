//! Numerical laboratory for the warped-product reduction of complete
//! gradient Yamabe solitons in dimensions 2 and 3.
//!
//! The crate is organized around a single pipeline: pick soliton
//! parameters ([`odes::SolitonParams`]), integrate the profile ODE with
//! event detection ([`integrate`]), read curvature off the trajectory
//! ([`geometry`]), and compare the observed regime against the
//! classification theorems ([`classify`]). [`verify`] packages the
//! whole battery of internal consistency checks behind one call.

pub mod classify;
pub mod cli;
pub mod geometry;
pub mod integrate;
pub mod odes;
pub mod verify;
