//! Channel flow with an elastic-wall Robin boundary condition, reduced to a
//! small online model by proper orthogonal decomposition with supremizer
//! enrichment and residual-driven greedy basis growth.
//!
//! The crate has two layers:
//!
//! - a high-fidelity layer: a Taylor-Hood finite element discretization of
//!   unsteady incompressible flow in a 2D channel whose top and bottom walls
//!   carry a generalized Robin condition (a boundary mass plus a boundary
//!   stiffness standing in for a thin elastic wall), advanced in time by a
//!   semi-implicit backward Euler scheme ([`mesh`], [`fem`], [`hifi`]);
//! - a reduction layer: split velocity/pressure POD of solution snapshots,
//!   supremizer stabilization of the reduced saddle point, Galerkin
//!   projection of an exact affine operator decomposition, online time
//!   stepping with residual dual norms from cached Riesz representers, and
//!   greedy enrichment driven by those dual norms
//!   ([`affine`], [`pod`], [`rom`], [`greedy`], [`metrics`]).
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each one demonstrates a single capability end to end. The `rbflow` binary
//! drives the same pipeline from a JSON configuration file.

pub mod affine;
pub mod cli;
pub mod config;
pub mod error;
pub mod fem;
pub mod greedy;
pub mod hifi;
pub mod mesh;
pub mod metrics;
pub mod pod;
pub mod rom;
pub mod snap;
pub mod sparse;

pub use error::{Error, Result};
