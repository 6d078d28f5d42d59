//! Geodesics, connections, good pants and covers on closed hyperbolic
//! surfaces, with exact word-level verification of the pants-homology
//! boundary identities.
//!
//! The crate is organized around a [`group::SurfaceGroup`] (matrices + words):
//!
//! - [`hyperbolic`] — upper half-plane primitives and hyperboloid helpers
//! - [`word`] — exact word algebra (reduction, cyclic canonical forms)
//! - [`group`] — enumeration of elements and closed geodesics
//! - [`arc`] — anchored lifted arcs and their developed holonomies
//! - [`chains`] — numeric chain-closing estimates and inefficiency
//! - [`conn`] — connection sets, orthogeodesics, narrow connections
//! - [`formal`] — exact formal sums, weights, semirandom norms
//! - [`pants`] — immersed pants, feet, twists, boundary measures
//! - [`homology`] — replacement calculus up to the correction map
//! - [`assembly`] — gluing multi-pants into covers

pub mod config;
pub mod error;
pub mod hyperbolic;
pub mod word;
pub mod group;
pub mod arc;
pub mod chains;
pub mod conn;
pub mod formal;
pub mod pants;

pub use error::{Error, Result};
