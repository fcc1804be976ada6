//! Minimax and maximin points of orbits of closed subgroups of O(n) on the
//! unit sphere, Hausdorff-distance classification of such groups, and
//! invariant generalized conics built from their orbits.

pub mod cli;
pub mod conic;
pub mod dedup;
pub mod error;
pub mod group_model;
pub mod matrix_kernel;
pub mod minnorm;
pub mod orbit_optim;
pub mod seeds;
pub mod spatial;
pub mod structure;
pub mod tolerances;
pub mod vecser;
pub mod verify;

pub use error::{Error, Result};
