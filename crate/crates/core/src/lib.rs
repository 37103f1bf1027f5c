//! Mean curvature flow of immersed submanifolds of any codimension in R^n.

pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lagrangian;
pub mod singularity;

pub use error::{Error, Result};
