//! Conjugate points along volume-preserving flows, located pointwise through
//! a WKB reduction of the Jacobi equation.

pub mod cli;
pub mod error;
pub mod events;
pub mod flow;
pub mod io;
pub mod jacobi;
pub mod expr;
pub mod geometry;
pub mod model;
pub mod ode;
pub mod quad;
pub mod reproduce;
pub mod sphere;

pub use error::{Error, Result};
