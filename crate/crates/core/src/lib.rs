//! Design and simulation of NOON-state generators built from biexciton
//! quantum dots in two tunnel-coupled nanocavities.
//!
//! Energies are dimensionless, in units of `√2 g_ref`; times are in units of
//! its inverse (ħ = 1).

// `!(x > 0.0)` is the NaN-rejecting form.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod perturbation;
pub mod report;
mod sector;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
