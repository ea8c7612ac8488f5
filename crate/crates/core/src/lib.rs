//! Numerical integrability diagnostics for continuous tangent
//! distributions, non-Lipschitz ODEs and PDEs, and dominated splittings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynsys;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod moduli;
pub mod mollify;
pub mod numeric;
pub mod odelab;
pub mod pdelab;
pub mod presets;
pub mod report;
pub mod surface;

pub use error::{Error, Result};
