//! Semiclassical phase shifts and pair-correlation statistics for scattering
//! on surfaces of revolution with a conic tip and a cylindrical end.

// `!(a > b)` is the NaN-rejecting test throughout; quadrature nodes keep
// their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod arithmetic;
pub mod error;
pub mod geodesic;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod radial;
pub mod semiclassics;
pub mod statistics;

pub use error::{Error, Result};
