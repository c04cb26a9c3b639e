//! Pulsed type-II SPDC in a periodically poled waveguide: joint spectral
//! amplitude, spectral filtering, entanglement descriptors and
//! polarization Hong-Ou-Mandel visibility.

// `!(x > 0.0)` style guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dispersion;
pub mod error;
pub mod filters;
pub mod interference;
pub mod scenario;
pub mod tpsa;

pub use error::{Error, ErrorClass, Result};
