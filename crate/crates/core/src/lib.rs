//! Spectral toolkit for observability and control of linear (fractional)
//! KP-I equations on the torus.

pub mod control;
pub mod dispersion;
pub mod error;
pub mod field;
pub mod gramian;
pub mod grid;
pub mod hum;
pub mod io;
pub mod lp;
pub mod packets;
pub mod propagator;
pub mod quadrature;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::{Dim, TorusGrid, Window};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
