//! Linear algebra, curvature and Osserman-type spectral checks for
//! Lorentzian globally framed f-structures at a single tangent space.

pub mod curvature;
pub mod error;
pub mod io;
pub mod jacobi;
pub mod linalg;
pub mod report;
pub mod structure;
pub mod submersion;

pub use error::{GeomError, Result};
