pub mod dsl;
pub mod error;
pub mod linalg;
pub mod newton;
pub mod oracle;
pub mod quadrature;
pub mod radial;
pub mod spectral;

pub use error::{Error, Result};
