pub mod branch;
pub mod cli;
pub mod domain_bounds;
pub mod eigensolver;
pub mod error;
pub mod nonlinearity;
pub mod quadrature;
pub mod profile;
pub mod radial_solver;
pub mod roots;
pub mod stability;

pub use error::{Error, Result};
