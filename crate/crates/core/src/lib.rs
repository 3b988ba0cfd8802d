pub mod commands;
pub mod discretization;
pub mod error;
pub mod fixedpoint;
pub mod io;
pub mod leader;
pub mod linalg;
pub mod nash;
pub mod nonlinearity;
pub mod problem;
pub mod scenario;
pub mod solvers;
pub mod verification;
pub mod weights;

pub use error::{Error, Result};
