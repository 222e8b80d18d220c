pub mod amplitude;
pub mod cli;
pub mod error;
pub mod formfactor;
pub mod model;
pub mod quadrature;
pub mod resolvent;
pub mod selfenergy;
pub mod zeno;

pub use error::{Error, Result};
