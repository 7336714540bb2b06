//! Numerical verification toolkit for Kaehler metrics carrying a holomorphic
//! homothetic foliation, their twisted Calabi constructions and the
//! almost-Kaehler products built from them.

pub mod almost_kahler;
pub mod bases;
pub mod calabi;
pub mod cli;
pub mod error;
pub mod foliation;
pub mod hermitian;
pub mod jet;
pub mod quadrature;
pub mod sampling;
pub mod tensor;
pub mod twist;

pub use error::{GeomError, Result};
