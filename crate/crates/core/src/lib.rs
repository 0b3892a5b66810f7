//! Numerical machinery for gluing Delaunay-type ends onto σ₂-Yamabe metrics.

pub mod banded;
pub mod delaunay_family;
pub mod delaunay_ode;
pub mod emit;
pub mod error;
pub mod fd;
pub mod function_spaces;
pub mod gluing_engine;
pub mod linearized_solver;
pub mod quadrature;
pub mod rk;
pub mod sigma2_operator;

pub use error::{Error, Result};
