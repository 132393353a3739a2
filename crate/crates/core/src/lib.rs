//! Magnetized rigid-satellite dynamics and the differential Galois analysis of
//! its normal variational equation.
//!
//! The pipeline runs from the nine-dimensional Euler-Poisson system
//! ([`dynamics`]) through canonical Euler-angle coordinates ([`reduction`]) to
//! the family of pendulum-like particular solutions ([`solutions`]). Along that
//! family the normal variational equation is built and rationalized ([`nve`],
//! [`ratfun`]), then analysed by Kovacic's algorithm ([`kovacic`]) and by
//! numerical monodromy ([`monodromy`]). [`poincare`] renders cross sections of
//! the reduced two-degree-of-freedom system.

pub mod cli;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod kovacic;
pub mod monodromy;
pub mod nve;
pub mod ode;
pub mod poincare;
pub mod ratfun;
pub mod reduction;
pub mod report;
pub mod solutions;

pub use error::{Error, Result};
pub use num_complex::Complex64;
