//! Numerical laboratory for complex porous-media Schrödinger equations
//! `dX = (Δβ(X) + f(t, X, Law(X))) dt + g dW` on a Dirichlet interval.

pub mod assignment;
pub mod config;
pub mod control;
pub mod error;
pub mod feynman;
pub mod mean_field;
pub mod monotone;
pub mod noise;
pub mod run;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
