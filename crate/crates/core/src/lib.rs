//! Boundary control of an unstable reaction–diffusion equation through an
//! actuator with Markov-switching input delay.
//!
//! The crate is organised bottom-up: [`kernels`] evaluates the backstepping
//! kernels, [`delay`] models the delay process, [`plant`] and [`actuator`]
//! advance the cascade, [`controller`] evaluates the feedback law, and
//! [`simulator`] / [`montecarlo`] run single realizations and ensembles.

pub mod actuator;
pub mod bessel;
pub mod config;
pub mod controller;
pub mod delay;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod montecarlo;
pub mod plant;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
