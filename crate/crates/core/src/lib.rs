//! Numerical laboratory for the one-dimensional heat equation forced by a
//! general stochastic measure: solves the mild equation and its time-averaged
//! counterpart on coupled noise, measures the empirical convergence rate as
//! the fast scale accelerates, and verifies the supporting integral estimates
//! as assertable inequalities on simulated data.

pub mod besov;
pub mod checks;
pub mod coeffs;
pub mod config;
pub mod conv;
pub mod dyadic;
pub mod error;
pub mod fbm;
pub mod grid;
pub mod kernel;
pub mod par;
pub mod quad;
pub mod runner;
pub mod sm;
pub mod solver;
pub mod stable;
pub mod study;

pub use config::StudyConfig;
pub use error::{Error, Result};
pub use par::ExecMode;
pub use runner::{run, RunOutput, SuiteSelection};
