//! Remedial micro-intervention assignment: psychometric diagnosis, cohort
//! synthesis, feasibility screening, and slate solvers with evaluation
//! tooling.

pub mod error;
pub mod feasibility;
pub mod gradient;
pub mod greedy;
pub mod hybrid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod psychometrics;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
