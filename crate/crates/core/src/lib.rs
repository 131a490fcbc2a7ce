//! Bounds on causal relative and attributable risk from case-control and
//! case-population samples.
//!
//! The crate is organised bottom-up: [`data`] holds validated samples,
//! [`oracle`] evaluates every identification object exactly on finite
//! populations, [`glm`] fits the sieve logits, and [`rr`] / [`ar`] turn those
//! fits into estimates and confidence bands. [`synthetic`] generates the
//! simulation designs used to check all of it.

pub mod ar;
pub mod cli;
pub mod data;
pub mod error;
pub mod glm;
pub mod oracle;
pub mod rng;
pub mod rr;
pub mod synthetic;

pub use data::{ingest_csv, odds_ratio_2x2, CountTable2x2, CsvSchema, Design, ObservedDataset, H0};
pub use error::{Error, Result};
pub use glm::{build_basis, fit_logit, BasisSpec, LogitFit, LogitOptions, TermKind};
pub use nalgebra;
pub use rng::RngSpec;
