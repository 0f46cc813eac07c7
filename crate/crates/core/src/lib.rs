//! Genetic composition of an exponentially growing cell population.
//!
//! The crate simulates a branching population in which every daughter cell
//! may mutate at each of a set of sites, and compares what it sees at the
//! first time `n` cells are alive against the Luria-Delbrück family of laws,
//! their limits at positive population fractions, and the audit and rate
//! estimators built on them.
//!
//! ```
//! use mutfreq::distributions::{ld_pmf, LdParams};
//!
//! let pmf = ld_pmf(&LdParams::new(2.0).unwrap(), 5);
//! assert!((pmf[0] - (-2.0f64).exp()).abs() < 1e-15);
//! ```

pub mod analytics;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod limits;
pub mod nucleotide;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use nucleotide::Nucleotide;
