//! Deceptive information retrieval (DIR).
//!
//! A user downloads one of `k` files replicated on `n` non-colluding
//! databases. Each database sees only its own query and makes a MAP guess
//! of the file index. The scheme skews the real-query distribution away
//! from what the databases believe, and makes up the difference with dummy
//! queries sent later, so that the databases' error probability at real
//! retrieval times exceeds the PIR baseline `1 - 1/k` by a chosen amount
//! `d`.
//!
//! Module map:
//!
//! - [`params`]: closed-form `eps(d)`, `alpha`, error probability, download
//!   cost and rate.
//! - [`pmf`]: the dummy-count distribution and an exhaustive oracle for it.
//! - [`codebook`]: real and dummy query tables, the distribution the
//!   databases know, and query classification.
//! - [`retrieval`]: prime-field file store, answers, decoding.
//! - [`adversary`]: the databases' MAP predictor.
//! - [`simulator`]: Monte Carlo runs and theory sweeps.
//! - [`cli`]: the `dir-lab` command line.
//!
//! ```
//! use dir_lab::params::{achievable_rate, SchemeParams, error_probability};
//!
//! let p = SchemeParams::new(2, 2, 0.1).unwrap();
//! assert!((p.alpha() - 0.6).abs() < 1e-12);
//! assert!((error_probability(&p) - 0.6).abs() < 1e-12);
//! assert!((achievable_rate(2, 2, 0.1).unwrap() - 10.0 / 33.0).abs() < 1e-12);
//! ```

pub mod adversary;
pub mod cli;
pub mod codebook;
pub mod error;
pub mod params;
pub mod pmf;
pub mod retrieval;
pub mod simulator;

pub use error::{DirError, Result};
