//! Library half of the `gridz` command-line driver.
//!
//! The binary in `main.rs` is a thin shell over these modules:
//!
//! - [`config`] — the strict JSON experiment schema and its validation;
//! - [`pipeline`] — config-driven simulation, identification, and
//!   comparison pipelines;
//! - [`artifact`] — artifact writing with a SHA-256 manifest per run.
//!
//! Splitting the crate this way lets the integration and acceptance suites
//! exercise the exact production pipelines in-process and reserve subprocess
//! testing for the CLI contract itself (flags, exit codes, artifact trees).

pub mod artifact;
pub mod config;
pub mod pipeline;
