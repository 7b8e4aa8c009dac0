//! File formats, worker pools and the command line around [`sse_decay`].
//!
//! * [`config`] - TOML experiment files with line/field diagnostics.
//! * [`formats`] - CSV tables and JSON reports with provenance headers.
//! * [`parallel`] - worker-count independent parallel ensembles.
//! * [`validate`] - the invariant suites behind `sse-lab validate`.
//! * [`cli`] - argument parsing and subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod formats;
pub mod parallel;
pub mod validate;
