//! Library surface of the command-line front end: configuration, problem
//! wiring, command implementations and the validation suites. The binary in
//! `main.rs` is a thin argument-parsing shell over these.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod problem;
pub mod suites;

/// Errors mapped to process exit codes: config 2, numerical 3, validation 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Validation(_) => 4,
        }
    }

    /// Config-stage wrapper for library errors.
    pub fn config(e: manifold_mc::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Run-stage wrapper: invalid-input errors are config mistakes, the
    /// rest are numerical failures.
    pub fn numerical(e: manifold_mc::Error) -> Self {
        match e {
            manifold_mc::Error::InvalidInput(msg) => CliError::Config(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Validation(m) => write!(f, "validation failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
