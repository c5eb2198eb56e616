//! Batch driver: loads a run configuration, dispatches to the engines in
//! `absorbing_core` and renders JSON or CSV reports.

pub mod commands;
pub mod config;
pub mod report;

use thiserror::Error;

pub use commands::{
    closed_form, hjb_solve, mc_estimate, ode_check, sweep_report, verify, Gate, VerifyReport,
};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or a grid the scheme cannot run on. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// An engine failed at run time. Exit code 1.
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<absorbing_core::Error> for CliError {
    fn from(err: absorbing_core::Error) -> Self {
        use absorbing_core::Error as E;
        match err {
            E::InvalidParams(_) | E::InvalidConfig(_) | E::Cfl { .. } => {
                CliError::Config(err.to_string())
            }
            E::Domain(_) | E::Numerical(_) => CliError::Runtime(err.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}
