//! Finite-difference oracles and the verification suites.

mod fd;
mod suites;

pub use fd::{central_derivative, central_derivative_vec, fd_dirderiv, rel_err, FdConfig};
pub use suites::{
    default_trials, run_suite, CaseRecord, DerivReport, Metric, Summary, CORPUS, SUITES,
    SWEEP_GAPS,
};
