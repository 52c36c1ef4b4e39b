//! Configuration, single experiments, `(alpha, L)` sweeps and the identity suite.

pub mod config;
pub mod experiment;
pub mod io;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, PerturbationKind};
pub use experiment::{execute, run_experiment, ExperimentRun, StabilityReport};
pub use sweep::{run_sweep, SweepTable};
pub use verify::{run_verification_suite, VerificationSummary, VerifyOptions};
