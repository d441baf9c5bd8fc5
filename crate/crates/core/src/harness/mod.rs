//! Metric families, experiment runs, sweeps and randomized inequality suites.

mod config;
mod fuzz;
mod run;
mod sweep;

pub use config::{parse_checks, Check, ExperimentConfig, Family, OutputFormat, MIN_PHI};
pub use fuzz::{fuzz_inequalities, fuzz_with, FuzzOptions, FuzzReport, InequalitySummary};
pub use run::{
    build_metric, fourier_coefficients, fourier_factor, run, run_many, CheckRecord, Resolution,
    RunReport, ORACLE_TOL, SLACK_TOL, YAMABE_TOL,
};
pub use sweep::{sweep_sphere_family, sweep_with, SweepRow, SweepTable};
