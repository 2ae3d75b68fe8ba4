//! Evaluation of surrogate predictions through the physics: renormalized
//! energies, relative energy error sweeps, out-of-range probes and timing
//! against the imaginary-time solver.

pub mod bench;
pub mod error;
pub mod postprocess;
pub mod probe;
pub mod report;

pub use bench::{bench_speedup, BenchReport};
pub use error::{Error, Result};
pub use postprocess::{postprocess_prediction, relative_energy_error, relative_error, PredictedState};
pub use probe::{out_of_range_probe, ProbeRow};
pub use report::{median, sweep_report, EvalReport, EvalRow, Summary, SweepOptions};
