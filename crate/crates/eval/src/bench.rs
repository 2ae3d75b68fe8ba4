use std::fmt;
use std::time::Instant;

use gpstate_core::dataset::{solve_record, ProblemTemplate};
use gpstate_core::gpe::EvolutionConfig;
use gpstate_nn::GroundStateNet;

use crate::error::{Error, Result};
use crate::report::median;

pub const DEFAULT_RUNS: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub param: f64,
    pub runs: usize,
    pub iterations: usize,
    /// Median wall time of one network forward pass, seconds.
    pub surrogate_seconds: f64,
    /// Median wall time of one imaginary-time solve, seconds.
    pub ite_seconds: f64,
}

impl BenchReport {
    /// How many times faster the surrogate is.
    pub fn speedup(&self) -> f64 {
        self.ite_seconds / self.surrogate_seconds
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method        median_seconds   runs")?;
        writeln!(f, "surrogate     {:<16.6e} {}", self.surrogate_seconds, self.runs)?;
        writeln!(f, "ite ({:>6})  {:<16.6e} {}", self.iterations, self.ite_seconds, self.runs)?;
        write!(f, "speedup       {:.1}x", self.speedup())
    }
}

/// Median wall time of `runs` calls of `f`.
pub fn median_seconds(runs: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    if runs == 0 {
        return Err(Error::Report("benchmark needs at least one run".into()));
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&times))
}

/// Median time of the surrogate's forward pass at `param`, after one
/// discarded warm-up pass.
pub fn time_surrogate(net: &GroundStateNet, param: f64, runs: usize) -> Result<f64> {
    net.predict(&[param])?;
    median_seconds(runs, || {
        std::hint::black_box(net.predict(&[param])?);
        Ok(())
    })
}

/// Median time of a full imaginary-time solve at `param`.
pub fn time_ite(template: &ProblemTemplate, param: f64, config: &EvolutionConfig, runs: usize) -> Result<f64> {
    median_seconds(runs, || {
        std::hint::black_box(solve_record(template, param, config)?);
        Ok(())
    })
}

/// Times the surrogate against the solver it replaces, in the same process.
pub fn bench_speedup(
    net: &GroundStateNet,
    template: &ProblemTemplate,
    param: f64,
    config: &EvolutionConfig,
    runs: usize,
) -> Result<BenchReport> {
    Ok(BenchReport {
        param,
        runs,
        iterations: config.iterations,
        surrogate_seconds: time_surrogate(net, param, runs)?,
        ite_seconds: time_ite(template, param, config, runs)?,
    })
}
