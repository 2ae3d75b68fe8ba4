use rayon::prelude::*;

use super::{expand_plan, Dataset, DatasetHeader, ProblemTemplate, SampleRecord, SamplingPlan};
use crate::error::{Error, Result};
use crate::gpe::{solve_ground_single, solve_ground_two, EvolutionConfig};
use crate::grid::{max_normalize, max_normalize_real};

/// Solves the ground state for one coefficient and packages it as a record.
pub fn solve_record(template: &ProblemTemplate, value: f64, config: &EvolutionConfig) -> Result<SampleRecord> {
    match template {
        ProblemTemplate::Single { .. } => {
            let gs = solve_ground_single(&template.single(value)?, config)?;
            Ok(SampleRecord {
                params: vec![value],
                targets: vec![max_normalize(&gs.field)?],
                energy: gs.energy,
                iterations: gs.iterations as u64,
                peak_density: vec![gs.peak_density()],
            })
        }
        ProblemTemplate::Two { .. } => {
            let gs = solve_ground_two(&template.two(value)?, config)?;
            let [a, b] = gs.fields.components();
            let n = a.values().len();
            // one shared scale keeps the population ratio
            let joint: Vec<f64> = a.values().iter().chain(b.values()).map(|v| v.norm()).collect();
            let scaled = max_normalize_real(&joint)?;
            Ok(SampleRecord {
                params: vec![value],
                targets: vec![scaled[..n].to_vec(), scaled[n..].to_vec()],
                energy: gs.energy,
                iterations: gs.iterations as u64,
                peak_density: gs.peak_densities().to_vec(),
            })
        }
    }
}

/// Solves every plan value on `workers` threads. Records come back in plan
/// order, so the output does not depend on the worker count.
pub fn generate_dataset(
    plan: &SamplingPlan,
    template: &ProblemTemplate,
    config: &EvolutionConfig,
    workers: usize,
) -> Result<Dataset> {
    if plan.parameter != template.parameter() {
        return Err(Error::InvalidConfig(format!(
            "plan sweeps '{}' but the problem is parameterized by '{}'",
            plan.parameter,
            template.parameter()
        )));
    }
    if workers == 0 {
        return Err(Error::InvalidConfig("worker count must be positive".into()));
    }
    let values = expand_plan(plan)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<SampleRecord>> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| solve_record(template, v, config))
            .collect()
    });

    let completed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok())
        .map(|(i, _)| i)
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                return Err(Error::RecordFailed {
                    index,
                    completed,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(Dataset {
        header: DatasetHeader {
            grid: template.grid().clone(),
            components: template.components(),
            parameter_names: vec![plan.parameter.name().to_string()],
            dt: config.dt,
            iterations: config.iterations as u64,
            metadata: template.describe(),
        },
        records,
    })
}
