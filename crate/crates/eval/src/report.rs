use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gpstate_core::dataset::{solve_record, Dataset};
use gpstate_core::gpe::EvolutionConfig;
use gpstate_nn::layers::integral_mse;
use gpstate_nn::{GroundStateNet, Samples};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::postprocess::{postprocess_prediction, relative_error};

/// One evaluated record.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub param: f64,
    pub e_pred: f64,
    pub e_ref: f64,
    pub rel_err: f64,
    /// Integral MSE summed over components.
    pub mse: f64,
    /// Per-component integral MSE (two-component reports only).
    pub component_mse: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median_rel_err: f64,
    pub max_rel_err: f64,
    pub median_mse: f64,
    pub max_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub components: usize,
    /// Sorted by parameter.
    pub rows: Vec<EvalRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const FOOTER: &str = "# summary";

impl EvalReport {
    pub fn summary(&self) -> Summary {
        let rel: Vec<f64> = self.rows.iter().map(|r| r.rel_err).collect();
        let mse: Vec<f64> = self.rows.iter().map(|r| r.mse).collect();
        Summary {
            median_rel_err: median(&rel),
            max_rel_err: rel.iter().cloned().fold(f64::NAN, f64::max),
            median_mse: median(&mse),
            max_mse: mse.iter().cloned().fold(f64::NAN, f64::max),
        }
    }

    /// Row with the largest relative energy error.
    pub fn worst(&self) -> Option<&EvalRow> {
        self.rows.iter().max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
    }

    /// Rows whose parameter lies in `[lo, hi]`.
    pub fn rows_between(&self, lo: f64, hi: f64) -> Vec<&EvalRow> {
        self.rows.iter().filter(|r| r.param >= lo && r.param <= hi).collect()
    }

    pub fn median_rel_err_between(&self, lo: f64, hi: f64) -> f64 {
        median(&self.rows_between(lo, hi).iter().map(|r| r.rel_err).collect::<Vec<_>>())
    }

    /// Plot-ready CSV with a closing `# summary` line. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,E_pred,E_0,rel_err,mse");
        if self.components == 2 {
            out.push_str(",mse_1,mse_2");
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{:e},{:e},{:e},{:e},{:e}", r.param, r.e_pred, r.e_ref, r.rel_err, r.mse).expect("string write");
            for m in &r.component_mse {
                write!(out, ",{m:e}").expect("string write");
            }
            out.push('\n');
        }
        let s = self.summary();
        writeln!(
            out,
            "{FOOTER} median_rel_err={:e} max_rel_err={:e} median_mse={:e} max_mse={:e}",
            s.median_rel_err, s.max_rel_err, s.median_mse, s.max_mse
        )
        .expect("string write");
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses [`to_csv`](Self::to_csv) output into the report and the
    /// summary stored in its footer.
    pub fn from_csv(text: &str) -> Result<(Self, Summary)> {
        let bad = |msg: String| Error::Report(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty report".into()))?;
        let components = match header {
            "param,E_pred,E_0,rel_err,mse" => 1,
            "param,E_pred,E_0,rel_err,mse,mse_1,mse_2" => 2,
            other => return Err(bad(format!("unexpected header '{other}'"))),
        };
        let mut rows = Vec::new();
        let mut summary = None;
        for (n, line) in lines.enumerate() {
            if let Some(rest) = line.strip_prefix(FOOTER) {
                let mut vals = [0.0; 4];
                let keys = ["median_rel_err", "max_rel_err", "median_mse", "max_mse"];
                for (slot, (field, key)) in vals.iter_mut().zip(rest.split_whitespace().zip(keys)) {
                    let v = field
                        .strip_prefix(key)
                        .and_then(|f| f.strip_prefix('='))
                        .ok_or_else(|| bad(format!("footer field '{field}'")))?;
                    *slot = v.parse().map_err(|_| bad(format!("footer value '{v}'")))?;
                }
                summary = Some(Summary {
                    median_rel_err: vals[0],
                    max_rel_err: vals[1],
                    median_mse: vals[2],
                    max_mse: vals[3],
                });
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(format!("row {} is not numeric", n + 1)))?;
            let expected = if components == 2 { 7 } else { 5 };
            if vals.len() != expected {
                return Err(bad(format!("row {} has {} fields, expected {expected}", n + 1, vals.len())));
            }
            rows.push(EvalRow {
                param: vals[0],
                e_pred: vals[1],
                e_ref: vals[2],
                rel_err: vals[3],
                mse: vals[4],
                component_mse: vals[5..].to_vec(),
            });
        }
        let summary = summary.ok_or_else(|| bad("missing summary footer".into()))?;
        Ok((Self { components, rows }, summary))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Re-solve each record with this configuration and use that energy as
    /// the reference instead of the stored one.
    pub recompute: Option<EvolutionConfig>,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

/// Evaluates the records at `indices`: predicted energy against the stored
/// (or recomputed) energy, and integral MSE against the stored targets.
pub fn sweep_report(net: &GroundStateNet, dataset: &Dataset, indices: &[usize], options: &SweepOptions) -> Result<EvalReport> {
    let samples = Samples::from_dataset(net, dataset, indices)?;
    let template = dataset.header.template()?;
    let grid = dataset.grid();
    let components = dataset.header.components;
    let n = grid.len();
    let dv = grid.cell_volume();

    let evaluate = |k: usize| -> Result<EvalRow> {
        let param = samples.inputs[k];
        let pred = net.predict(&[param])?;
        let arrays: Vec<&[f64]> = pred.data().chunks_exact(n).collect();
        let state = postprocess_prediction(&arrays, grid)?;
        let e_pred = state.energy(&template, param)?;
        let e_ref = match &options.recompute {
            Some(cfg) => solve_record(&template, param, cfg)?.energy,
            None => dataset.records[indices[k]].energy,
        };
        let target = samples.target(k);
        let per: Vec<f64> = (0..components)
            .map(|c| integral_mse(&pred.data()[c * n..(c + 1) * n], &target[c * n..(c + 1) * n], dv))
            .collect();
        Ok(EvalRow {
            param,
            e_pred,
            e_ref,
            rel_err: relative_error(e_pred, e_ref)?,
            mse: per.iter().sum(),
            component_mse: if components == 2 { per } else { Vec::new() },
        })
    };

    let results: Vec<Result<EvalRow>> = if options.workers == 0 {
        (0..samples.len()).into_par_iter().map(evaluate).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::Report(format!("thread pool: {e}")))?;
        pool.install(|| (0..samples.len()).into_par_iter().map(evaluate).collect())
    };
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.param.total_cmp(&b.param));
    Ok(EvalReport { components, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(param: f64, rel_err: f64) -> EvalRow {
        EvalRow {
            param,
            e_pred: 1.0 + rel_err,
            e_ref: 1.0,
            rel_err,
            mse: rel_err * 0.1,
            component_mse: vec![],
        }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        let report = EvalReport {
            components: 1,
            rows: (0..9).map(|i| row(i as f64 / 3.0, 1.0 / (i as f64 + 7.0))).collect(),
        };
        let (back, footer) = EvalReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back, report);
        assert_eq!(footer, report.summary());
        assert_eq!(back.summary(), footer);
    }

    #[test]
    fn two_component_columns() {
        let mut r = row(-1.0, 0.01);
        r.component_mse = vec![0.25e-3, 0.75e-3];
        r.mse = 1e-3;
        let report = EvalReport { components: 2, rows: vec![r] };
        let csv = report.to_csv();
        assert!(csv.starts_with("param,E_pred,E_0,rel_err,mse,mse_1,mse_2\n"));
        assert_eq!(EvalReport::from_csv(&csv).unwrap().0, report);
    }

    #[test]
    fn malformed_reports() {
        assert!(EvalReport::from_csv("").is_err());
        assert!(EvalReport::from_csv("a,b\n").is_err());
        assert!(EvalReport::from_csv("param,E_pred,E_0,rel_err,mse\n1,2,3\n").is_err());
        assert!(EvalReport::from_csv("param,E_pred,E_0,rel_err,mse\n1,2,3,4,5\n").is_err());
    }

    #[test]
    fn range_queries() {
        let report = EvalReport {
            components: 1,
            rows: vec![row(0.0, 0.5), row(1.0, 0.1), row(2.0, 0.2), row(3.0, 0.3)],
        };
        assert_eq!(report.worst().unwrap().param, 0.0);
        assert_eq!(report.rows_between(1.0, 2.0).len(), 2);
        assert!((report.median_rel_err_between(1.0, 3.0) - 0.2).abs() < 1e-15);
    }
}
