use std::fmt;

use gpstate_core::dataset::{solve_record, ProblemTemplate};
use gpstate_core::gpe::EvolutionConfig;
use gpstate_nn::GroundStateNet;

use crate::error::Result;
use crate::postprocess::{postprocess_prediction, relative_error};

/// Relative energy error below which a prediction is reported as a
/// plausible physical state.
pub const PLAUSIBLE_REL_ERR: f64 = 0.1;

/// Validity checks of a prediction, typically outside the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub param: f64,
    pub in_training_range: bool,
    pub min_value: f64,
    pub max_value: f64,
    pub e_pred: f64,
    pub e_ite: f64,
    pub rel_err: f64,
}

impl ProbeRow {
    /// Outputs lie in (0, 1) and the energy is within
    /// [`PLAUSIBLE_REL_ERR`] of a fresh solve.
    pub fn plausible(&self) -> bool {
        self.min_value > 0.0 && self.max_value < 1.0 && self.rel_err < PLAUSIBLE_REL_ERR
    }

    pub const CSV_HEADER: &'static str = "param,in_training_range,min,max,E_pred,E_ite,rel_err,plausible";

    pub fn csv_line(&self) -> String {
        format!(
            "{:e},{},{:e},{:e},{:e},{:e},{:e},{}",
            self.param,
            self.in_training_range,
            self.min_value,
            self.max_value,
            self.e_pred,
            self.e_ite,
            self.rel_err,
            self.plausible()
        )
    }
}

impl fmt::Display for ProbeRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "param {:.4} ({}): E_pred {:.6} E_ite {:.6} rel err {:.3e} -> {}",
            self.param,
            if self.in_training_range { "in range" } else { "out of range" },
            self.e_pred,
            self.e_ite,
            self.rel_err,
            if self.plausible() { "plausible" } else { "not a valid state" }
        )
    }
}

/// Predicts at `param`, solves the same problem from scratch and compares.
/// Reports only; nothing is asserted.
pub fn out_of_range_probe(net: &GroundStateNet, template: &ProblemTemplate, param: f64, config: &EvolutionConfig) -> Result<ProbeRow> {
    let pred = net.predict(&[param])?;
    let n = template.grid().len();
    let arrays: Vec<&[f64]> = pred.data().chunks_exact(n).collect();
    let state = postprocess_prediction(&arrays, template.grid())?;
    let e_pred = state.energy(template, param)?;
    let e_ite = solve_record(template, param, config)?.energy;
    let (lo, hi) = net.config().input_range;
    Ok(ProbeRow {
        param,
        in_training_range: (lo..=hi).contains(&param),
        min_value: pred.data().iter().cloned().fold(f64::INFINITY, f64::min),
        max_value: pred.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        e_pred,
        e_ite,
        rel_err: relative_error(e_pred, e_ite)?,
    })
}
