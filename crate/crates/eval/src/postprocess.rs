use std::sync::Arc;

use gpstate_core::dataset::ProblemTemplate;
use gpstate_core::gpe::{energy_single, energy_two};
use gpstate_core::grid::{normalize_joint, normalize_l2, Field, Grid, TwoComponentField};

use crate::error::{Error, Result};

/// A predicted ground state after renormalization.
#[derive(Debug, Clone)]
pub enum PredictedState {
    Single(Field),
    Two(TwoComponentField),
}

impl PredictedState {
    pub fn components(&self) -> usize {
        match self {
            Self::Single(_) => 1,
            Self::Two(_) => 2,
        }
    }

    /// Energy functional of the problem built from `template` at `param`.
    pub fn energy(&self, template: &ProblemTemplate, param: f64) -> Result<f64> {
        Ok(match self {
            Self::Single(f) => energy_single(f, &template.single(param)?)?,
            Self::Two(f) => energy_two(f, &template.two(param)?)?,
        })
    }
}

/// Reads predicted arrays (one per component, each a non-negative real
/// amplitude on `grid`) as a wave-function and normalizes it to unit norm,
/// jointly across two components.
pub fn postprocess_prediction(arrays: &[&[f64]], grid: &Arc<Grid>) -> Result<PredictedState> {
    for a in arrays {
        if a.len() != grid.len() {
            return Err(Error::Prediction(format!(
                "array of {} values on a grid of {} points",
                a.len(),
                grid.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Prediction("amplitudes must be finite and non-negative".into()));
        }
    }
    match arrays {
        [a] => Ok(PredictedState::Single(normalize_l2(&Field::from_real(grid.clone(), a)?)?)),
        [a, b] => {
            let fields = TwoComponentField::new(Field::from_real(grid.clone(), a)?, Field::from_real(grid.clone(), b)?)?;
            Ok(PredictedState::Two(normalize_joint(&fields)?))
        }
        _ => Err(Error::Prediction(format!("{} component arrays; expected 1 or 2", arrays.len()))),
    }
}

/// `|E − E₀| / |E₀|`.
pub fn relative_error(energy: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((energy - reference).abs() / reference.abs())
}

/// Relative error of the state's energy against a reference energy.
pub fn relative_energy_error(state: &PredictedState, template: &ProblemTemplate, param: f64, reference: f64) -> Result<f64> {
    relative_error(state.energy(template, param)?, reference)
}
