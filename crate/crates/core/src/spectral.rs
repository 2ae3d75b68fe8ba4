//! Discrete Fourier transforms on grids and the imaginary-time kinetic propagator.
//!
//! The forward transform is unnormalized; the inverse carries the `1/N`
//! factor. 2D transforms run as separable passes over rows and columns.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{same_grid, Field, Grid};

/// Cached FFT plans for one grid shape.
#[derive(Clone)]
pub struct Dft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("shape", &self.shape).finish()
    }
}

impl Dft {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape,
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(&self.forward, data, scratch);
    }

    /// Inverse transform in place, including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(&self.inverse, data, scratch);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.len());
        match self.shape.as_slice() {
            [_] => plans[0].process(data),
            [nx, ny] => {
                let (nx, ny) = (*nx, *ny);
                // rows are contiguous along y
                plans[1].process(data);
                scratch.resize(nx * ny, Complex64::default());
                transpose(data, scratch, nx, ny);
                plans[0].process(scratch);
                transpose(scratch, data, ny, nx);
            }
            _ => unreachable!("grids are 1D or 2D"),
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Unnormalized forward DFT of a field.
pub fn dft_forward(field: &Field) -> Field {
    let dft = Dft::new(field.grid());
    let mut values = field.values().to_vec();
    dft.forward(&mut values, &mut Vec::new());
    Field::new(field.grid().clone(), values).expect("shape preserved")
}

/// Inverse DFT with `1/N` normalization.
pub fn dft_inverse(field: &Field) -> Field {
    let dft = Dft::new(field.grid());
    let mut values = field.values().to_vec();
    dft.inverse(&mut values, &mut Vec::new());
    Field::new(field.grid().clone(), values).expect("shape preserved")
}

/// Multiplicative k-space factors `exp(-τ k²/2)` for an imaginary time span τ.
#[derive(Debug, Clone)]
pub struct KineticPropagator {
    grid: Arc<Grid>,
    span: f64,
    factors: Vec<f64>,
}

impl KineticPropagator {
    /// Propagator over a full step `dt`.
    pub fn new(grid: Arc<Grid>, dt: f64) -> Result<Self> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "time step must be finite and non-negative, got {dt}"
            )));
        }
        let factors = grid
            .k_squared()
            .into_iter()
            .map(|k2| (-dt * k2 / 2.0).exp())
            .collect();
        Ok(Self {
            grid,
            span: dt,
            factors,
        })
    }

    /// Propagator over half of `dt`, as used by the symmetric splitting.
    pub fn half_step(grid: Arc<Grid>, dt: f64) -> Result<Self> {
        Self::new(grid, dt / 2.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Imaginary time covered by one application.
    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub(crate) fn apply_in_place(&self, dft: &Dft, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        dft.forward(data, scratch);
        for (v, f) in data.iter_mut().zip(&self.factors) {
            *v *= *f;
        }
        dft.inverse(data, scratch);
    }
}

/// `dft_inverse(factors ⊙ dft_forward(field))`.
pub fn apply_kinetic(field: &Field, propagator: &KineticPropagator) -> Result<Field> {
    if !same_grid(field.grid(), propagator.grid()) {
        return Err(Error::GridMismatch(
            "propagator was built for a different grid".into(),
        ));
    }
    let dft = Dft::new(field.grid());
    let mut values = field.values().to_vec();
    propagator.apply_in_place(&dft, &mut values, &mut Vec::new());
    Field::new(field.grid().clone(), values)
}
