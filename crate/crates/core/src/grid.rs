//! Uniform periodic grids and the wave-function containers defined on them.
//!
//! Samples sit at `x_j = min + j * dx` for `j = 0..N`, with the right endpoint
//! excluded so that the grid is periodic with period `max - min`. Two
//! dimensional data is stored row-major with the first axis (x) outermost.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest number of points accepted on any axis.
pub const MIN_POINTS: usize = 8;

/// Norms below this are treated as a collapsed field.
pub const DEGENERATE_NORM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "axis needs at least {MIN_POINTS} points, got {points}"
            )));
        }
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::InvalidGrid(format!(
                "extent [{min}, {max}) is empty or inverted"
            )));
        }
        Ok(Self { min, max, points })
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.points as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.points).map(|j| self.min + j as f64 * dx).collect()
    }

    /// Angular wavenumbers in DFT order: `0, 1, .., ceil(N/2)-1, -floor(N/2), .., -1`
    /// times `2π / L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as isize;
        let step = 2.0 * PI / self.length();
        (0..n)
            .map(|j| {
                let freq = if j < (n + 1) / 2 { j } else { j - n };
                freq as f64 * step
            })
            .collect()
    }
}

/// A 1D or 2D uniform periodic grid with cached coordinates.
#[derive(Debug, Clone)]
pub struct Grid {
    axes: Vec<Axis>,
    positions: Vec<Vec<f64>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "only 1 or 2 dimensions are supported, got {}",
                axes.len()
            )));
        }
        let positions = axes.iter().map(Axis::positions).collect();
        let wavenumbers = axes.iter().map(Axis::wavenumbers).collect();
        Ok(Self {
            axes,
            positions,
            wavenumbers,
        })
    }

    pub fn line(min: f64, max: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis::new(min, max, points)?])
    }

    pub fn plane(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Self> {
        Self::new(vec![Axis::new(x.0, x.1, x.2)?, Axis::new(y.0, y.1, y.2)?])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    /// Point counts per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    /// Volume element: product of spacings.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn positions(&self, axis: usize) -> &[f64] {
        &self.positions[axis]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Coordinates of flat index `idx` (one entry per axis).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        match self.dims() {
            1 => [self.positions[0][idx], 0.0],
            _ => {
                let ny = self.axes[1].points;
                [self.positions[0][idx / ny], self.positions[1][idx % ny]]
            }
        }
    }

    /// |k|² at every grid point, flat layout.
    pub fn k_squared(&self) -> Vec<f64> {
        match self.dims() {
            1 => self.wavenumbers[0].iter().map(|k| k * k).collect(),
            _ => {
                let (kx, ky) = (&self.wavenumbers[0], &self.wavenumbers[1]);
                kx.iter()
                    .flat_map(|a| ky.iter().map(move |b| a * a + b * b))
                    .collect()
            }
        }
    }

    /// Evaluates `f` at every grid point.
    pub fn map_coords(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let [x, y] = self.coords(i);
                f(x, y)
            })
            .collect()
    }
}

/// Builds a grid from per-axis extents and point counts.
pub fn make_grid(dims: usize, extents: &[(f64, f64)], points: &[usize]) -> Result<Grid> {
    if extents.len() != dims || points.len() != dims {
        return Err(Error::InvalidGrid(format!(
            "{dims} dimensions need {dims} extents and point counts, got {} and {}",
            extents.len(),
            points.len()
        )));
    }
    let axes = extents
        .iter()
        .zip(points)
        .map(|(&(lo, hi), &n)| Axis::new(lo, hi, n))
        .collect::<Result<Vec<_>>>()?;
    Grid::new(axes)
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Complex samples of a wave-function on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Evaluates a real function on the grid.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid
            .map_coords(f)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        Self { grid, values }
    }

    /// The unit-norm Gaussian `exp(-|x|²/2)`.
    pub fn gaussian(grid: Arc<Grid>) -> Result<Self> {
        normalize_l2(&Self::from_fn(grid, |x, y| (-(x * x + y * y) / 2.0).exp()))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Two fields sharing one grid.
#[derive(Debug, Clone)]
pub struct TwoComponentField {
    components: [Field; 2],
}

impl TwoComponentField {
    pub fn new(first: Field, second: Field) -> Result<Self> {
        if !same_grid(first.grid(), second.grid()) {
            return Err(Error::GridMismatch(
                "components are defined on different grids".into(),
            ));
        }
        Ok(Self {
            components: [first, second],
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[Field; 2] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub fn into_components(self) -> [Field; 2] {
        self.components
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            components: [self.components[0].scaled(s), self.components[1].scaled(s)],
        }
    }

    /// Swaps the two components.
    pub fn swapped(&self) -> Self {
        Self {
            components: [self.components[1].clone(), self.components[0].clone()],
        }
    }
}

/// `Σ|ψ_j|² dV`.
pub fn l2_norm_sq(field: &Field) -> f64 {
    sum_sq(field.values()) * field.grid().cell_volume()
}

/// `Σ(|ψ₁|² + |ψ₂|²) dV`.
pub fn joint_norm_sq(fields: &TwoComponentField) -> f64 {
    let [a, b] = fields.components();
    joint_sum_sq(a.values(), b.values()) * a.grid().cell_volume()
}

pub(crate) fn sum_sq(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum()
}

pub(crate) fn joint_sum_sq(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
        .sum()
}

pub(crate) fn check_norm(norm_sq: f64) -> Result<f64> {
    let norm = norm_sq.sqrt();
    if norm.is_nan() || norm < DEGENERATE_NORM {
        return Err(Error::DegenerateField { norm });
    }
    Ok(norm)
}

/// Rescales a field to unit L2 norm.
pub fn normalize_l2(field: &Field) -> Result<Field> {
    let norm = check_norm(l2_norm_sq(field))?;
    Ok(field.scaled(1.0 / norm))
}

/// Rescales both components by one common factor so the joint norm is 1.
pub fn normalize_joint(fields: &TwoComponentField) -> Result<TwoComponentField> {
    let norm = check_norm(joint_norm_sq(fields))?;
    Ok(fields.scaled(1.0 / norm))
}

/// `|ψ| / max|ψ|`. The maximum element maps to exactly 1.
pub fn max_normalize(field: &Field) -> Result<Vec<f64>> {
    max_normalize_real(&field.values().iter().map(|v| v.norm()).collect::<Vec<_>>())
}

/// Max-normalizes magnitudes of a real array.
pub fn max_normalize_real(values: &[f64]) -> Result<Vec<f64>> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::DegenerateField { norm: peak });
    }
    Ok(values.iter().map(|v| v.abs() / peak).collect())
}
