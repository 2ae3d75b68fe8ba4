//! Imaginary-time split-step evolution of the dimensionless Gross–Pitaevskii
//! equation and its energy quotients.
//!
//! One step is the symmetric splitting
//!
//! ```text
//! ψ ← N · K(Δτ/2) · R(Δτ) · D(Δτ) · K(Δτ/2) ψ
//! ```
//!
//! where `K` is the kinetic factor applied in k-space, `D` the pointwise
//! `exp(-Δτ(V + g|ψ|²))` using the density at the start of the step, `R`
//! the Rabi mixing (two components only) and `N` the renormalization.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{check_norm, joint_sum_sq, same_grid, sum_sq, Field, Grid, TwoComponentField};
use crate::potential::{evaluate_potential, PotentialSpec};
use crate::spectral::{Dft, KineticPropagator};

/// Lower clamp on every exponent of the pointwise factor.
pub const EXP_FLOOR: f64 = -700.0;

/// Bound on `Δτ·max(V)`.
pub const MAX_STEP_POTENTIAL: f64 = 50.0;

/// Single-component problem: `H = -½∇² + V + g|ψ|²`.
#[derive(Debug, Clone)]
pub struct SingleProblem {
    pub grid: Arc<Grid>,
    pub potential: PotentialSpec,
    pub g: f64,
}

impl SingleProblem {
    pub fn new(grid: Arc<Grid>, potential: PotentialSpec, g: f64) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::InvalidConfig(format!("coupling g must be finite, got {g}")));
        }
        evaluate_potential(&potential, &grid)?;
        Ok(Self { grid, potential, g })
    }
}

/// Rabi-coupled pair of components.
#[derive(Debug, Clone)]
pub struct TwoComponentProblem {
    pub grid: Arc<Grid>,
    pub potentials: [PotentialSpec; 2],
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub omega: f64,
}

impl TwoComponentProblem {
    pub fn new(
        grid: Arc<Grid>,
        potentials: [PotentialSpec; 2],
        [g11, g12, g22]: [f64; 3],
        omega: f64,
    ) -> Result<Self> {
        for (name, v) in [("g11", g11), ("g12", g12), ("g22", g22), ("omega", omega)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite, got {v}")));
            }
        }
        for p in &potentials {
            evaluate_potential(p, &grid)?;
        }
        Ok(Self {
            grid,
            potentials,
            g11,
            g12,
            g22,
            omega,
        })
    }

    /// The same physics with the component labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            potentials: [self.potentials[1].clone(), self.potentials[0].clone()],
            g11: self.g22,
            g12: self.g12,
            g22: self.g11,
            omega: self.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// `exp(-|x|²/2)`, shared equally between components.
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub iterations: usize,
    /// Stop once consecutive energy snapshots differ by less than this.
    pub tolerance: Option<f64>,
    /// Iterations between energy snapshots.
    pub snapshot_every: usize,
    pub initial: InitialState,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            iterations: 8000,
            tolerance: None,
            snapshot_every: 100,
            initial: InitialState::Gaussian,
        }
    }
}

impl EvolutionConfig {
    pub fn new(dt: f64, iterations: usize) -> Self {
        Self {
            dt,
            iterations,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_snapshot_every(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn validate(&self, max_potential: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "solver.dt must be positive, got {}",
                self.dt
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("solver.iterations must be positive".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidConfig("solver.snapshot_every must be positive".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "solver.tolerance must be positive, got {tol}"
                )));
            }
        }
        if self.dt * max_potential >= MAX_STEP_POTENTIAL {
            return Err(Error::InvalidConfig(format!(
                "dt * max(V) = {} must stay below {MAX_STEP_POTENTIAL}",
                self.dt * max_potential
            )));
        }
        Ok(())
    }
}

/// Result of a single-component solve.
#[derive(Debug, Clone)]
pub struct GroundState {
    /// Unit-norm, real, non-negative ground state.
    pub field: Field,
    /// Energy quotient `⟨ψ|H|ψ⟩/⟨ψ|ψ⟩` of `field`.
    pub energy: f64,
    /// Energy at every snapshot.
    pub energies: Vec<f64>,
    pub iterations: usize,
}

impl GroundState {
    pub fn peak_density(&self) -> f64 {
        self.field.density().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TwoComponentGroundState {
    pub fields: TwoComponentField,
    pub energy: f64,
    pub energies: Vec<f64>,
    pub iterations: usize,
}

impl TwoComponentGroundState {
    pub fn peak_densities(&self) -> [f64; 2] {
        let peak = |f: &Field| f.density().into_iter().fold(0.0, f64::max);
        [peak(self.fields.component(0)), peak(self.fields.component(1))]
    }
}

#[inline]
fn decay(exponent: f64) -> f64 {
    exponent.max(EXP_FLOOR).exp()
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Term-by-term contributions to `⟨ψ|H|ψ⟩`, all integrated with `dV`.
#[derive(Debug, Clone, Copy, Default)]
struct EnergyTerms {
    kinetic: f64,
    potential: f64,
    /// `∫ |ψ|⁴`
    quartic: f64,
    norm: f64,
}

/// Shared buffers for repeated energy evaluation on one grid.
struct EnergyWorkspace {
    dft: Dft,
    half_k2: Vec<f64>,
    dv: f64,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl EnergyWorkspace {
    fn new(grid: &Grid) -> Self {
        Self {
            dft: Dft::new(grid),
            half_k2: grid.k_squared().into_iter().map(|k2| 0.5 * k2).collect(),
            dv: grid.cell_volume(),
            buffer: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn terms(&mut self, psi: &[Complex64], potential: &[f64]) -> EnergyTerms {
        self.buffer.clear();
        self.buffer.extend_from_slice(psi);
        self.dft.forward(&mut self.buffer, &mut self.scratch);
        // Parseval: Σ|ψ_j|² = (1/N) Σ|ψ̂_k|²
        let kinetic: f64 = self
            .buffer
            .iter()
            .zip(&self.half_k2)
            .map(|(v, k)| k * v.norm_sqr())
            .sum::<f64>()
            * self.dv
            / psi.len() as f64;
        let mut terms = EnergyTerms {
            kinetic,
            ..Default::default()
        };
        for (v, pot) in psi.iter().zip(potential) {
            let d = v.norm_sqr();
            terms.potential += pot * d;
            terms.quartic += d * d;
            terms.norm += d;
        }
        terms.potential *= self.dv;
        terms.quartic *= self.dv;
        terms.norm *= self.dv;
        terms
    }
}

fn cross_terms(a: &[Complex64], b: &[Complex64], dv: f64) -> (f64, f64) {
    let mut density_product = 0.0;
    let mut overlap = 0.0;
    for (x, y) in a.iter().zip(b) {
        density_product += x.norm_sqr() * y.norm_sqr();
        overlap += (x.conj() * y).re;
    }
    (density_product * dv, overlap * dv)
}

fn single_energy(ws: &mut EnergyWorkspace, psi: &[Complex64], potential: &[f64], g: f64, interaction_weight: f64) -> Result<f64> {
    let t = ws.terms(psi, potential);
    check_norm(t.norm)?;
    Ok((t.kinetic + t.potential + interaction_weight * g * t.quartic) / t.norm)
}

fn check_field(field: &Field, grid: &Arc<Grid>) -> Result<()> {
    if !same_grid(field.grid(), grid) {
        return Err(Error::GridMismatch("field and problem use different grids".into()));
    }
    Ok(())
}

/// `E₀ = ⟨ψ|T + V + g|ψ|²|ψ⟩ / ⟨ψ|ψ⟩`, with the full interaction term. For a
/// stationary state this quotient is the chemical potential.
pub fn energy_single(field: &Field, problem: &SingleProblem) -> Result<f64> {
    check_field(field, &problem.grid)?;
    let v = evaluate_potential(&problem.potential, &problem.grid)?;
    single_energy(&mut EnergyWorkspace::new(&problem.grid), field.values(), &v, problem.g, 1.0)
}

/// Mean-field energy functional per particle, with `g/2` on the interaction.
pub fn gp_energy_single(field: &Field, problem: &SingleProblem) -> Result<f64> {
    check_field(field, &problem.grid)?;
    let v = evaluate_potential(&problem.potential, &problem.grid)?;
    single_energy(&mut EnergyWorkspace::new(&problem.grid), field.values(), &v, problem.g, 0.5)
}

fn two_energy(
    ws: &mut EnergyWorkspace,
    a: &[Complex64],
    b: &[Complex64],
    potentials: &[Vec<f64>; 2],
    problem: &TwoComponentProblem,
    interaction_weight: f64,
) -> Result<f64> {
    let t1 = ws.terms(a, &potentials[0]);
    let t2 = ws.terms(b, &potentials[1]);
    let norm = t1.norm + t2.norm;
    check_norm(norm)?;
    let (density_product, overlap) = cross_terms(a, b, ws.dv);
    // H₁ and H₂ each carry g₁₂ times the other density.
    let interaction = problem.g11 * t1.quartic
        + problem.g22 * t2.quartic
        + 2.0 * problem.g12 * density_product;
    let total = t1.kinetic
        + t2.kinetic
        + t1.potential
        + t2.potential
        + interaction_weight * interaction
        + problem.omega * overlap;
    Ok(total / norm)
}

/// `[ψ₁ ψ₂] [[H₁, Ω/2], [Ω/2, H₂]] [ψ₁ ψ₂]ᵀ` over the joint norm.
pub fn energy_two(fields: &TwoComponentField, problem: &TwoComponentProblem) -> Result<f64> {
    check_field(fields.component(0), &problem.grid)?;
    let potentials = two_potentials(problem)?;
    let [a, b] = fields.components();
    two_energy(&mut EnergyWorkspace::new(&problem.grid), a.values(), b.values(), &potentials, problem, 1.0)
}

/// Two-component mean-field energy functional (interaction halved).
pub fn gp_energy_two(fields: &TwoComponentField, problem: &TwoComponentProblem) -> Result<f64> {
    check_field(fields.component(0), &problem.grid)?;
    let potentials = two_potentials(problem)?;
    let [a, b] = fields.components();
    two_energy(&mut EnergyWorkspace::new(&problem.grid), a.values(), b.values(), &potentials, problem, 0.5)
}

fn two_potentials(problem: &TwoComponentProblem) -> Result<[Vec<f64>; 2]> {
    Ok([
        evaluate_potential(&problem.potentials[0], &problem.grid)?,
        evaluate_potential(&problem.potentials[1], &problem.grid)?,
    ])
}

/// `(T + V + g|ψ|²) ψ`, kinetic part evaluated spectrally.
pub fn apply_hamiltonian_single(field: &Field, problem: &SingleProblem) -> Result<Field> {
    check_field(field, &problem.grid)?;
    let grid = &problem.grid;
    let v = evaluate_potential(&problem.potential, grid)?;
    let dft = Dft::new(grid);
    let mut kin = field.values().to_vec();
    let mut scratch = Vec::new();
    dft.forward(&mut kin, &mut scratch);
    for (x, k2) in kin.iter_mut().zip(grid.k_squared()) {
        *x *= 0.5 * k2;
    }
    dft.inverse(&mut kin, &mut scratch);
    let out = kin
        .iter()
        .zip(field.values())
        .zip(&v)
        .map(|((t, psi), pot)| t + psi * (pot + problem.g * psi.norm_sqr()))
        .collect();
    Field::new(grid.clone(), out)
}

/// Reusable single-component stepper holding FFT plans and potential samples.
pub struct SingleStepper {
    dft: Dft,
    half: KineticPropagator,
    potential: Vec<f64>,
    g: f64,
    dt: f64,
    dv: f64,
    density: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl SingleStepper {
    pub fn new(problem: &SingleProblem, dt: f64) -> Result<Self> {
        let grid = problem.grid.clone();
        Ok(Self {
            dft: Dft::new(&grid),
            half: KineticPropagator::half_step(grid.clone(), dt)?,
            potential: evaluate_potential(&problem.potential, &grid)?,
            g: problem.g,
            dt,
            dv: grid.cell_volume(),
            density: vec![0.0; grid.len()],
            scratch: Vec::new(),
        })
    }

    /// Advances `psi` by one step and renormalizes it.
    pub fn step(&mut self, psi: &mut [Complex64], iteration: usize) -> Result<()> {
        for (d, v) in self.density.iter_mut().zip(psi.iter()) {
            *d = v.norm_sqr();
        }
        self.half.apply_in_place(&self.dft, psi, &mut self.scratch);
        for ((v, pot), d) in psi.iter_mut().zip(&self.potential).zip(&self.density) {
            *v *= decay(-self.dt * (pot + self.g * d));
        }
        self.half.apply_in_place(&self.dft, psi, &mut self.scratch);
        let norm_sq = sum_sq(psi) * self.dv;
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        let scale = 1.0 / check_norm(norm_sq)?;
        for v in psi.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }
}

/// One normalized imaginary-time step.
pub fn ite_step_single(field: &Field, problem: &SingleProblem, dt: f64) -> Result<Field> {
    check_field(field, &problem.grid)?;
    let mut stepper = SingleStepper::new(problem, dt)?;
    let mut values = field.values().to_vec();
    stepper.step(&mut values, 0)?;
    Field::new(field.grid().clone(), values)
}

/// Rotates the global phase so the value at the density maximum is real and
/// positive, keeps the real part, and zeroes round-off negatives.
pub fn fix_phase(field: &Field) -> Field {
    let values = field.values();
    let phase = reference_phase(values.iter().map(|v| (v.norm_sqr(), *v)));
    Field::new(field.grid().clone(), rotate_real(values, phase)).expect("shape preserved")
}

/// Two-component variant: the phase is taken from the dominant component at
/// the joint density maximum and applied to both.
pub fn fix_phase_two(fields: &TwoComponentField) -> TwoComponentField {
    let [a, b] = fields.components();
    let phase = reference_phase(a.values().iter().zip(b.values()).map(|(x, y)| {
        let dominant = if x.norm_sqr() >= y.norm_sqr() { *x } else { *y };
        (x.norm_sqr() + y.norm_sqr(), dominant)
    }));
    let fix = |f: &Field| Field::new(f.grid().clone(), rotate_real(f.values(), phase)).expect("shape preserved");
    TwoComponentField::new(fix(a), fix(b)).expect("same grid")
}

fn reference_phase(samples: impl Iterator<Item = (f64, Complex64)>) -> Complex64 {
    let (_, v) = samples.fold((f64::NEG_INFINITY, Complex64::new(1.0, 0.0)), |best, s| {
        if s.0 > best.0 {
            s
        } else {
            best
        }
    });
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn rotate_real(values: &[Complex64], phase: Complex64) -> Vec<Complex64> {
    let c = phase.conj();
    values
        .iter()
        .map(|v| {
            let mut re = (v * c).re;
            if re < 0.0 && re > -1e-8 {
                re = 0.0;
            }
            Complex64::new(re, 0.0)
        })
        .collect()
}

fn initial_single(grid: &Arc<Grid>, initial: InitialState) -> Result<Field> {
    match initial {
        InitialState::Gaussian => Field::gaussian(grid.clone()),
    }
}

/// Evolves from the configured initial state to the ground state.
pub fn solve_ground_single(problem: &SingleProblem, config: &EvolutionConfig) -> Result<GroundState> {
    let initial = initial_single(&problem.grid, config.initial)?;
    solve_ground_single_from(problem, config, initial)
}

pub fn solve_ground_single_from(
    problem: &SingleProblem,
    config: &EvolutionConfig,
    initial: Field,
) -> Result<GroundState> {
    check_field(&initial, &problem.grid)?;
    let potential = evaluate_potential(&problem.potential, &problem.grid)?;
    config.validate(max_of(&potential))?;
    let mut stepper = SingleStepper::new(problem, config.dt)?;
    let mut energy_ws = EnergyWorkspace::new(&problem.grid);
    let mut psi = initial.into_values();
    let mut energies: Vec<f64> = Vec::new();
    let mut performed = config.iterations;
    for it in 0..config.iterations {
        stepper.step(&mut psi, it)?;
        if (it + 1) % config.snapshot_every == 0 {
            let e = single_energy(&mut energy_ws, &psi, &potential, problem.g, 1.0)?;
            if !e.is_finite() {
                return Err(Error::NonFinite { iteration: it });
            }
            let converged = match (config.tolerance, energies.last()) {
                (Some(tol), Some(prev)) => (e - prev).abs() < tol,
                _ => false,
            };
            energies.push(e);
            if converged {
                performed = it + 1;
                break;
            }
        }
    }
    let field = Field::new(problem.grid.clone(), psi)?;
    let field = crate::grid::normalize_l2(&fix_phase(&field))?;
    let energy = single_energy(&mut energy_ws, field.values(), &potential, problem.g, 1.0)?;
    Ok(GroundState {
        field,
        energy,
        energies,
        iterations: performed,
    })
}

/// Reusable two-component stepper.
pub struct TwoComponentStepper {
    dft: Dft,
    half: KineticPropagator,
    potentials: [Vec<f64>; 2],
    couplings: [f64; 3],
    rabi: (f64, f64),
    dt: f64,
    dv: f64,
    densities: [Vec<f64>; 2],
    scratch: Vec<Complex64>,
}

impl TwoComponentStepper {
    pub fn new(problem: &TwoComponentProblem, dt: f64) -> Result<Self> {
        let grid = problem.grid.clone();
        let a = dt * problem.omega / 2.0;
        Ok(Self {
            dft: Dft::new(&grid),
            half: KineticPropagator::half_step(grid.clone(), dt)?,
            potentials: two_potentials(problem)?,
            couplings: [problem.g11, problem.g12, problem.g22],
            rabi: (a.cosh(), a.sinh()),
            dt,
            dv: grid.cell_volume(),
            densities: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
            scratch: Vec::new(),
        })
    }

    pub fn step(&mut self, a: &mut [Complex64], b: &mut [Complex64], iteration: usize) -> Result<()> {
        let [d1, d2] = &mut self.densities;
        for (d, v) in d1.iter_mut().zip(a.iter()) {
            *d = v.norm_sqr();
        }
        for (d, v) in d2.iter_mut().zip(b.iter()) {
            *d = v.norm_sqr();
        }
        self.half.apply_in_place(&self.dft, a, &mut self.scratch);
        self.half.apply_in_place(&self.dft, b, &mut self.scratch);
        let [g11, g12, g22] = self.couplings;
        let (c, s) = self.rabi;
        let [v1, v2] = &self.potentials;
        for j in 0..a.len() {
            let x = a[j] * decay(-self.dt * (v1[j] + g11 * d1[j] + g12 * d2[j]));
            let y = b[j] * decay(-self.dt * (v2[j] + g22 * d2[j] + g12 * d1[j]));
            // exp(-Δτ(Ω/2)σx)
            a[j] = x * c - y * s;
            b[j] = y * c - x * s;
        }
        self.half.apply_in_place(&self.dft, a, &mut self.scratch);
        self.half.apply_in_place(&self.dft, b, &mut self.scratch);
        let norm_sq = joint_sum_sq(a, b) * self.dv;
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        let scale = 1.0 / check_norm(norm_sq)?;
        for v in a.iter_mut().chain(b.iter_mut()) {
            *v *= scale;
        }
        Ok(())
    }
}

pub fn ite_step_two(fields: &TwoComponentField, problem: &TwoComponentProblem, dt: f64) -> Result<TwoComponentField> {
    check_field(fields.component(0), &problem.grid)?;
    let mut stepper = TwoComponentStepper::new(problem, dt)?;
    let [a, b] = fields.components();
    let (mut a, mut b) = (a.values().to_vec(), b.values().to_vec());
    stepper.step(&mut a, &mut b, 0)?;
    TwoComponentField::new(
        Field::new(problem.grid.clone(), a)?,
        Field::new(problem.grid.clone(), b)?,
    )
}

/// Equal superposition of the single-component initial state.
pub fn initial_two(grid: &Arc<Grid>, initial: InitialState) -> Result<TwoComponentField> {
    let f = initial_single(grid, initial)?.scaled(std::f64::consts::FRAC_1_SQRT_2);
    TwoComponentField::new(f.clone(), f)
}

pub fn solve_ground_two(problem: &TwoComponentProblem, config: &EvolutionConfig) -> Result<TwoComponentGroundState> {
    let initial = initial_two(&problem.grid, config.initial)?;
    solve_ground_two_from(problem, config, initial)
}

pub fn solve_ground_two_from(
    problem: &TwoComponentProblem,
    config: &EvolutionConfig,
    initial: TwoComponentField,
) -> Result<TwoComponentGroundState> {
    check_field(initial.component(0), &problem.grid)?;
    let potentials = two_potentials(problem)?;
    config.validate(max_of(&potentials[0]).max(max_of(&potentials[1])))?;
    let mut stepper = TwoComponentStepper::new(problem, config.dt)?;
    let mut energy_ws = EnergyWorkspace::new(&problem.grid);
    let [a, b] = initial.into_components();
    let (mut a, mut b) = (a.into_values(), b.into_values());
    let mut energies: Vec<f64> = Vec::new();
    let mut performed = config.iterations;
    for it in 0..config.iterations {
        stepper.step(&mut a, &mut b, it)?;
        if (it + 1) % config.snapshot_every == 0 {
            let e = two_energy(&mut energy_ws, &a, &b, &potentials, problem, 1.0)?;
            if !e.is_finite() {
                return Err(Error::NonFinite { iteration: it });
            }
            let converged = match (config.tolerance, energies.last()) {
                (Some(tol), Some(prev)) => (e - prev).abs() < tol,
                _ => false,
            };
            energies.push(e);
            if converged {
                performed = it + 1;
                break;
            }
        }
    }
    let fields = TwoComponentField::new(
        Field::new(problem.grid.clone(), a)?,
        Field::new(problem.grid.clone(), b)?,
    )?;
    let fields = crate::grid::normalize_joint(&fix_phase_two(&fields))?;
    let [a, b] = fields.components();
    let energy = two_energy(&mut energy_ws, a.values(), b.values(), &potentials, problem, 1.0)?;
    Ok(TwoComponentGroundState {
        fields,
        energy,
        energies,
        iterations: performed,
    })
}
