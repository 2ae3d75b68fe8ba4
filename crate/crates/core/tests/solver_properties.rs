use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use gpstate_core::gpe::{
    energy_single, energy_two, ite_step_single, solve_ground_single, solve_ground_single_from,
    solve_ground_two, EvolutionConfig, SingleProblem, TwoComponentProblem,
};
use gpstate_core::grid::{l2_norm_sq, normalize_l2, Field, Grid};
use gpstate_core::potential::{evaluate_potential, PotentialSpec};

/// Dense real kinetic matrix `T_jl = (1/N) Σ_k (k²/2) cos(k (x_j - x_l))`.
fn dense_kinetic(grid: &Grid) -> DMatrix<f64> {
    let n = grid.len();
    let x = grid.positions(0);
    let k = grid.wavenumbers(0);
    DMatrix::from_fn(n, n, |j, l| {
        k.iter()
            .map(|kk| 0.5 * kk * kk * (kk * (x[j] - x[l])).cos())
            .sum::<f64>()
            / n as f64
    })
}

fn harmonic_problem(grid: &Arc<Grid>, g: f64) -> SingleProblem {
    SingleProblem::new(grid.clone(), PotentialSpec::harmonic(1), g).unwrap()
}

#[test]
fn linear_ground_state_matches_dense_diagonalization() {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 64).unwrap());
    let v = evaluate_potential(&PotentialSpec::harmonic(1), &grid).unwrap();
    let h = dense_kinetic(&grid) + DMatrix::from_diagonal(&DVector::from_vec(v));
    let eig = SymmetricEigen::new(h);
    let lowest = eig.eigenvalues.imin();
    let vec = eig.eigenvectors.column(lowest);
    let dx = grid.spacing(0);

    let gs = solve_ground_single(&harmonic_problem(&grid, 0.0), &EvolutionConfig::new(1e-3, 20_000)).unwrap();
    let err = gs
        .field
        .density()
        .iter()
        .zip(vec.iter())
        .map(|(d, e)| (d - e * e / dx).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-5, "max density error {err:e}");
    assert!((gs.energy - eig.eigenvalues[lowest]).abs() < 1e-6);
}

#[test]
fn interacting_ground_state_is_self_consistent() {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 64).unwrap());
    let t = dense_kinetic(&grid);
    let v = evaluate_potential(&PotentialSpec::harmonic(1), &grid).unwrap();
    let dx = grid.spacing(0);
    for g in [10.0, 100.0] {
        let p = harmonic_problem(&grid, g);
        let gs = solve_ground_single(&p, &EvolutionConfig::new(1e-4, 300_000).with_tolerance(1e-13)).unwrap();
        let psi = DVector::from_iterator(64, gs.field.values().iter().map(|c| c.re));
        let mu = energy_single(&gs.field, &p).unwrap();
        let nonlinear: Vec<f64> = v.iter().zip(psi.iter()).map(|(vv, p)| vv + g * p * p).collect();
        let h = &t + DMatrix::from_diagonal(&DVector::from_vec(nonlinear));
        let residual = (&h * &psi - mu * &psi).norm() * dx.sqrt();
        assert!(residual < 1e-5, "g={g}: residual {residual:e}");

        // and it is the lowest eigenvector of the linearized operator
        let eig = SymmetricEigen::new(h);
        assert!((eig.eigenvalues.min() - mu).abs() < 1e-5);
    }
}

#[test]
fn energy_decreases_along_the_flow() {
    let grid = Arc::new(Grid::line(-12.0, 12.0, 256).unwrap());
    for g in [0.0, 20.0, 200.0] {
        let p = harmonic_problem(&grid, g);
        let start = normalize_l2(&Field::from_fn(grid.clone(), |x, _| (-(x - 1.5).powi(2) / 3.0).exp())).unwrap();
        let cfg = EvolutionConfig::new(1e-3, 3000).with_snapshot_every(1);
        let gs = solve_ground_single_from(&p, &cfg, start).unwrap();
        for (i, w) in gs.energies.windows(2).enumerate().skip(10) {
            assert!(w[1] <= w[0] + 1e-9, "g={g} step {i}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn splitting_bias_is_second_order() {
    let grid = Arc::new(Grid::line(-10.0, 10.0, 128).unwrap());
    let p = harmonic_problem(&grid, 50.0);
    let energy = |dt: f64| {
        let iters = (30.0 / dt) as usize;
        solve_ground_single(&p, &EvolutionConfig::new(dt, iters).with_tolerance(1e-14)).unwrap().energy
    };
    let (e1, e2, e3) = (energy(0.04), energy(0.02), energy(0.01));
    let ratio = (e1 - e2) / (e2 - e3);
    assert!((ratio - 4.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn decoupled_two_component_matches_single_solve() {
    let grid = Arc::new(Grid::line(-10.0, 10.0, 128).unwrap());
    let g = 60.0;
    let cfg = EvolutionConfig::new(1e-3, 10_000);
    let two = TwoComponentProblem::new(grid.clone(), [PotentialSpec::harmonic(1), PotentialSpec::harmonic(1)], [g, 0.0, g], 0.0).unwrap();
    let pair = solve_ground_two(&two, &cfg).unwrap();
    // each component holds half the atoms, so it feels g/2
    let single = solve_ground_single(&harmonic_problem(&grid, g / 2.0), &cfg).unwrap();
    assert!((pair.energy - single.energy).abs() < 1e-6);
    for c in pair.fields.components() {
        assert!((l2_norm_sq(c) - 0.5).abs() < 1e-12);
        for (a, b) in c.values().iter().zip(single.field.values()) {
            assert!((a.re * 2f64.sqrt() - b.re).abs() < 1e-9);
        }
    }
}

#[test]
fn component_swap_preserves_energy() {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 128).unwrap());
    let p = TwoComponentProblem::new(grid.clone(), [PotentialSpec::LatticeA, PotentialSpec::LatticeA], [103.0, 100.0, 97.0], -1.0).unwrap();
    let gs = solve_ground_two(&p, &EvolutionConfig::new(1e-3, 8000)).unwrap();
    let swapped = energy_two(&gs.fields.swapped(), &p.swapped()).unwrap();
    assert!((swapped - gs.energy).abs() < 1e-10);

    let gs_swapped = solve_ground_two(&p.swapped(), &EvolutionConfig::new(1e-3, 8000)).unwrap();
    assert!((gs_swapped.energy - gs.energy).abs() < 1e-10);
    // the lower intra-species coupling wins the population
    assert!(l2_norm_sq(gs.fields.component(1)) > l2_norm_sq(gs.fields.component(0)));
}

#[test]
fn ground_state_outputs_are_real_and_non_negative() {
    let grid = Arc::new(Grid::plane((-7.0, 7.0, 64), (-3.5, 3.5, 32)).unwrap());
    let p = SingleProblem::new(grid, PotentialSpec::LatticeB, 20.0).unwrap();
    let gs = solve_ground_single(&p, &EvolutionConfig::new(1e-3, 1000)).unwrap();
    assert!(gs.field.values().iter().all(|v| v.im == 0.0 && v.re >= 0.0));
    assert!((l2_norm_sq(&gs.field) - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_renormalize_any_input(
        amps in prop::collection::vec(-2.0f64..2.0, 32),
        g in 0.0f64..200.0,
        dt in 1e-4f64..5e-2,
    ) {
        prop_assume!(amps.iter().any(|a| a.abs() > 1e-3));
        let grid = Arc::new(Grid::line(-6.0, 6.0, 32).unwrap());
        let f = Field::new(grid.clone(), amps.iter().map(|&a| Complex64::new(a, 0.5 * a)).collect()).unwrap();
        let p = harmonic_problem(&grid, g);
        let next = ite_step_single(&f, &p, dt).unwrap();
        prop_assert!((l2_norm_sq(&next) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_quotient_is_scale_invariant(
        amps in prop::collection::vec(0.0f64..1.0, 32),
        scale in 1e-3f64..1e3,
    ) {
        prop_assume!(amps.iter().any(|a| *a > 1e-3));
        let grid = Arc::new(Grid::line(-6.0, 6.0, 32).unwrap());
        let f = Field::from_real(grid.clone(), &amps).unwrap();
        let p = harmonic_problem(&grid, 0.0);
        let a = energy_single(&f, &p).unwrap();
        let b = energy_single(&f.scaled(scale), &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
