//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `cargo test --release -p gpstate-eval --test acceptance -- 1 7 12` runs a
//! subset by number.

use std::error::Error;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use gpstate_core::dataset::{
    generate_dataset, read_dataset, split_train_val, write_dataset, Dataset, Parameter, ProblemTemplate, SamplingPlan,
    Segment,
};
use gpstate_core::gpe::{energy_single, energy_two, solve_ground_single, solve_ground_two, EvolutionConfig, SingleProblem, TwoComponentProblem};
use gpstate_core::grid::Grid;
use gpstate_core::potential::{evaluate_potential, PotentialSpec};
use gpstate_eval::{bench_speedup, sweep_report, EvalReport, SweepOptions};
use gpstate_nn::gradcheck::run_suite;
use gpstate_nn::{evaluate_loss, read_checkpoint, train, write_checkpoint, AdamConfig, GroundStateNet, NetConfig, StepDecay, TrainConfig};

type Outcome = Result<(bool, String), Box<dyn Error>>;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn harmonic(grid: &Arc<Grid>, g: f64) -> SingleProblem {
    SingleProblem::new(grid.clone(), PotentialSpec::harmonic(grid.dims()), g).unwrap()
}

/// `T_jl = (1/N) Σ_k (k²/2) cos(k (x_j − x_l))`, the spectral kinetic operator.
fn dense_kinetic(grid: &Grid) -> DMatrix<f64> {
    let n = grid.len();
    let x = grid.positions(0);
    let k = grid.wavenumbers(0);
    DMatrix::from_fn(n, n, |j, l| k.iter().map(|kk| 0.5 * kk * kk * (kk * (x[j] - x[l])).cos()).sum::<f64>() / n as f64)
}

fn linear_limit_1d() -> Outcome {
    let grid = Arc::new(Grid::line(-12.0, 12.0, 512)?);
    let t = Instant::now();
    let gs = solve_ground_single(&harmonic(&grid, 0.0), &EvolutionConfig::new(1e-3, 5000))?;
    let secs = t.elapsed().as_secs_f64();
    let err = (gs.energy - 0.5).abs();
    Ok((
        err < 5e-4 && gs.iterations <= 5000 && secs < 10.0,
        format!("E={:.9} |E-0.5|={err:.2e} (<5e-4), {} iterations, {secs:.2} s (<10 s)", gs.energy, gs.iterations),
    ))
}

fn linear_limit_2d() -> Outcome {
    let grid = Arc::new(Grid::plane((-8.0, 8.0, 64), (-8.0, 8.0, 64))?);
    let t = Instant::now();
    let gs = solve_ground_single(&harmonic(&grid, 0.0), &EvolutionConfig::new(1e-3, 8000))?;
    let secs = t.elapsed().as_secs_f64();
    let err = (gs.energy - 1.0).abs();
    Ok((err < 1e-3 && secs < 60.0, format!("E={:.9} |E-1|={err:.2e} (<1e-3), {secs:.2} s (<60 s)", gs.energy)))
}

fn diagonalization_oracle() -> Outcome {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 64)?);
    let v = evaluate_potential(&PotentialSpec::harmonic(1), &grid)?;
    let eig = SymmetricEigen::new(dense_kinetic(&grid) + DMatrix::from_diagonal(&DVector::from_vec(v)));
    let lowest = eig.eigenvalues.imin();
    let vec = eig.eigenvectors.column(lowest);
    let dx = grid.spacing(0);
    let gs = solve_ground_single(&harmonic(&grid, 0.0), &EvolutionConfig::new(1e-3, 20_000))?;
    let err = gs.field.density().iter().zip(vec.iter()).map(|(d, e)| (d - e * e / dx).abs()).fold(0.0, f64::max);
    Ok((err < 1e-5, format!("max density error {err:.2e} (<1e-5)")))
}

fn self_consistency() -> Outcome {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 64)?);
    let t = dense_kinetic(&grid);
    let v = evaluate_potential(&PotentialSpec::harmonic(1), &grid)?;
    let dx = grid.spacing(0);
    let mut ok = true;
    let mut detail = Vec::new();
    for g in [10.0, 100.0] {
        let p = harmonic(&grid, g);
        let gs = solve_ground_single(&p, &EvolutionConfig::new(1e-4, 300_000).with_tolerance(1e-13))?;
        let psi = DVector::from_iterator(grid.len(), gs.field.values().iter().map(|c| c.re));
        let mu = energy_single(&gs.field, &p)?;
        let diag: Vec<f64> = v.iter().zip(psi.iter()).map(|(vv, p)| vv + g * p * p).collect();
        let h = &t + DMatrix::from_diagonal(&DVector::from_vec(diag));
        let residual = (&h * &psi - mu * &psi).norm() * dx.sqrt();
        ok &= residual < 1e-5;
        detail.push(format!("g={g}: residual {residual:.2e}"));
    }
    Ok((ok, format!("{} (<1e-5)", detail.join(", "))))
}

fn thomas_fermi() -> Outcome {
    let g = 500.0;
    let grid = Arc::new(Grid::line(-20.0, 20.0, 512)?);
    let t = Instant::now();
    let gs = solve_ground_single(&harmonic(&grid, g), &EvolutionConfig::new(1e-4, 1_000_000).with_tolerance(1e-9))?;
    let secs = t.elapsed().as_secs_f64();
    let tf = 0.5 * (1.5 * g).powf(2.0 / 3.0);
    let rel = (gs.energy - tf).abs() / tf;
    Ok((
        rel < 0.03 && secs < 60.0,
        format!("E={:.4} vs {tf:.4}, rel {rel:.2e} (<3e-2), {} iterations, {secs:.2} s (<60 s)", gs.energy, gs.iterations),
    ))
}

fn two_component_symmetry() -> Outcome {
    let grid = Arc::new(Grid::line(-10.0, 10.0, 128)?);
    let g = 60.0;
    let cfg = EvolutionConfig::new(1e-3, 10_000);
    let pair = solve_ground_two(
        &TwoComponentProblem::new(grid.clone(), [PotentialSpec::harmonic(1), PotentialSpec::harmonic(1)], [g, 0.0, g], 0.0)?,
        &cfg,
    )?;
    // half the atoms in each component, so each feels g/2
    let single = solve_ground_single(&harmonic(&grid, g / 2.0), &cfg)?;
    let decoupled = (pair.energy - single.energy).abs();

    let p = TwoComponentProblem::new(grid.clone(), [PotentialSpec::LatticeA, PotentialSpec::LatticeA], [103.0, 100.0, 97.0], -1.0)?;
    let gs = solve_ground_two(&p, &EvolutionConfig::new(1e-3, 8000))?;
    let swap = (energy_two(&gs.fields.swapped(), &p.swapped())? - gs.energy).abs();
    Ok((decoupled < 1e-6 && swap < 1e-10, format!("decoupled |dE|={decoupled:.2e} (<1e-6), swap |dE|={swap:.2e} (<1e-10)")))
}

fn gradient_suite() -> Outcome {
    let t = Instant::now();
    let checks = run_suite(7)?;
    let secs = t.elapsed().as_secs_f64();
    let worst = checks.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).ok_or("empty suite")?;
    let ok = checks.iter().all(|c| c.rel_error < 1e-4) && secs < 60.0;
    Ok((ok, format!("{} checks, worst '{}' {:.2e} (<1e-4), {secs:.2} s (<60 s)", checks.len(), worst.name, worst.rel_error)))
}

struct Trained {
    net: GroundStateNet,
    dataset: Dataset,
    validation: Vec<usize>,
    report: EvalReport,
    seconds: f64,
}

fn train_surrogate(template: &ProblemTemplate, plan: &SamplingPlan, range: (f64, f64), epochs: usize, decay_every: usize) -> Result<Trained, Box<dyn Error>> {
    let t = Instant::now();
    let dataset = generate_dataset(plan, template, &EvolutionConfig::new(1e-3, 20_000), workers())?;
    let split = split_train_val(dataset.len(), 0.1, 0)?;
    let mut net = GroundStateNet::new(NetConfig::for_grid(template.grid(), template.components(), range))?;
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        adam: AdamConfig::default(),
        decay: Some(StepDecay { every: decay_every, factor: 0.5 }),
        ..TrainConfig::default()
    };
    train(&mut net, &dataset, &split.train, &split.validation, &cfg)?;
    let seconds = t.elapsed().as_secs_f64();
    let report = sweep_report(&net, &dataset, &split.validation, &SweepOptions::default())?;
    Ok(Trained {
        net,
        dataset,
        validation: split.validation,
        report,
        seconds,
    })
}

fn single_component_training(cache: &mut Option<Trained>) -> Outcome {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 128)?);
    let template = ProblemTemplate::Single {
        grid,
        potential: PotentialSpec::harmonic(1),
    };
    let plan = SamplingPlan::new(Parameter::G, vec![Segment::grid(0.0, 100.0, 2000)], 0);
    let run = train_surrogate(&template, &plan, (0.0, 100.0), 100, 25)?;
    let mse = evaluate_loss(&run.net, &run.dataset, &run.validation)?;
    let s = run.report.summary();
    let worst = run.report.worst().ok_or("empty report")?.param;
    let at_edge = worst <= 5.0 || worst >= 95.0;
    let ok = mse < 1e-3 && s.median_rel_err < 2e-2 && at_edge && run.seconds < 45.0 * 60.0;
    let detail = format!(
        "val MSE {mse:.2e} (<1e-3), median rel err {:.2e} (<2e-2), worst at g={worst:.2} (within 5% of an end: {at_edge}), {:.0} s (<2700 s)",
        s.median_rel_err, run.seconds
    );
    *cache = Some(run);
    Ok((ok, detail))
}

fn two_component_training() -> Outcome {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 128)?);
    let template = ProblemTemplate::Two {
        grid,
        potentials: [PotentialSpec::LatticeA, PotentialSpec::LatticeA],
        couplings: [103.0, 100.0, 97.0],
    };
    let plan = SamplingPlan::new(Parameter::Omega, vec![Segment::grid(-20.0, 0.0, 1000), Segment::grid(-2.0, 0.0, 300)], 0);
    let run = train_surrogate(&template, &plan, (-20.0, 0.0), 200, 50)?;
    let s = run.report.summary();
    let near = run.report.median_rel_err_between(-2.0, 0.0);
    let mid = run.report.median_rel_err_between(-14.0, -6.0);
    Ok((
        s.median_rel_err < 2e-2 && near <= mid,
        format!(
            "median rel err {:.2e} (<2e-2), median near 0 [-2,0] {near:.2e} <= mid-range [-14,-6] {mid:.2e}, {:.0} s",
            s.median_rel_err, run.seconds
        ),
    ))
}

fn speedup() -> Outcome {
    let grid = Grid::plane((-8.0, 8.0, 64), (-8.0, 8.0, 64))?;
    let template = ProblemTemplate::Single {
        grid: Arc::new(grid.clone()),
        potential: PotentialSpec::harmonic(2),
    };
    let mut net = GroundStateNet::new(NetConfig::for_grid(&grid, 1, (0.0, 100.0)))?;
    // one training-mode batch to populate the normalization statistics
    net.forward(&[10.0, 40.0, 70.0, 90.0])?;
    let report = bench_speedup(&net, &template, 50.0, &EvolutionConfig::new(1e-3, 8000), 11)?;
    Ok((
        report.speedup() >= 50.0,
        format!(
            "surrogate {:.3e} s, ITE {:.3e} s, speedup {:.0}x (>=50x, median of {})",
            report.surrogate_seconds,
            report.ite_seconds,
            report.speedup(),
            report.runs
        ),
    ))
}

fn determinism_and_formats(trained: Option<&Trained>) -> Outcome {
    let grid = Arc::new(Grid::line(-8.0, 8.0, 64)?);
    let template = ProblemTemplate::Single {
        grid: grid.clone(),
        potential: PotentialSpec::harmonic(1),
    };
    let plan = SamplingPlan::new(Parameter::G, vec![Segment::grid(0.0, 100.0, 16)], 0);
    let cfg = EvolutionConfig::new(1e-3, 2000);
    let one = write_dataset(&generate_dataset(&plan, &template, &cfg, 1)?)?;
    let eight = write_dataset(&generate_dataset(&plan, &template, &cfg, 8)?)?;
    let identical = one == eight;

    let dataset_round_trip = write_dataset(&read_dataset(&one)?)? == one;

    let net = match trained {
        Some(t) => read_checkpoint(&write_checkpoint(&t.net))?,
        None => {
            let mut n = GroundStateNet::new(NetConfig::for_grid(&grid, 1, (0.0, 100.0)))?;
            n.forward(&[0.0, 50.0])?;
            n
        }
    };
    let bytes = write_checkpoint(&net);
    let back = read_checkpoint(&bytes)?;
    let checkpoint_round_trip = write_checkpoint(&back) == bytes && back.state() == net.state();

    // flip one byte inside record 7
    let d = read_dataset(&one)?;
    let stride = (1 + 3 + grid.len()) * 8 + 4;
    let mut bad = one.clone();
    let offset = one.len() - (d.len() - 7) * stride + 16;
    bad[offset] ^= 0x01;
    let named = match read_dataset(&bad) {
        Err(gpstate_core::Error::Checksum { index }) => index == 7,
        _ => false,
    };
    Ok((
        identical && dataset_round_trip && checkpoint_round_trip && named,
        format!(
            "1 vs 8 workers identical: {identical}, dataset round trip: {dataset_round_trip}, checkpoint round trip: {checkpoint_round_trip}, corrupted record 7 named: {named}"
        ),
    ))
}

fn monotonicity() -> Outcome {
    let grid = Arc::new(Grid::line(-12.0, 12.0, 256)?);
    let gs: Vec<f64> = vec![0.0, 25.0, 50.0, 100.0];
    let mut peaks = Vec::new();
    let mut energies = Vec::new();
    for &g in &gs {
        let s = solve_ground_single(&harmonic(&grid, g), &EvolutionConfig::new(1e-3, 20_000))?;
        peaks.push(s.peak_density());
        energies.push(s.energy);
    }
    let ok = peaks.windows(2).all(|w| w[1] < w[0]) && energies.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Ok((ok, format!("g {:?}: peak density {} / energy {}", gs, fmt(&peaks), fmt(&energies))))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut trained = None;
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let line = match outcome {
            Ok((true, detail)) => format!("PASS  {n:>2} {name}: {detail}"),
            Ok((false, detail)) => format!("FAIL  {n:>2} {name}: {detail}"),
            Err(e) => format!("FAIL  {n:>2} {name}: error: {e}"),
        };
        if line.starts_with("FAIL") {
            failures += 1;
        }
        println!("{line}");
    };

    if selected(1) {
        report(1, "1D linear-limit energy", linear_limit_1d());
    }
    if selected(2) {
        report(2, "2D linear-limit energy", linear_limit_2d());
    }
    if selected(3) {
        report(3, "diagonalization oracle", diagonalization_oracle());
    }
    if selected(4) {
        report(4, "self-consistency for g>0", self_consistency());
    }
    if selected(5) {
        report(5, "Thomas-Fermi limit", thomas_fermi());
    }
    if selected(6) {
        report(6, "two-component decoupling and swap", two_component_symmetry());
    }
    if selected(7) {
        report(7, "gradient suite", gradient_suite());
    }
    if selected(8) {
        report(8, "single-component surrogate training", single_component_training(&mut trained));
    }
    if selected(9) {
        report(9, "two-component surrogate training", two_component_training());
    }
    if selected(10) {
        report(10, "surrogate speedup", speedup());
    }
    if selected(11) {
        report(11, "determinism and file formats", determinism_and_formats(trained.as_ref()));
    }
    if selected(12) {
        report(12, "coupling monotonicity", monotonicity());
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
