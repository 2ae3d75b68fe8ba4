use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gpstate_core::dataset::{
    generate_dataset, load_dataset, save_dataset, solve_record, split_train_val, Dataset, DatasetHeader, ProblemTemplate,
};
use gpstate_core::gpe::{gp_energy_single, gp_energy_two};
use gpstate_core::grid::Grid;
use gpstate_eval::{bench_speedup, postprocess_prediction, sweep_report, PredictedState, SweepOptions};
use gpstate_nn::gradcheck::run_suite;
use gpstate_nn::{load_checkpoint, train, GroundStateNet};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{Command, DatasetCommand};

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Solve { out, .. } => solve(cfg, out.as_deref()),
        Command::Dataset(DatasetCommand::Generate { out, .. }) => dataset_generate(cfg, out),
        Command::Dataset(DatasetCommand::Inspect { path, csv }) => dataset_inspect(path, csv.as_deref()),
        Command::Dataset(DatasetCommand::Split { path, out, .. }) => dataset_split(cfg, path, out),
        Command::Train { dataset, split, out } => train_cmd(cfg, dataset, split.as_deref(), out),
        Command::Predict { checkpoint, g, omega, out } => predict(cfg, checkpoint, g.or(*omega), out.as_deref()),
        Command::Eval {
            checkpoint,
            dataset,
            split,
            recompute,
            out,
        } => eval(cfg, checkpoint, dataset, split.as_deref(), *recompute, out),
        Command::Bench { checkpoint, runs, out, .. } => bench(cfg, checkpoint, *runs, out.as_deref()),
        Command::Gradcheck { seed } => gradcheck(*seed),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn read_indices(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| CliError::validation(format!("{}: '{l}' is not an index", path.display())))
        })
        .collect()
}

fn index_list(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

/// Positions of every grid point as CSV columns.
fn position_header(grid: &Grid) -> &'static str {
    if grid.dims() == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn position(grid: &Grid, idx: usize) -> String {
    let [x, y] = grid.coords(idx);
    if grid.dims() == 1 {
        format!("{x:e}")
    } else {
        format!("{x:e},{y:e}")
    }
}

fn profile_csv(grid: &Grid, arrays: &[Vec<f64>]) -> String {
    let mut out = String::from(position_header(grid));
    for c in 1..=arrays.len() {
        write!(out, ",amp_{c}").expect("string write");
    }
    out.push('\n');
    for i in 0..grid.len() {
        out.push_str(&position(grid, i));
        for a in arrays {
            write!(out, ",{:e}", a[i]).expect("string write");
        }
        out.push('\n');
    }
    out
}

fn solve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let template = cfg.template()?;
    let param = cfg.coefficient()?;
    let evolution = cfg.evolution()?;
    let record = solve_record(&template, param, &evolution)?;
    let grid = template.grid();
    let arrays: Vec<&[f64]> = record.targets.iter().map(Vec::as_slice).collect();
    let state = postprocess_prediction(&arrays, grid)?;
    let (functional, amplitudes) = match &state {
        PredictedState::Single(f) => (gp_energy_single(f, &template.single(param)?)?, vec![f.values().iter().map(|v| v.norm()).collect()]),
        PredictedState::Two(f) => (
            gp_energy_two(f, &template.two(param)?)?,
            f.components().iter().map(|c| c.values().iter().map(|v| v.norm()).collect()).collect(),
        ),
    };
    let name = template.parameter().name();
    println!("{name}={param}");
    println!("iterations={}", record.iterations);
    println!("energy={:.12}", record.energy);
    println!("gp_functional={functional:.12}");
    if let Some(dir) = out {
        let dataset = Dataset {
            header: DatasetHeader {
                grid: grid.clone(),
                components: template.components(),
                parameter_names: vec![name.to_string()],
                dt: evolution.dt,
                iterations: evolution.iterations as u64,
                metadata: template.describe(),
            },
            records: vec![record],
        };
        cfg.echo(dir, "solve")?;
        save_dataset(&dataset, dir.join("state.gpds"))?;
        write(&dir.join("state.csv"), profile_csv(grid, &amplitudes))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn dataset_generate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let template = cfg.template()?;
    let plan = cfg.plan()?;
    let evolution = cfg.evolution()?;
    cfg.echo(out, "generate")?;
    let dataset = match generate_dataset(&plan, &template, &evolution, cfg.workers()?) {
        Ok(d) => d,
        Err(e) => {
            if let gpstate_core::Error::RecordFailed { index, completed, .. } = &e {
                let manifest = format!("failed={index}\ncompleted={}\n", completed.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
                write(&out.join("partial.manifest"), manifest)?;
            }
            return Err(e.into());
        }
    };
    let path = out.join("dataset.gpds");
    save_dataset(&dataset, &path)?;
    println!("{} records -> {}", dataset.len(), path.display());
    Ok(())
}

fn dataset_inspect(path: &Path, csv: Option<&Path>) -> Result<(), CliError> {
    let d = load_dataset(path)?;
    let h = &d.header;
    let shape: Vec<String> = h.grid.axes().iter().map(|a| format!("[{}, {}] x {}", a.min, a.max, a.points)).collect();
    println!("grid: {}", shape.join(" by "));
    println!("components: {}", h.components);
    println!("parameters: {}", h.parameter_names.join(","));
    println!("solver: dt {} iterations {}", h.dt, h.iterations);
    for line in h.metadata.lines() {
        println!("  {line}");
    }
    println!("records: {}", d.len());
    if let (Some(lo), Some(hi)) = (
        d.records.iter().map(|r| r.param()).min_by(f64::total_cmp),
        d.records.iter().map(|r| r.param()).max_by(f64::total_cmp),
    ) {
        println!("parameter range: [{lo}, {hi}]");
    }
    d.validate()?;
    println!("targets: ok");
    if let Some(csv) = csv {
        write(csv, d.to_csv())?;
    }
    Ok(())
}

fn dataset_split(cfg: &RunConfig, path: &Path, out: &Path) -> Result<(), CliError> {
    let d = load_dataset(path)?;
    let split = split_train_val(d.len(), cfg.parse("train.val_fraction")?, cfg.parse("train.split_seed")?)?;
    cfg.echo(out, "split")?;
    write(&out.join("train.idx"), index_list(&split.train))?;
    write(&out.join("val.idx"), index_list(&split.validation))?;
    println!("train {} validation {}", split.train.len(), split.validation.len());
    Ok(())
}

fn param_range(d: &Dataset) -> (f64, f64) {
    let vals = d.records.iter().map(|r| r.param());
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn train_cmd(cfg: &RunConfig, dataset: &Path, split: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let d = load_dataset(dataset)?;
    let (train_idx, val_idx) = match split {
        Some(dir) => (read_indices(&dir.join("train.idx"))?, read_indices(&dir.join("val.idx"))?),
        None => {
            let s = split_train_val(d.len(), cfg.parse("train.val_fraction")?, cfg.parse("train.split_seed")?)?;
            (s.train, s.validation)
        }
    };
    let mut net = GroundStateNet::new(cfg.net(d.grid(), d.header.components, param_range(&d))?)?;
    let mut tc = cfg.train()?;
    tc.checkpoint_dir = Some(out.to_path_buf());
    cfg.echo(out, "train")?;
    let report = train(&mut net, &d, &train_idx, &val_idx, &tc)?;
    write(&out.join("losses.csv"), report.losses_csv())?;
    let mut timing = String::from("epoch,seconds\n");
    for e in &report.epochs {
        writeln!(timing, "{},{:.6}", e.epoch, e.seconds).expect("string write");
    }
    write(&out.join("timing.csv"), timing)?;
    println!("best epoch {} validation loss {:e}", report.best_epoch, report.best_val_loss);
    if let Some(p) = &report.checkpoint {
        println!("checkpoint {}", p.display());
    }
    Ok(())
}

fn predict(cfg: &RunConfig, checkpoint: &Path, param: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let net = load_checkpoint(checkpoint)?;
    let param = match param {
        Some(p) => p,
        None => cfg.coefficient()?,
    };
    let grid = net.config().grid()?;
    let pred = net.predict(&[param])?;
    let arrays: Vec<Vec<f64>> = pred.data().chunks_exact(grid.len()).map(<[f64]>::to_vec).collect();
    let csv = profile_csv(&grid, &arrays);
    match out {
        Some(path) => {
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            cfg.echo(dir, "predict")?;
            write(path, csv)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn eval(cfg: &RunConfig, checkpoint: &Path, dataset: &Path, split: Option<&Path>, recompute: bool, out: &Path) -> Result<(), CliError> {
    let net = load_checkpoint(checkpoint)?;
    let d = load_dataset(dataset)?;
    let indices = match split {
        Some(dir) => read_indices(&dir.join("val.idx"))?,
        None => (0..d.len()).collect(),
    };
    let options = SweepOptions {
        recompute: recompute.then(|| cfg.evolution()).transpose()?,
        workers: cfg.workers()?,
    };
    cfg.echo(out, "eval")?;
    let report = sweep_report(&net, &d, &indices, &options)?;
    report.write_csv(out.join("eval.csv"))?;
    let s = report.summary();
    println!(
        "{} records: median rel err {:.3e}, max rel err {:.3e}, median mse {:.3e}, max mse {:.3e}",
        report.rows.len(),
        s.median_rel_err,
        s.max_rel_err,
        s.median_mse,
        s.max_mse
    );
    if let Some(w) = report.worst() {
        println!("worst at {} = {}", d.header.parameter_names[0], w.param);
    }
    Ok(())
}

fn bench(cfg: &RunConfig, checkpoint: &Path, runs: usize, out: Option<&Path>) -> Result<(), CliError> {
    let net = load_checkpoint(checkpoint)?;
    let template: ProblemTemplate = cfg.template_on(std::sync::Arc::new(net.config().grid()?))?;
    if template.components() != net.config().output_channels {
        return Err(CliError::validation(format!(
            "checkpoint predicts {} components but problem.components is {}",
            net.config().output_channels,
            template.components()
        )));
    }
    let report = bench_speedup(&net, &template, cfg.coefficient()?, &cfg.evolution()?, runs)?;
    println!("{report}");
    if let Some(dir) = out {
        cfg.echo(dir, "bench")?;
        let csv = format!(
            "method,median_seconds,runs\nsurrogate,{:e},{runs}\nite,{:e},{runs}\n",
            report.surrogate_seconds, report.ite_seconds
        );
        write(&dir.join("bench.csv"), csv)?;
    }
    Ok(())
}

fn gradcheck(seed: u64) -> Result<(), CliError> {
    let checks = run_suite(seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::numerical(format!("{failed} of {} gradient checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

