use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gpstate");

fn gpstate(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("GPSTATE_WORKERS").output().expect("spawn gpstate")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no '{key}' in {text}"))
        .parse()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &[
    "--set",
    "grid.x.min=-6",
    "--set",
    "grid.x.max=6",
    "--set",
    "grid.x.points=32",
    "--set",
    "solver.dt=2e-3",
    "--set",
    "solver.iterations=1500",
];

fn generate(out: &Path, workers: &str) -> Output {
    let mut args = vec!["dataset", "generate", "--segments", "0:40:6", "--out", p(out)];
    args.extend_from_slice(SMALL);
    Command::new(BIN).args(&args).env("GPSTATE_WORKERS", workers).output().unwrap()
}

#[test]
fn harmonic_solve_prints_half() {
    let o = gpstate(&["solve", "--dims", "1", "--potential", "harmonic", "--g", "0", "--iterations", "5000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let e = value(&stdout(&o), "energy");
    assert!((e - 0.5).abs() < 5e-4, "{e}");
}

#[test]
fn two_component_solve_writes_record_csv_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpstate(&[
        "solve", "--dims", "1", "--potential", "latticeA", "--two-component", "--omega", "-1", "--g11", "103", "--g12", "100",
        "--g22", "97", "--points", "64", "--set", "grid.x.min=-8", "--set", "grid.x.max=8", "--iterations", "1000", "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("state.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,amp_1,amp_2"));
    assert_eq!(lines.count(), 64);
    assert!(dir.path().join("state.gpds").exists());

    // the echoed config reproduces the run
    let again = gpstate(&["solve", "--config", p(&dir.path().join("solve.config"))]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(value(&stdout(&again), "energy"), value(&stdout(&o), "energy"));

    let inspect = gpstate(&["dataset", "inspect", p(&dir.path().join("state.gpds"))]);
    assert!(stdout(&inspect).contains("components: 2"));
}

#[test]
fn unknown_keys_fail_validation_by_name() {
    let o = gpstate(&["solve", "--set", "solver.dtt=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solver.dtt"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.config");
    fs::write(&cfg, "# comment\nnet.chanels = 8\n").unwrap();
    let o = gpstate(&["solve", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("net.chanels"));
}

#[test]
fn bad_values_and_missing_files() {
    let o = gpstate(&["solve", "--set", "solver.dt=-1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = gpstate(&["dataset", "inspect", "/nonexistent/x.gpds"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dataset_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let eight = dir.path().join("eight");
    assert!(generate(&one, "1").status.success());
    assert!(generate(&eight, "8").status.success());
    let a = fs::read(one.join("dataset.gpds")).unwrap();
    assert_eq!(a, fs::read(eight.join("dataset.gpds")).unwrap());
    assert!(one.join("generate.config").exists());

    let data = one.join("dataset.gpds");
    let o = gpstate(&["dataset", "inspect", p(&data), "--csv", p(&dir.path().join("d.csv"))]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("records: 6"));
    assert!(stdout(&o).contains("targets: ok"));
    assert_eq!(fs::read_to_string(dir.path().join("d.csv")).unwrap().lines().count(), 7);

    let split = dir.path().join("split");
    let o = gpstate(&["dataset", "split", p(&data), "--fraction", "0.5", "--seed", "3", "--out", p(&split)]);
    assert!(o.status.success());
    let val = fs::read_to_string(split.join("val.idx")).unwrap();
    let train = fs::read_to_string(split.join("train.idx")).unwrap();
    assert_eq!((val.lines().count(), train.lines().count()), (3, 3));

    // flip one byte inside the last record
    let mut bad = a.clone();
    let n = bad.len();
    bad[n - 20] ^= 0x40;
    let corrupt = dir.path().join("corrupt.gpds");
    fs::write(&corrupt, bad).unwrap();
    let o = gpstate(&["dataset", "inspect", p(&corrupt)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("record 5"), "{}", stderr(&o));
}

#[test]
fn train_predict_eval_bench() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert!(generate(&gen, "2").status.success());
    let data = gen.join("dataset.gpds");
    let net = ["--set", "net.channels=4", "--set", "train.epochs=3", "--set", "train.batch_size=2", "--set", "train.val_fraction=0.34"];

    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--dataset", p(&data), "--out", p(&out)];
        args.extend_from_slice(&net);
        let o = gpstate(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    let ckpt = |d: &Path| {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().is_some_and(|e| e == "gpnn"))
            .expect("checkpoint written")
    };
    let (ca, cb) = (ckpt(&a), ckpt(&b));
    assert_eq!(fs::read(&ca).unwrap(), fs::read(&cb).unwrap());
    assert_eq!(fs::read(a.join("losses.csv")).unwrap(), fs::read(b.join("losses.csv")).unwrap());
    assert_eq!(fs::read_to_string(a.join("losses.csv")).unwrap().lines().count(), 4);
    assert!(a.join("timing.csv").exists() && a.join("train.config").exists());

    let o = gpstate(&["predict", "--checkpoint", p(&ca), "--g", "25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("x,amp_1\n"));
    assert_eq!(csv.lines().count(), 33);
    for line in csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    let ev = dir.path().join("eval");
    let o = gpstate(&["eval", "--checkpoint", p(&ca), "--dataset", p(&data), "--out", p(&ev)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(ev.join("eval.csv")).unwrap();
    assert!(report.starts_with("param,E_pred,E_0,rel_err,mse\n"));
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let mut args = vec!["bench", "--checkpoint", p(&ca), "--runs", "3", "--g", "10"];
    args.extend_from_slice(SMALL);
    let o = gpstate(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("speedup"));

    // a checkpoint cannot stand in for a two-component problem
    let o = gpstate(&["bench", "--checkpoint", p(&ca), "--two-component", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diverging_training_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert!(generate(&gen, "1").status.success());
    let o = gpstate(&[
        "train", "--dataset", p(&gen.join("dataset.gpds")), "--out", p(&dir.path().join("t")), "--set", "net.channels=4",
        "--set", "train.epochs=5", "--set", "train.batch_size=2", "--set", "train.learning_rate=1e300",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes() {
    let o = gpstate(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("all 10 checks passed"));
}
