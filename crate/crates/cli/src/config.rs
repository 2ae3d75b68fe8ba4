//! `key=value` run configuration with dotted sections.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use gpstate_core::dataset::{Parameter, ProblemTemplate, SamplingPlan, Segment, Spacing};
use gpstate_core::gpe::EvolutionConfig;
use gpstate_core::grid::Grid;
use gpstate_core::potential::PotentialKind;
use gpstate_nn::{AdamConfig, NetConfig, StepDecay, TrainConfig};

use crate::error::CliError;

/// Every accepted key with its default.
const DEFAULTS: &[(&str, &str)] = &[
    ("grid.dims", "1"),
    ("grid.x.min", "-12"),
    ("grid.x.max", "12"),
    ("grid.x.points", "512"),
    ("grid.y.min", "-8"),
    ("grid.y.max", "8"),
    ("grid.y.points", "64"),
    ("problem.components", "1"),
    ("problem.potential", "harmonic"),
    ("problem.potential2", "same"),
    ("problem.g", "0"),
    ("problem.omega", "-1"),
    ("problem.g11", "103"),
    ("problem.g12", "100"),
    ("problem.g22", "97"),
    ("solver.dt", "1e-3"),
    ("solver.iterations", "8000"),
    ("solver.tolerance", "none"),
    ("solver.snapshot_every", "100"),
    ("plan.segments", "0:100:6"),
    ("plan.seed", "0"),
    ("net.channels", "auto"),
    ("net.kernel", "3"),
    ("net.dilations", "1,2,4,8,16,1"),
    ("net.leaky_slope", "0.01"),
    ("net.seed", "0"),
    ("net.input_range", "auto"),
    ("train.epochs", "200"),
    ("train.batch_size", "64"),
    ("train.learning_rate", "1e-3"),
    ("train.seed", "0"),
    ("train.shuffle", "true"),
    ("train.decay_every", "0"),
    ("train.decay_factor", "0.5"),
    ("train.val_fraction", "0.1"),
    ("train.split_seed", "0"),
    ("run.workers", "auto"),
];

/// Resolved configuration: defaults, then the file, then overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        DEFAULTS.iter().map(|(k, _)| *k)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::validation(format!("unknown configuration key '{key}'"))),
        }
    }

    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("config line {}: expected key=value, got '{line}'", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("override '{pair}' is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key listed in DEFAULTS")
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| CliError::validation(format!("invalid value '{raw}' for key '{key}'")))
    }

    fn optional<T: FromStr>(&self, key: &str, none: &str) -> Result<Option<T>, CliError> {
        if self.get(key) == none {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    /// Sorted `key=value` lines, suitable for [`apply_text`](Self::apply_text).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            writeln!(out, "{k}={v}").expect("string write");
        }
        out
    }

    /// Writes the resolved configuration as `<command>.config` in `dir`.
    pub fn echo(&self, dir: &Path, command: &str) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{command}.config"));
        fs::write(&path, self.render()).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }

    pub fn workers(&self) -> Result<usize, CliError> {
        match self.optional::<usize>("run.workers", "auto")? {
            Some(0) => Err(CliError::validation("run.workers must be positive".into())),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        }
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let axis = |a: &str| -> Result<(f64, f64, usize), CliError> {
            Ok((
                self.parse(&format!("grid.{a}.min"))?,
                self.parse(&format!("grid.{a}.max"))?,
                self.parse(&format!("grid.{a}.points"))?,
            ))
        };
        let grid = match self.parse::<usize>("grid.dims")? {
            1 => {
                let (lo, hi, n) = axis("x")?;
                Grid::line(lo, hi, n)
            }
            2 => Grid::plane(axis("x")?, axis("y")?),
            d => return Err(CliError::validation(format!("grid.dims must be 1 or 2, got {d}"))),
        };
        grid.map_err(|e| CliError::validation(e.to_string()))
    }

    pub fn template(&self) -> Result<ProblemTemplate, CliError> {
        let grid = Arc::new(self.grid()?);
        self.template_on(grid)
    }

    /// Problem description on an externally given grid.
    pub fn template_on(&self, grid: Arc<Grid>) -> Result<ProblemTemplate, CliError> {
        let kind = |key: &str| -> Result<PotentialKind, CliError> {
            self.get(key)
                .parse::<PotentialKind>()
                .map_err(|_| CliError::validation(format!("invalid value '{}' for key '{key}'", self.get(key))))
        };
        let first = kind("problem.potential")?;
        let second = if self.get("problem.potential2") == "same" {
            first
        } else {
            kind("problem.potential2")?
        };
        let dims = grid.dims();
        match self.parse::<usize>("problem.components")? {
            1 => Ok(ProblemTemplate::Single {
                grid,
                potential: first.spec(dims),
            }),
            2 => Ok(ProblemTemplate::Two {
                grid,
                potentials: [first.spec(dims), second.spec(dims)],
                couplings: [
                    self.parse("problem.g11")?,
                    self.parse("problem.g12")?,
                    self.parse("problem.g22")?,
                ],
            }),
            c => Err(CliError::validation(format!("problem.components must be 1 or 2, got {c}"))),
        }
    }

    /// The swept coefficient of the configured problem: `problem.g` or
    /// `problem.omega`.
    pub fn coefficient(&self) -> Result<f64, CliError> {
        match self.parse::<usize>("problem.components")? {
            2 => self.parse("problem.omega"),
            _ => self.parse("problem.g"),
        }
    }

    pub fn evolution(&self) -> Result<EvolutionConfig, CliError> {
        let mut cfg = EvolutionConfig::new(self.parse("solver.dt")?, self.parse("solver.iterations")?)
            .with_snapshot_every(self.parse("solver.snapshot_every")?);
        cfg.tolerance = self.optional("solver.tolerance", "none")?;
        Ok(cfg)
    }

    /// `lo:hi:count[:grid|random]` segments separated by `;`.
    pub fn plan(&self) -> Result<SamplingPlan, CliError> {
        let key = "plan.segments";
        let bad = |s: &str| CliError::validation(format!("invalid segment '{s}' in '{key}'; expected lo:hi:count[:grid|random]"));
        let mut segments = Vec::new();
        for s in self.get(key).split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let f: Vec<&str> = s.split(':').map(str::trim).collect();
            if !(3..=4).contains(&f.len()) {
                return Err(bad(s));
            }
            let lo: f64 = f[0].parse().map_err(|_| bad(s))?;
            let hi: f64 = f[1].parse().map_err(|_| bad(s))?;
            let count: usize = f[2].parse().map_err(|_| bad(s))?;
            let spacing = match f.get(3) {
                Some(sp) => sp.parse::<Spacing>().map_err(|_| bad(s))?,
                None => Spacing::Grid,
            };
            segments.push(Segment { lo, hi, count, spacing });
        }
        let parameter = match self.parse::<usize>("problem.components")? {
            2 => Parameter::Omega,
            _ => Parameter::G,
        };
        Ok(SamplingPlan::new(parameter, segments, self.parse("plan.seed")?))
    }

    /// Network for `grid` with `outputs` channels; `auto` settings fall back
    /// to the grid defaults and to `range` for the input interval.
    pub fn net(&self, grid: &Grid, outputs: usize, range: (f64, f64)) -> Result<NetConfig, CliError> {
        let mut cfg = NetConfig::for_grid(grid, outputs, range);
        if let Some(c) = self.optional("net.channels", "auto")? {
            cfg.channels = c;
        }
        cfg.kernel = self.parse("net.kernel")?;
        cfg.dilations = self
            .get("net.dilations")
            .split(',')
            .map(|d| d.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::validation(format!("invalid value '{}' for key 'net.dilations'", self.get("net.dilations"))))?;
        cfg.leaky_slope = self.parse("net.leaky_slope")?;
        cfg.seed = self.parse("net.seed")?;
        if self.get("net.input_range") != "auto" {
            let raw = self.get("net.input_range");
            let bad = || CliError::validation(format!("invalid value '{raw}' for key 'net.input_range'; expected lo,hi"));
            let (lo, hi) = raw.split_once(',').ok_or_else(bad)?;
            cfg.input_range = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        }
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig, CliError> {
        let every: usize = self.parse("train.decay_every")?;
        Ok(TrainConfig {
            epochs: self.parse("train.epochs")?,
            batch_size: self.parse("train.batch_size")?,
            adam: AdamConfig {
                learning_rate: self.parse("train.learning_rate")?,
                ..AdamConfig::default()
            },
            seed: self.parse("train.seed")?,
            shuffle: self.parse("train.shuffle")?,
            checkpoint_dir: None,
            decay: (every > 0).then(|| -> Result<StepDecay, CliError> {
                Ok(StepDecay {
                    every,
                    factor: self.parse("train.decay_factor")?,
                })
            })
            .transpose()?,
        })
    }
}
