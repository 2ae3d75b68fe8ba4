//! Parameter sweeps of ground states and their on-disk representation.
//!
//! Each record holds the swept coefficient, the max-normalized ground-state
//! amplitude per component, and solver provenance (energy, iterations
//! performed, peak density before max-normalization).

mod format;
mod generate;
mod plan;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use format::{load_dataset, read_dataset, save_dataset, write_dataset, MAGIC, VERSION};
pub use generate::{generate_dataset, solve_record};
pub use plan::{expand_plan, Parameter, SamplingPlan, Segment, Spacing};

use crate::error::{Error, Result};
use crate::gpe::{SingleProblem, TwoComponentProblem};
use crate::grid::Grid;
use crate::potential::{PotentialKind, PotentialSpec};

/// Everything about a problem except the swept coefficient.
#[derive(Debug, Clone)]
pub enum ProblemTemplate {
    Single {
        grid: Arc<Grid>,
        potential: PotentialSpec,
    },
    Two {
        grid: Arc<Grid>,
        potentials: [PotentialSpec; 2],
        /// `[g11, g12, g22]`
        couplings: [f64; 3],
    },
}

impl ProblemTemplate {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Self::Single { grid, .. } | Self::Two { grid, .. } => grid,
        }
    }

    pub fn parameter(&self) -> Parameter {
        match self {
            Self::Single { .. } => Parameter::G,
            Self::Two { .. } => Parameter::Omega,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Self::Single { .. } => 1,
            Self::Two { .. } => 2,
        }
    }

    pub fn single(&self, g: f64) -> Result<SingleProblem> {
        match self {
            Self::Single { grid, potential } => SingleProblem::new(grid.clone(), potential.clone(), g),
            Self::Two { .. } => Err(Error::InvalidConfig(
                "two-component template cannot build a single-component problem".into(),
            )),
        }
    }

    pub fn two(&self, omega: f64) -> Result<TwoComponentProblem> {
        match self {
            Self::Two {
                grid,
                potentials,
                couplings,
            } => TwoComponentProblem::new(grid.clone(), potentials.clone(), *couplings, omega),
            Self::Single { .. } => Err(Error::InvalidConfig(
                "single-component template cannot build a two-component problem".into(),
            )),
        }
    }

    /// `key=value` lines stored in dataset headers.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        match self {
            Self::Single { potential, .. } => {
                let _ = writeln!(s, "components=1\npotential={potential}");
            }
            Self::Two {
                potentials,
                couplings,
                ..
            } => {
                let _ = writeln!(
                    s,
                    "components=2\npotential1={}\npotential2={}\ng11={}\ng12={}\ng22={}",
                    potentials[0], potentials[1], couplings[0], couplings[1], couplings[2]
                );
            }
        }
        s
    }

    /// Inverse of [`describe`](Self::describe) for the named potentials.
    pub fn from_description(grid: Arc<Grid>, text: &str) -> Result<Self> {
        let lookup = |key: &str| -> Result<&str> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim())
                .ok_or_else(|| Error::Format(format!("problem description lacks '{key}'")))
        };
        let potential = |key: &str| -> Result<PotentialSpec> {
            Ok(lookup(key)?.parse::<PotentialKind>()?.spec(grid.dims()))
        };
        let number = |key: &str| -> Result<f64> {
            lookup(key)?
                .parse()
                .map_err(|_| Error::Format(format!("'{key}' is not a number")))
        };
        match lookup("components")? {
            "1" => Ok(Self::Single {
                potential: potential("potential")?,
                grid,
            }),
            "2" => Ok(Self::Two {
                potentials: [potential("potential1")?, potential("potential2")?],
                couplings: [number("g11")?, number("g12")?, number("g22")?],
                grid,
            }),
            other => Err(Error::Format(format!("unsupported component count {other}"))),
        }
    }
}

/// One solved ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// Swept coefficient(s).
    pub params: Vec<f64>,
    /// Max-normalized amplitude, one array per component.
    pub targets: Vec<Vec<f64>>,
    /// Solver energy quotient of the unit-norm ground state.
    pub energy: f64,
    pub iterations: u64,
    /// `max|ψ|²` per component of the unit-norm state.
    pub peak_density: Vec<f64>,
}

impl SampleRecord {
    pub fn param(&self) -> f64 {
        self.params[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub grid: Arc<Grid>,
    pub components: usize,
    /// Names of the swept coefficients.
    pub parameter_names: Vec<String>,
    pub dt: f64,
    /// Iteration budget of each solve.
    pub iterations: u64,
    /// Problem description, see [`ProblemTemplate::describe`].
    pub metadata: String,
}

impl DatasetHeader {
    /// Names of every scalar stored ahead of the targets in a record.
    pub fn scalar_names(&self) -> Vec<String> {
        let mut names = self.parameter_names.clone();
        names.push("energy".into());
        names.push("iterations".into());
        if self.components == 1 {
            names.push("peak_density".into());
        } else {
            names.extend((1..=self.components).map(|c| format!("peak_density_{c}")));
        }
        names
    }

    pub fn template(&self) -> Result<ProblemTemplate> {
        ProblemTemplate::from_description(self.grid.clone(), &self.metadata)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.header.grid
    }

    /// Checks the shape and target-range invariants of every record.
    ///
    /// Targets lie in `[0, 1]`. Single-component records peak at exactly 1;
    /// two-component records share one scale, so the larger component peaks
    /// at exactly 1.
    pub fn validate(&self) -> Result<()> {
        let n = self.header.grid.len();
        for (i, r) in self.records.iter().enumerate() {
            let bad = |what: &str| Error::Format(format!("record {i}: {what}"));
            if r.params.len() != self.header.parameter_names.len() {
                return Err(bad("parameter count differs from header"));
            }
            if r.targets.len() != self.header.components || r.peak_density.len() != self.header.components {
                return Err(bad("component count differs from header"));
            }
            if r.targets.iter().any(|t| t.len() != n) {
                return Err(bad("target length differs from grid"));
            }
            if r.targets.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad("target outside [0, 1]"));
            }
            let peak = r.targets.iter().flatten().cloned().fold(0.0, f64::max);
            if peak != 1.0 {
                return Err(bad("target maximum is not 1"));
            }
        }
        Ok(())
    }

    /// One CSV row per record: parameters, then the flattened targets.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut cols: Vec<String> = self.header.parameter_names.clone();
        let n = self.header.grid.len();
        for c in 0..self.header.components {
            cols.extend((0..n).map(|j| format!("psi{}_{j}", c + 1)));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
        for r in &self.records {
            let row: Vec<String> = r
                .params
                .iter()
                .chain(r.targets.iter().flatten())
                .map(|v| format!("{v:.16e}"))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Peak density must not grow with the coupling on a single-component sweep.
/// Returns the index of the first record that violates it.
pub fn check_peak_monotone(dataset: &Dataset) -> std::result::Result<(), usize> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| dataset.records[a].param().total_cmp(&dataset.records[b].param()));
    for w in order.windows(2) {
        let (a, b) = (&dataset.records[w[0]], &dataset.records[w[1]]);
        if b.param() > a.param() && b.peak_density[0] > a.peak_density[0] {
            return Err(w[1]);
        }
    }
    Ok(())
}

/// Disjoint train/validation index lists, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded random partition with `round(fraction · count)` validation
/// indices, clamped so neither side is empty.
pub fn split_train_val(count: usize, fraction: f64, seed: u64) -> Result<Split> {
    if count < 2 {
        return Err(Error::TooSmall(count));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n_val = ((fraction * count as f64).round() as usize).clamp(1, count - 1);
    let mut indices: Vec<usize> = (0..count).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut validation = indices[..n_val].to_vec();
    let mut train = indices[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, validation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = split_train_val(50_000, 0.1, 7).unwrap();
        assert_eq!((s.validation.len(), s.train.len()), (5000, 45_000));
        let s = split_train_val(13_000, 0.1, 7).unwrap();
        assert_eq!((s.validation.len(), s.train.len()), (1300, 11_700));
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let a = split_train_val(10, 0.2, 3).unwrap();
        assert_eq!(a, split_train_val(10, 0.2, 3).unwrap());
        assert_eq!(a.validation.len(), 2);
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_train_val(1, 0.5, 0), Err(Error::TooSmall(1))));
        assert!(split_train_val(10, 0.0, 0).is_err());
        assert!(split_train_val(10, 1.0, 0).is_err());
    }

    #[test]
    fn template_description_round_trip() {
        let grid = Arc::new(Grid::line(-8.0, 8.0, 64).unwrap());
        let t = ProblemTemplate::Two {
            grid: grid.clone(),
            potentials: [PotentialSpec::LatticeA, PotentialSpec::LatticeA],
            couplings: [103.0, 100.0, 97.0],
        };
        let back = ProblemTemplate::from_description(grid.clone(), &t.describe()).unwrap();
        assert_eq!(back.describe(), t.describe());
        assert_eq!(back.two(-1.0).unwrap().g22, 97.0);

        let s = ProblemTemplate::Single {
            grid: grid.clone(),
            potential: PotentialSpec::harmonic(1),
        };
        let back = ProblemTemplate::from_description(grid, &s.describe()).unwrap();
        assert_eq!(back.single(3.0).unwrap().potential, PotentialSpec::harmonic(1));
        assert!(back.two(1.0).is_err());
    }
}
