use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hamiltonian coefficient swept by a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    /// Single-component coupling strength.
    G,
    /// Rabi coupling of a two-component condensate.
    Omega,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::G => "g",
            Self::Omega => "omega",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(Self::G),
            "omega" => Ok(Self::Omega),
            _ => Err(Error::InvalidConfig(format!("unknown parameter '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    /// Endpoint-inclusive linear spacing.
    #[default]
    Grid,
    /// Independent uniform draws.
    Random,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "uniform-grid" => Ok(Self::Grid),
            "random" | "uniform-random" => Ok(Self::Random),
            _ => Err(Error::InvalidConfig(format!("unknown spacing '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Segment {
    pub fn grid(lo: f64, hi: f64, count: usize) -> Self {
        Self {
            lo,
            hi,
            count,
            spacing: Spacing::Grid,
        }
    }

    pub fn random(lo: f64, hi: f64, count: usize) -> Self {
        Self {
            lo,
            hi,
            count,
            spacing: Spacing::Random,
        }
    }
}

/// Parameter values to solve for, as a concatenation of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub parameter: Parameter,
    pub segments: Vec<Segment>,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(parameter: Parameter, segments: Vec<Segment>, seed: u64) -> Self {
        Self {
            parameter,
            segments,
            seed,
        }
    }

    /// 50000 gridded couplings over `g ∈ [0, 500]`.
    pub fn single_component_reference() -> Self {
        Self::new(Parameter::G, vec![Segment::grid(0.0, 500.0, 50_000)], 0)
    }

    /// 10000 gridded Rabi couplings over `[-20, 0]` plus 3000 over `[-2, 0]`.
    pub fn two_component_reference() -> Self {
        Self::new(
            Parameter::Omega,
            vec![Segment::grid(-20.0, 0.0, 10_000), Segment::grid(-2.0, 0.0, 3_000)],
            0,
        )
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic list of parameter values, segments in order.
pub fn expand_plan(plan: &SamplingPlan) -> Result<Vec<f64>> {
    if plan.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut values = Vec::with_capacity(plan.len());
    for s in &plan.segments {
        if !(s.lo.is_finite() && s.hi.is_finite()) || s.hi < s.lo {
            return Err(Error::InvalidConfig(format!(
                "segment range [{}, {}] is not a finite interval",
                s.lo, s.hi
            )));
        }
        match s.spacing {
            Spacing::Grid if s.count == 1 => values.push(s.lo),
            Spacing::Grid => {
                let step = (s.hi - s.lo) / (s.count - 1) as f64;
                values.extend((0..s.count).map(|i| {
                    if i + 1 == s.count {
                        s.hi
                    } else {
                        s.lo + i as f64 * step
                    }
                }));
            }
            Spacing::Random if s.hi == s.lo => values.extend(std::iter::repeat(s.lo).take(s.count)),
            Spacing::Random => values.extend((0..s.count).map(|_| rng.gen_range(s.lo..=s.hi))),
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_segment() {
        let plan = SamplingPlan::new(Parameter::G, vec![Segment::grid(0.0, 500.0, 6)], 1);
        assert_eq!(expand_plan(&plan).unwrap(), vec![0.0, 100.0, 200.0, 300.0, 400.0, 500.0]);
    }

    #[test]
    fn reference_plans() {
        let v = expand_plan(&SamplingPlan::single_component_reference()).unwrap();
        assert_eq!(v.len(), 50_000);
        assert!(v.iter().all(|g| (0.0..=500.0).contains(g)));
        assert_eq!((v[0], v[49_999]), (0.0, 500.0));

        let v = expand_plan(&SamplingPlan::two_component_reference()).unwrap();
        assert_eq!(v.len(), 13_000);
        assert_eq!(v.iter().filter(|w| (-20.0..=0.0).contains(*w)).count(), 13_000);
        assert!(v[10_000..].iter().all(|w| (-2.0..=0.0).contains(w)));
    }

    #[test]
    fn random_segments_are_seeded() {
        let plan = SamplingPlan::new(Parameter::Omega, vec![Segment::random(-3.0, -1.0, 50)], 42);
        let a = expand_plan(&plan).unwrap();
        assert_eq!(a, expand_plan(&plan).unwrap());
        assert!(a.iter().all(|w| (-3.0..=-1.0).contains(w)));
        let other = SamplingPlan { seed: 43, ..plan };
        assert_ne!(a, expand_plan(&other).unwrap());
    }

    #[test]
    fn rejects_empty_and_bad_ranges() {
        let empty = SamplingPlan::new(Parameter::G, vec![], 0);
        assert!(matches!(expand_plan(&empty), Err(Error::EmptyPlan)));
        let zero = SamplingPlan::new(Parameter::G, vec![Segment::grid(0.0, 1.0, 0)], 0);
        assert!(matches!(expand_plan(&zero), Err(Error::EmptyPlan)));
        let bad = SamplingPlan::new(Parameter::G, vec![Segment::grid(0.0, f64::INFINITY, 3)], 0);
        assert!(expand_plan(&bad).is_err());
    }
}
