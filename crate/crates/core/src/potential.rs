//! External trapping potentials.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `½ω²x²`
    Harmonic1D { omega: f64 },
    /// `½(ωx²x² + ωy²y²)`
    Harmonic2D { omega_x: f64, omega_y: f64 },
    /// `0.5x² + 24cos²x`, the 1D optical lattice in a harmonic trap.
    LatticeA,
    /// `0.5(x² + 5y²) + cos²x`, the anisotropic 2D lattice.
    LatticeB,
    /// Values tabulated on the grid, flat layout.
    Custom(Vec<f64>),
}

impl PotentialSpec {
    /// Isotropic unit-frequency harmonic trap for the given dimensionality.
    pub fn harmonic(dims: usize) -> Self {
        if dims == 1 {
            Self::Harmonic1D { omega: 1.0 }
        } else {
            Self::Harmonic2D {
                omega_x: 1.0,
                omega_y: 1.0,
            }
        }
    }

    pub fn dims(&self) -> Option<usize> {
        match self {
            Self::Harmonic1D { .. } | Self::LatticeA => Some(1),
            Self::Harmonic2D { .. } | Self::LatticeB => Some(2),
            Self::Custom(_) => None,
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Harmonic1D { omega } if *omega == 1.0 => write!(f, "harmonic"),
            Self::Harmonic2D { omega_x, omega_y } if *omega_x == 1.0 && *omega_y == 1.0 => {
                write!(f, "harmonic")
            }
            Self::Harmonic1D { omega } => write!(f, "harmonic({omega})"),
            Self::Harmonic2D { omega_x, omega_y } => write!(f, "harmonic({omega_x},{omega_y})"),
            Self::LatticeA => write!(f, "latticeA"),
            Self::LatticeB => write!(f, "latticeB"),
            Self::Custom(_) => write!(f, "custom"),
        }
    }
}

/// Parsed form of a potential name; `harmonic` needs the grid dimensionality
/// to become a [`PotentialSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Harmonic,
    LatticeA,
    LatticeB,
}

impl PotentialKind {
    pub fn spec(self, dims: usize) -> PotentialSpec {
        match self {
            Self::Harmonic => PotentialSpec::harmonic(dims),
            Self::LatticeA => PotentialSpec::LatticeA,
            Self::LatticeB => PotentialSpec::LatticeB,
        }
    }
}

impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "harmonic" => Ok(Self::Harmonic),
            "latticea" | "lattice-a" | "lattice_a" => Ok(Self::LatticeA),
            "latticeb" | "lattice-b" | "lattice_b" => Ok(Self::LatticeB),
            _ => Err(Error::InvalidConfig(format!("unknown potential '{s}'"))),
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Harmonic => "harmonic",
            Self::LatticeA => "latticeA",
            Self::LatticeB => "latticeB",
        })
    }
}

/// Samples the potential at every grid point.
pub fn evaluate_potential(spec: &PotentialSpec, grid: &Grid) -> Result<Vec<f64>> {
    if let Some(d) = spec.dims() {
        if d != grid.dims() {
            return Err(Error::GridMismatch(format!(
                "{spec} potential is {d}D but the grid is {}D",
                grid.dims()
            )));
        }
    }
    let values = match spec {
        PotentialSpec::Harmonic1D { omega } => {
            let w2 = omega * omega;
            grid.map_coords(|x, _| 0.5 * w2 * x * x)
        }
        PotentialSpec::Harmonic2D { omega_x, omega_y } => {
            let (wx2, wy2) = (omega_x * omega_x, omega_y * omega_y);
            grid.map_coords(|x, y| 0.5 * (wx2 * x * x + wy2 * y * y))
        }
        PotentialSpec::LatticeA => grid.map_coords(|x, _| 0.5 * x * x + 24.0 * x.cos().powi(2)),
        PotentialSpec::LatticeB => {
            grid.map_coords(|x, y| 0.5 * (x * x + 5.0 * y * y) + x.cos().powi(2))
        }
        PotentialSpec::Custom(values) => {
            if values.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "tabulated potential has {} values, grid has {} points",
                    values.len(),
                    grid.len()
                )));
            }
            values.clone()
        }
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "potential is not finite at grid index {i}"
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_values() {
        let g = Grid::line(-4.0, 4.0, 8).unwrap();
        let v = evaluate_potential(&PotentialSpec::harmonic(1), &g).unwrap();
        assert_eq!(v[4], 0.0);
        assert_eq!(v[0], 8.0);

        let a = evaluate_potential(&PotentialSpec::LatticeA, &g).unwrap();
        assert_eq!(a[4], 24.0);

        let g2 = Grid::plane((-2.0, 2.0, 8), (-2.0, 2.0, 8)).unwrap();
        let v2 = evaluate_potential(&PotentialSpec::harmonic(2), &g2).unwrap();
        // (x, y) = (1, 1) sits at index (6, 6)
        assert_eq!(v2[6 * 8 + 6], 1.0);
        for (i, val) in v2.iter().enumerate() {
            let [x, y] = g2.coords(i);
            assert_eq!(*val, 0.5 * (x * x + y * y));
        }
        let b = evaluate_potential(&PotentialSpec::LatticeB, &g2).unwrap();
        assert_eq!(b[4 * 8 + 4], 1.0);
    }

    #[test]
    fn first_sample_is_left_edge() {
        let g = Grid::line(-12.0, 12.0, 512).unwrap();
        let v = evaluate_potential(&PotentialSpec::harmonic(1), &g).unwrap();
        assert_eq!(v[0], 0.5 * 144.0);
    }

    #[test]
    fn dimension_and_table_checks() {
        let g = Grid::line(-4.0, 4.0, 8).unwrap();
        assert!(evaluate_potential(&PotentialSpec::LatticeB, &g).is_err());
        assert!(evaluate_potential(&PotentialSpec::Custom(vec![0.0; 7]), &g).is_err());
        assert!(evaluate_potential(&PotentialSpec::Custom(vec![f64::NAN; 8]), &g).is_err());
        assert_eq!(
            evaluate_potential(&PotentialSpec::Custom(vec![2.0; 8]), &g).unwrap(),
            vec![2.0; 8]
        );
    }

    #[test]
    fn parses_names() {
        assert_eq!("latticeA".parse::<PotentialKind>().unwrap(), PotentialKind::LatticeA);
        assert_eq!("Harmonic".parse::<PotentialKind>().unwrap(), PotentialKind::Harmonic);
        assert!("box".parse::<PotentialKind>().is_err());
    }
}
