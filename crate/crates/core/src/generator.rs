use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the six generators `X₁, X₂, X₃, ∂₁, ∂₂, ∂₃`.
///
/// The derived ordering (all coordinates before all derivatives, ascending
/// index within each group) is the canonical normal order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Generator {
    X1,
    X2,
    X3,
    D1,
    D2,
    D3,
}

impl Generator {
    pub const ALL: [Generator; 6] = [
        Generator::X1,
        Generator::X2,
        Generator::X3,
        Generator::D1,
        Generator::D2,
        Generator::D3,
    ];

    pub fn coord(axis: usize) -> Generator {
        [Generator::X1, Generator::X2, Generator::X3][axis]
    }

    pub fn deriv(axis: usize) -> Generator {
        [Generator::D1, Generator::D2, Generator::D3][axis]
    }

    /// Zero-based axis (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        match self {
            Generator::X1 | Generator::D1 => 0,
            Generator::X2 | Generator::D2 => 1,
            Generator::X3 | Generator::D3 => 2,
        }
    }

    pub fn is_coord(self) -> bool {
        matches!(self, Generator::X1 | Generator::X2 | Generator::X3)
    }

    pub fn is_deriv(self) -> bool {
        !self.is_coord()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Generator::X1 => "X1",
            Generator::X2 => "X2",
            Generator::X3 => "X3",
            Generator::D1 => "d1",
            Generator::D2 => "d2",
            Generator::D3 => "d3",
        };
        f.write_str(s)
    }
}

impl FromStr for Generator {
    type Err = Error;

    /// Accepts `X1`/`x1`/`X`, `d1`/`D1`/`dX`, and the `Y`, `Z` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let g = match s.trim() {
            "X1" | "x1" | "X" => Generator::X1,
            "X2" | "x2" | "Y" => Generator::X2,
            "X3" | "x3" | "Z" => Generator::X3,
            "d1" | "D1" | "dX" => Generator::D1,
            "d2" | "D2" | "dY" => Generator::D2,
            "d3" | "D3" | "dZ" => Generator::D3,
            other => return Err(Error::UnknownGenerator(other.to_string())),
        };
        Ok(g)
    }
}
