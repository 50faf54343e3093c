//! Run configuration: defaults, TOML file, validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Method;
use crate::fockspec::HamiltonianModel;
use crate::realize::ExpansionMode;

pub const OUT_ENV: &str = "QWEYL_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected json or csv)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub theta: f64,
    pub n_max: u32,
    /// Monomial degree cutoff for the realization checks.
    pub degree: u32,
    pub mode: ExpansionMode,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub alpha: f64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub method: Method,
    pub model: HamiltonianModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta: 0.01,
            n_max: 10,
            degree: 6,
            mode: ExpansionMode::Paper,
            t_final: 5.0,
            dt: 1e-3,
            alpha: 0.5,
            out: PathBuf::from("qweyl-out"),
            format: OutputFormat::Json,
            method: Method::Expm,
            model: HamiltonianModel::Substituted,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.theta.is_finite() {
            return bad(format!("theta must be finite, got {}", self.theta));
        }
        if self.n_max < 1 {
            return bad("n_max must be at least 1".into());
        }
        if self.degree < 2 {
            return bad(format!("degree must be at least 2, got {}", self.degree));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be non-negative, got {}", self.t_final));
        }
        if self.dt > self.t_final && self.t_final > 0.0 {
            return bad(format!("dt = {} exceeds T = {}", self.dt, self.t_final));
        }
        if !self.alpha.is_finite() {
            return bad(format!("alpha must be finite, got {}", self.alpha));
        }
        Ok(())
    }

    /// Spectrum runs need room for the interior margin.
    pub fn validate_spectrum(&self) -> Result<()> {
        self.validate()?;
        if self.n_max < 4 {
            return Err(Error::Config(format!(
                "spectrum needs n_max >= 4, got {}",
                self.n_max
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml("theta = 0.2\nmode = \"rederived\"\nT = 1.5\n").unwrap();
        assert_eq!(c.theta, 0.2);
        assert_eq!(c.mode, ExpansionMode::Rederived);
        assert_eq!(c.t_final, 1.5);
        assert_eq!(c.n_max, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::from_toml("thetta = 0.2").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let c = RunConfig {
            dt: 0.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            n_max: 3,
            ..RunConfig::default()
        };
        assert!(c.validate().is_ok() && c.validate_spectrum().is_err());
    }
}
