//! Experiment configuration, loadable from `key = value` files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementKind;
use crate::pr_base::LambdaConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tspr,
    AltMinLowRaP,
    AltMinTrunc,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Tspr => "tspr",
            Algorithm::AltMinLowRaP => "altminlowrap",
            Algorithm::AltMinTrunc => "altmintrunc",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tspr" => Ok(Self::Tspr),
            "altminlowrap" => Ok(Self::AltMinLowRaP),
            "altmintrunc" => Ok(Self::AltMinTrunc),
            _ => Err(Error::Config(format!(
                "unknown algorithm '{s}' (expected tspr, altminlowrap or altmintrunc)"
            ))),
        }
    }
}

/// Every knob of one experiment.
///
/// Keys accepted by [`ExperimentConfig::set`] are the kebab-case field
/// names; `t`, `t-rwf`, `t-cgls` and `l` are accepted as aliases for the
/// iteration counts and `masks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub measurement: MeasurementKind,
    /// Gaussian models: `m = round(m_ratio * n)`.
    pub m_ratio: Option<f64>,
    /// CDP models: number of masks `L`, giving `m = L n`.
    pub masks: Option<usize>,
    /// Three ranks for `tspr`, one otherwise.
    pub ranks: Vec<usize>,
    pub iters: usize,
    pub rwf_iters: usize,
    pub rwf_step: f64,
    pub cgls_iters: usize,
    pub alpha: f64,
    pub lambda: LambdaConvention,
    pub seed: u64,
    pub correction: bool,
    /// Ground-truth frame stack.
    pub input: Option<PathBuf>,
    /// Pre-simulated observations; simulated from `input` when absent.
    pub measurements: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Record wall-clock time in the report. Off by default so that
    /// reports are byte-reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Tspr,
            measurement: MeasurementKind::ComplexGaussian,
            m_ratio: None,
            masks: None,
            ranks: Vec::new(),
            iters: 20,
            rwf_iters: 25,
            rwf_step: 0.8,
            cgls_iters: 50,
            alpha: 3.0,
            lambda: LambdaConvention::Amplitude,
            seed: 0,
            correction: false,
            input: None,
            measurements: None,
            output: None,
            timing: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for {key}"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "algorithm",
        "measurement",
        "m-ratio",
        "masks",
        "ranks",
        "iters",
        "rwf-iters",
        "rwf-step",
        "cgls-iters",
        "alpha",
        "lambda",
        "seed",
        "correction",
        "input",
        "measurements",
        "output",
        "timing",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "measurement" => self.measurement = value.parse()?,
            "m-ratio" => self.m_ratio = Some(parse(key, value)?),
            "masks" | "l" | "L" => self.masks = Some(parse(key, value)?),
            "ranks" => {
                self.ranks = value
                    .split([',', 'x'])
                    .map(|r| parse(key, r.trim()))
                    .collect::<Result<_>>()?
            }
            "iters" | "t" | "T" => self.iters = parse(key, value)?,
            "rwf-iters" | "t-rwf" => self.rwf_iters = parse(key, value)?,
            "rwf-step" => self.rwf_step = parse(key, value)?,
            "cgls-iters" | "t-cgls" => self.cgls_iters = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "lambda" => {
                self.lambda = match value {
                    "amplitude" | "paper" => LambdaConvention::Amplitude,
                    "intensity" => LambdaConvention::Intensity,
                    _ => return Err(Error::Config(format!("invalid lambda convention '{value}'"))),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "correction" => self.correction = parse_bool(key, value)?,
            "input" => self.input = Some(value.into()),
            "measurements" => self.measurements = Some(value.into()),
            "output" => self.output = Some(value.into()),
            "timing" => self.timing = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    /// Checks the sensing parameters only.
    pub fn validate_sensing(&self) -> Result<()> {
        match self.measurement {
            MeasurementKind::Cdp => match self.masks {
                Some(l) if l >= 1 => {}
                _ => return Err(Error::Config("cdp measurements need masks (L) >= 1".into())),
            },
            _ => match self.m_ratio {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return Err(Error::Config("gaussian measurements need m-ratio > 0".into())),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_sensing()?;
        let arity = match self.algorithm {
            Algorithm::Tspr => 3,
            _ => 1,
        };
        if self.ranks.len() != arity {
            return Err(Error::Config(format!(
                "{} needs {arity} rank(s), got {}",
                self.algorithm,
                self.ranks.len()
            )));
        }
        if self.ranks.contains(&0) {
            return Err(Error::Config("ranks must be positive".into()));
        }
        if self.cgls_iters == 0 {
            return Err(Error::Config("cgls-iters must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(self.rwf_step > 0.0 && self.rwf_step.is_finite()) {
            return Err(Error::Config("rwf-step must be positive".into()));
        }
        Ok(())
    }

    /// Measurements per frame for frames of length `n`.
    pub fn measurements_per_frame(&self, n: usize) -> Result<usize> {
        self.validate_sensing()?;
        Ok(match self.measurement {
            MeasurementKind::Cdp => self.masks.unwrap() * n,
            _ => ((self.m_ratio.unwrap() * n as f64).round() as usize).max(1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tspr_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.apply_str("ranks = 4,4,3\nm-ratio = 0.5").unwrap();
        c
    }

    #[test]
    fn key_value_text_with_comments_and_aliases() {
        let mut c = ExperimentConfig::default();
        c.apply_str("# sweep\nalgorithm = altminlowrap\nmeasurement=cdp\nL = 2 # masks\nranks = 5\nT = 7\nt-rwf = 3\ncorrection = yes\n")
            .unwrap();
        assert_eq!(c.algorithm, Algorithm::AltMinLowRaP);
        assert_eq!(c.measurement, MeasurementKind::Cdp);
        assert_eq!((c.masks, c.iters, c.rwf_iters), (Some(2), 7, 3));
        assert!(c.correction);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::default();
        assert!(matches!(c.apply_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(c.apply_str("no equals sign"), Err(Error::Config(_))));
        assert!(matches!(c.set("seed", "-3"), Err(Error::Config(_))));
        assert!(matches!(c.set("algorithm", "gd"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rules() {
        tspr_cfg().validate().unwrap();
        let mut c = tspr_cfg();
        c.ranks = vec![4];
        assert!(c.validate().is_err());
        let mut c = tspr_cfg();
        c.measurement = MeasurementKind::Cdp;
        assert!(c.validate().is_err());
        let mut c = tspr_cfg();
        c.m_ratio = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn measurement_counts() {
        let mut c = tspr_cfg();
        c.m_ratio = Some(0.25);
        assert_eq!(c.measurements_per_frame(3200).unwrap(), 800);
        c.m_ratio = Some(0.75);
        assert_eq!(c.measurements_per_frame(3200).unwrap(), 2400);
        c.measurement = MeasurementKind::Cdp;
        c.masks = Some(2);
        assert_eq!(c.measurements_per_frame(2200).unwrap(), 4400);
    }
}
