//! End-to-end experiment: simulate, reconstruct, correct, evaluate, persist.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::pgm::export_frames;
use super::stack::{export, ingest};
use crate::error::{Error, Result};
use crate::linop::CglsConfig;
use crate::lowrank::{altmin_lowrap, altmin_trunc, LowRankConfig};
use crate::measurement::{MeasurementEnsemble, RVec, SensingSpec};
use crate::metrics::{model_correct, param_count, ModelSize, ReconstructionReport};
use crate::pr_base::{RwfConfig, SpectralInitConfig};
use crate::tensor::ComplexTensor3;
use crate::tspr::{tspr_run, TsprConfig};

/// Report CSV header; one row per experiment follows.
pub const REPORT_HEADER: &str = "algorithm,measurement,n1,n2,q,m,ranks,params,T,T_rwf,T_cgls,alpha,seed,mat_dist,relative_error,wall_time_s,status";

/// Observations plus what is needed to regenerate their sensing operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub spec: SensingSpec,
    pub n1: usize,
    pub n2: usize,
    pub observations: Vec<Vec<f64>>,
}

impl MeasurementFile {
    pub fn from_ensemble(ensemble: &MeasurementEnsemble, n1: usize, n2: usize) -> Result<Self> {
        ensemble.require_observations()?;
        Ok(Self {
            spec: ensemble.spec,
            n1,
            n2,
            observations: ensemble.observations.iter().map(|y| y.as_slice().to_vec()).collect(),
        })
    }

    /// Rebuilds the operators from the spec and attaches the observations.
    pub fn to_ensemble(&self) -> Result<MeasurementEnsemble> {
        if self.n1 * self.n2 != self.spec.n {
            return Err(Error::Config(format!(
                "measurement file frame shape {}x{} does not match n={}",
                self.n1, self.n2, self.spec.n
            )));
        }
        let ys = self.observations.iter().map(|y| RVec::from_vec(y.clone())).collect();
        self.spec.build()?.with_observations(ys)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Simulates the configured measurements of `truth`.
pub fn simulate(cfg: &ExperimentConfig, truth: &ComplexTensor3) -> Result<MeasurementEnsemble> {
    let (n1, n2, q) = truth.dims();
    let n = n1 * n2;
    let spec = SensingSpec {
        kind: cfg.measurement,
        n,
        m: cfg.measurements_per_frame(n)?,
        q,
        seed: cfg.seed,
    };
    let mut ensemble = spec.build()?;
    ensemble.observe(truth)?;
    Ok(ensemble)
}

fn spectral(cfg: &ExperimentConfig) -> SpectralInitConfig {
    SpectralInitConfig {
        alpha: cfg.alpha,
        lambda: cfg.lambda,
        seed: cfg.seed,
        ..Default::default()
    }
}

fn rwf(cfg: &ExperimentConfig) -> RwfConfig {
    RwfConfig {
        iters: cfg.rwf_iters,
        step: cfg.rwf_step,
    }
}

pub fn model_size(cfg: &ExperimentConfig, dims: (usize, usize, usize)) -> ModelSize {
    let (n1, n2, q) = dims;
    match cfg.algorithm {
        Algorithm::Tspr => ModelSize::Tucker {
            n1,
            n2,
            q,
            r1: cfg.ranks[0],
            r2: cfg.ranks[1],
            r3: cfg.ranks[2],
        },
        _ => ModelSize::Matrix {
            n: n1 * n2,
            q,
            r: cfg.ranks[0],
        },
    }
}

/// Runs the configured algorithm; returns the estimate and objective trace.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    ensemble: &MeasurementEnsemble,
    dims: (usize, usize, usize),
) -> Result<(ComplexTensor3, Vec<f64>)> {
    cfg.validate()?;
    let cgls = CglsConfig {
        max_iters: cfg.cgls_iters,
        ..Default::default()
    };
    match cfg.algorithm {
        Algorithm::Tspr => {
            let tcfg = TsprConfig {
                iters: cfg.iters,
                rwf: rwf(cfg),
                cgls,
                spectral: spectral(cfg),
                ..TsprConfig::new((cfg.ranks[0], cfg.ranks[1], cfg.ranks[2]))
            };
            let (xhat, state) = tspr_run(ensemble, dims, &tcfg)?;
            Ok((xhat, state.objective_trace))
        }
        Algorithm::AltMinLowRaP | Algorithm::AltMinTrunc => {
            let lcfg = LowRankConfig {
                rank: cfg.ranks[0],
                iters: cfg.iters,
                rwf: rwf(cfg),
                cgls,
                spectral: spectral(cfg),
                ..Default::default()
            };
            let out = if cfg.algorithm == Algorithm::AltMinLowRaP {
                altmin_lowrap(ensemble, &lcfg)?
            } else {
                altmin_trunc(ensemble, &lcfg)?
            };
            Ok((out.factors.to_tensor(dims.0, dims.1)?, out.objective_trace))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    NumericalAbort(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NumericalAbort(_) => "numerical-abort",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub status: Status,
    pub dims: (usize, usize, usize),
    pub m: usize,
    pub params: usize,
    /// Present unless the run aborted.
    pub report: Option<ReconstructionReport>,
    pub estimate: Option<ComplexTensor3>,
    /// Files written under the output directory.
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// The report row matching [`REPORT_HEADER`].
    pub fn csv_row(&self, cfg: &ExperimentConfig) -> String {
        let (n1, n2, q) = self.dims;
        let ranks: Vec<String> = cfg.ranks.iter().map(|r| r.to_string()).collect();
        let (dist, rel, wall) = match &self.report {
            Some(r) => (
                r.mat_dist.to_string(),
                r.relative_error.to_string(),
                if cfg.timing { r.wall_time.to_string() } else { String::new() },
            ),
            None => Default::default(),
        };
        format!(
            "{},{},{n1},{n2},{q},{},{},{},{},{},{},{},{},{dist},{rel},{wall},{}",
            cfg.algorithm,
            cfg.measurement,
            self.m,
            ranks.join("x"),
            self.params,
            cfg.iters,
            cfg.rwf_iters,
            cfg.cgls_iters,
            cfg.alpha,
            cfg.seed,
            self.status.label()
        )
    }
}

fn write_file(path: PathBuf, contents: &[u8], artifacts: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    artifacts.push(path);
    Ok(())
}

/// Simulates measurements of the `input` stack (or loads `measurements`),
/// reconstructs, optionally applies model correction, and evaluates against
/// the input. When `output` is set, writes `report.csv`, `trace.csv`,
/// `reconstruction.lrpr` and `frames/` (PGM images with a `range.csv`
/// sidecar).
///
/// A numerical abort inside the algorithm is not an error: it is returned
/// (and written) with [`Status::NumericalAbort`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("an input frame stack is required".into()))?;
    let truth = ingest(input)?;
    let dims = truth.dims();
    let ensemble = match &cfg.measurements {
        Some(path) => {
            let file = MeasurementFile::read(path)?;
            if (file.n1, file.n2, file.spec.q) != dims {
                return Err(Error::Config(format!(
                    "measurements are for {}x{}x{} frames, input is {:?}",
                    file.n1, file.n2, file.spec.q, dims
                )));
            }
            file.to_ensemble()?
        }
        None => simulate(cfg, &truth)?,
    };
    let params = param_count(model_size(cfg, dims));
    info!(
        "{} on {} measurements: dims {:?}, m = {}, {} parameters",
        cfg.algorithm,
        cfg.measurement,
        dims,
        ensemble.m(),
        params
    );

    let start = Instant::now();
    let result = reconstruct(cfg, &ensemble, dims).and_then(|(xhat, trace)| {
        if !cfg.correction {
            return Ok((xhat, trace));
        }
        let corrected = model_correct(&ensemble, &xhat, &rwf(cfg))?;
        if corrected.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("model correction produced non-finite values".into()));
        }
        Ok((corrected, trace))
    });
    let wall = start.elapsed().as_secs_f64();

    let mut outcome = ExperimentOutcome {
        status: Status::Ok,
        dims,
        m: ensemble.m(),
        params,
        report: None,
        estimate: None,
        artifacts: Vec::new(),
    };
    let mut trace = Vec::new();
    match result {
        Ok((xhat, t)) => {
            outcome.report = Some(ReconstructionReport::evaluate(&xhat, &truth, params, wall, t.clone())?);
            outcome.estimate = Some(xhat);
            trace = t;
        }
        Err(Error::Numerical(msg)) => {
            warn!("numerical abort: {msg}");
            outcome.status = Status::NumericalAbort(msg);
        }
        Err(e) => return Err(e),
    }

    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut artifacts = Vec::new();
        let report = format!("{REPORT_HEADER}\n{}\n", outcome.csv_row(cfg));
        write_file(dir.join("report.csv"), report.as_bytes(), &mut artifacts)?;
        let mut tr = String::from("iteration,objective\n");
        for (i, v) in trace.iter().enumerate() {
            writeln!(tr, "{i},{v}").unwrap();
        }
        write_file(dir.join("trace.csv"), tr.as_bytes(), &mut artifacts)?;
        if let Some(xhat) = &outcome.estimate {
            let path = dir.join("reconstruction.lrpr");
            export(xhat, &path)?;
            artifacts.push(path);
            let frames = dir.join("frames");
            export_frames(xhat, &frames)?;
            for k in 0..dims.2 {
                artifacts.push(frames.join(format!("frame_{k:04}.pgm")));
            }
            artifacts.push(frames.join("range.csv"));
        }
        outcome.artifacts = artifacts;
    }
    Ok(outcome)
}
