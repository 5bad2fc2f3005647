use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tspr::error::Error;
use tspr::harness::{self, export_frames, ingest, run_experiment, simulate, ExperimentConfig, FrameStack, MeasurementFile, Status};
use tspr::metrics::mat_dist;

/// Phase retrieval of image sequences with Tucker-structured and low-rank models.
#[derive(Parser)]
#[command(name = "tspr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an exactly Tucker-rank frame stack.
    Synth {
        /// Frame stack shape n1,n2,q.
        #[arg(long)]
        dims: String,
        /// Tucker ranks r1,r2,r3.
        #[arg(long)]
        ranks: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Simulate measurements of the input stack into <output>/measurements.json.
    Simulate(ExperimentArgs),
    /// Run a full experiment: simulate (or load) measurements, reconstruct,
    /// evaluate against the input and write the report and artifacts.
    Reconstruct(ExperimentArgs),
    /// Compare an estimate against a reference stack.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
    /// Write |frames| of a stack as PGM images.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Flags mirror the key = value config keys; flags override the file.
#[derive(Args)]
struct ExperimentArgs {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// tspr, altminlowrap or altmintrunc.
    #[arg(long)]
    algorithm: Option<String>,
    /// real-gaussian, complex-gaussian or cdp.
    #[arg(long)]
    measurement: Option<String>,
    #[arg(long)]
    m_ratio: Option<String>,
    /// Number of CDP masks L.
    #[arg(long, visible_alias = "l")]
    masks: Option<String>,
    /// Comma-separated ranks (three for tspr).
    #[arg(long)]
    ranks: Option<String>,
    /// Outer iterations T.
    #[arg(long, visible_alias = "t")]
    iters: Option<String>,
    #[arg(long, visible_alias = "t-rwf")]
    rwf_iters: Option<String>,
    #[arg(long)]
    rwf_step: Option<String>,
    #[arg(long, visible_alias = "t-cgls")]
    cgls_iters: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// amplitude or intensity.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    correction: Option<String>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    measurements: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Record wall-clock time in the report.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    timing: Option<String>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("algorithm", &self.algorithm),
            ("measurement", &self.measurement),
            ("m-ratio", &self.m_ratio),
            ("masks", &self.masks),
            ("ranks", &self.ranks),
            ("iters", &self.iters),
            ("rwf-iters", &self.rwf_iters),
            ("rwf-step", &self.rwf_step),
            ("cgls-iters", &self.cgls_iters),
            ("alpha", &self.alpha),
            ("lambda", &self.lambda),
            ("seed", &self.seed),
            ("correction", &self.correction),
            ("input", &self.input),
            ("measurements", &self.measurements),
            ("output", &self.output),
            ("timing", &self.timing),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn triple(name: &str, s: &str) -> Result<(usize, usize, usize), Error> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("invalid {name} '{s}'"))))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Config(format!("{name} needs three comma-separated values, got '{s}'"))),
    }
}

fn required<'a>(cfg: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf, Error> {
    cfg.as_ref().ok_or_else(|| Error::Config(format!("--{what} is required")))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth { dims, ranks, seed, output } => {
            let x = harness::synth(triple("dims", &dims)?, triple("ranks", &ranks)?, seed)
                .map_err(|e| Error::Config(e.to_string()))?;
            FrameStack::complex(x.clone()).write(&output)?;
            println!("wrote {}: mat-dist to self {}", output.display(), mat_dist(&x, &x)?);
        }
        Command::Simulate(args) => {
            let cfg = args.config()?;
            cfg.validate_sensing()?;
            let truth = ingest(required(&cfg.input, "input")?)?;
            let ensemble = simulate(&cfg, &truth)?;
            let (n1, n2, _) = truth.dims();
            let dir = required(&cfg.output, "output")?;
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = dir.join("measurements.json");
            MeasurementFile::from_ensemble(&ensemble, n1, n2)?.write(&path)?;
            println!("wrote {} (m = {} per frame)", path.display(), ensemble.m());
        }
        Command::Reconstruct(args) => {
            let cfg = args.config()?;
            let outcome = run_experiment(&cfg)?;
            println!("{}", harness::REPORT_HEADER);
            println!("{}", outcome.csv_row(&cfg));
            if let Status::NumericalAbort(msg) = &outcome.status {
                eprintln!("numerical abort: {msg}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Evaluate { truth, estimate } => {
            let truth = ingest(&truth)?;
            let estimate = ingest(&estimate)?;
            let dist = mat_dist(&estimate, &truth)?;
            let norm = truth.norm();
            println!("mat_dist,relative_error");
            println!("{dist},{}", if norm > 0.0 { dist / norm } else { dist });
        }
        Command::Render { input, output } => {
            let stack = ingest(&input)?;
            let ranges = export_frames(&stack, &output)?;
            println!("wrote {} frames to {}", ranges.len(), output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
