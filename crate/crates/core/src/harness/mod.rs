//! Experiment driver: frame-stack files, image export and end-to-end runs.

mod config;
mod experiment;
mod pgm;
mod stack;
mod synth;

pub use config::{Algorithm, ExperimentConfig};
pub use experiment::{
    model_size, reconstruct, run_experiment, simulate, ExperimentOutcome, MeasurementFile, Status, REPORT_HEADER,
};
pub use pgm::{export_frames, export_pgm, pgm_bytes, PgmRange};
pub use stack::{export, ingest, Dtype, FrameStack};
pub use synth::{synth, synth_factors};
