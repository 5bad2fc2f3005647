pub mod error;
pub mod linop;
pub mod rng;
pub mod tensor;
pub mod measurement;
pub mod pr_base;
pub mod altmin;
pub mod lowrank;
pub mod metrics;
pub mod tspr;
pub mod harness;
