//! Phase-invariant distances, parameter counts and model correction.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Result};
use crate::measurement::MeasurementEnsemble;
use crate::pr_base::{rwf, RwfConfig};
use crate::tensor::{CVec, ComplexTensor3, C64};

/// `min_φ ||x - e^{jφ} x̂||`, in closed form:
/// `dist² = ||x||² + ||x̂||² - 2|<x̂, x>|`.
pub fn frame_dist(xhat: &[C64], x: &[C64]) -> Result<f64> {
    ensure_dims!(xhat.len() == x.len(), "frame lengths differ: {} vs {}", xhat.len(), x.len());
    let mut nx = 0.0;
    let mut nh = 0.0;
    let mut inner = C64::new(0.0, 0.0);
    for (h, t) in xhat.iter().zip(x) {
        nx += t.norm_sqr();
        nh += h.norm_sqr();
        inner += h.conj() * t;
    }
    Ok((nx + nh - 2.0 * inner.norm()).max(0.0).sqrt())
}

/// Per-frame distances between two stacks of equal shape.
pub fn per_frame_dist(xhat: &ComplexTensor3, x: &ComplexTensor3) -> Result<Vec<f64>> {
    ensure_dims!(xhat.dims() == x.dims(), "stack shapes differ: {:?} vs {:?}", xhat.dims(), x.dims());
    (0..x.dims().2)
        .map(|k| frame_dist(xhat.frame_slice(k), x.frame_slice(k)))
        .collect()
}

/// `sqrt(Σ_k dist²(x̂_k, x_k))`.
pub fn mat_dist(xhat: &ComplexTensor3, x: &ComplexTensor3) -> Result<f64> {
    Ok(per_frame_dist(xhat, x)?.iter().map(|d| d * d).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSize {
    Tucker {
        n1: usize,
        n2: usize,
        q: usize,
        r1: usize,
        r2: usize,
        r3: usize,
    },
    Matrix {
        n: usize,
        q: usize,
        r: usize,
    },
}

/// Number of unknowns in the factorized model.
pub fn param_count(model: ModelSize) -> usize {
    match model {
        ModelSize::Tucker { n1, n2, q, r1, r2, r3 } => r1 * r2 * r3 + n1 * r1 + n2 * r2 + q * r3,
        ModelSize::Matrix { n, q, r } => (n + q) * r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mat_dist: f64,
    pub per_frame_dist: Vec<f64>,
    /// `mat_dist / ||X||_F`.
    pub relative_error: f64,
    pub param_count: usize,
    pub wall_time: f64,
    pub objective_trace: Vec<f64>,
}

impl ReconstructionReport {
    pub fn evaluate(
        xhat: &ComplexTensor3,
        truth: &ComplexTensor3,
        param_count: usize,
        wall_time: f64,
        objective_trace: Vec<f64>,
    ) -> Result<Self> {
        let per_frame_dist = per_frame_dist(xhat, truth)?;
        let mat_dist = per_frame_dist.iter().map(|d| d * d).sum::<f64>().sqrt();
        let norm = truth.norm();
        let relative_error = if norm > 0.0 { mat_dist / norm } else { mat_dist };
        Ok(Self {
            mat_dist,
            per_frame_dist,
            relative_error,
            param_count,
            wall_time,
            objective_trace,
        })
    }
}

/// Refines every frame of `xhat` with RWF warm-started at that frame.
///
/// Only expected to help when `m >= n`; a warning is logged otherwise.
pub fn model_correct(ensemble: &MeasurementEnsemble, xhat: &ComplexTensor3, cfg: &RwfConfig) -> Result<ComplexTensor3> {
    ensemble.require_observations()?;
    let (n1, n2, q) = xhat.dims();
    ensure_dims!(
        q == ensemble.q() && n1 * n2 == ensemble.n(),
        "estimate {n1}x{n2}x{q} does not match ensemble n={} q={}",
        ensemble.n(),
        ensemble.q()
    );
    if ensemble.m() < ensemble.n() {
        warn!(
            "model correction in the under-determined regime (m={} < n={}) is not expected to help",
            ensemble.m(),
            ensemble.n()
        );
    }
    let frames: Vec<CVec> = (0..q)
        .into_par_iter()
        .map(|k| rwf(&ensemble.observations[k], &ensemble.ops[k], &xhat.frame_vec(k), cfg))
        .collect::<Result<_>>()?;
    ComplexTensor3::from_frames(n1, n2, &frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[(f64, f64)]) -> Vec<C64> {
        xs.iter().map(|&(a, b)| C64::new(a, b)).collect()
    }

    #[test]
    fn frame_dist_is_phase_invariant() {
        let x = v(&[(1.0, 2.0), (-0.5, 0.25), (3.0, 0.0)]);
        let rot = C64::from_polar(1.0, 1.234);
        let xh: Vec<C64> = x.iter().map(|z| z * rot).collect();
        assert!(frame_dist(&xh, &x).unwrap() < 1e-7);
    }

    #[test]
    fn collinear_and_orthogonal_cases() {
        let x = v(&[(1.0, 0.0), (0.0, 1.0)]);
        let x2: Vec<C64> = x.iter().map(|z| z * 2.0).collect();
        let nx = 2.0f64.sqrt();
        assert!((frame_dist(&x2, &x).unwrap() - nx).abs() < 1e-12);

        let a = v(&[(1.0, 0.0), (0.0, 0.0)]);
        let b = v(&[(0.0, 0.0), (0.0, 3.0)]);
        assert!((frame_dist(&a, &b).unwrap() - 10.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frame_dist_rejects_length_mismatch() {
        assert!(frame_dist(&v(&[(1.0, 0.0)]), &v(&[(1.0, 0.0), (0.0, 0.0)])).is_err());
    }

    #[test]
    fn orthogonal_unit_frames_against_zero() {
        let x = ComplexTensor3::new((2, 1, 2), v(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)])).unwrap();
        let z = ComplexTensor3::zeros((2, 1, 2));
        assert!((mat_dist(&z, &x).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_parameter_counts() {
        let t = |n1, n2, q, r1, r2, r3| param_count(ModelSize::Tucker { n1, n2, q, r1, r2, r3 });
        let m = |n, q, r| param_count(ModelSize::Matrix { n, q, r });
        assert_eq!(t(40, 80, 90, 20, 25, 5), 5750);
        assert_eq!(m(3200, 90, 5), 16450);
        assert_eq!(t(40, 55, 90, 15, 20, 10), 5600);
    }
}
