//! Single-signal phase retrieval building blocks: power iteration,
//! truncated spectral initialization and Reshaped Wirtinger Flow (RWF).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Result};
use crate::linop::{DenseMap, LinearMap};
use crate::rng::{self, Domain};
use crate::tensor::{CMat, CVec, C64};

/// How the per-frame scale `λ` is estimated from the observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaConvention {
    /// `λ = sqrt(mean(y))`.
    #[default]
    #[serde(alias = "paper")]
    Amplitude,
    /// `λ = sqrt(mean(y²))`, the usual truncated-Wirtinger-flow estimate.
    Intensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralInitConfig {
    /// Trimming threshold; `f64::INFINITY` disables truncation.
    pub alpha: f64,
    pub power_iters: usize,
    pub power_tol: f64,
    pub lambda: LambdaConvention,
    /// Seeds the random start vectors of the power iterations.
    pub seed: u64,
}

impl Default for SpectralInitConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            power_iters: 200,
            power_tol: 1e-6,
            lambda: LambdaConvention::Amplitude,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwfConfig {
    pub iters: usize,
    pub step: f64,
}

impl Default for RwfConfig {
    fn default() -> Self {
        Self { iters: 25, step: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct Eigvec {
    pub vector: CVec,
    /// Rayleigh quotient `z^* Y z` at the returned vector.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The operator annihilated the iterate; `vector` is the random start.
    pub degenerate: bool,
}

/// Leading eigenvector of a Hermitian PSD operator by power iteration from
/// the seeded random start `stream_id`.
pub fn leading_eigvec(
    apply: impl Fn(&CVec) -> CVec,
    dim: usize,
    cfg: &SpectralInitConfig,
    stream_id: u64,
) -> Eigvec {
    let mut rng = rng::stream(cfg.seed, Domain::PowerStart, stream_id, 0);
    let mut z = rng::complex_normal_vec(&mut rng, dim);
    z.unscale_mut(z.norm());

    let mut value = 0.0;
    for it in 0..cfg.power_iters.max(1) {
        let w = apply(&z);
        let wn = w.norm();
        if wn == 0.0 || !wn.is_finite() {
            return Eigvec {
                vector: z,
                value: 0.0,
                iterations: it,
                converged: false,
                degenerate: true,
            };
        }
        value = z.dotc(&w).re;
        let resid = (&w - &z * C64::from(value)).norm();
        if resid <= cfg.power_tol * value.abs() {
            return Eigvec {
                vector: z,
                value,
                iterations: it,
                converged: true,
                degenerate: false,
            };
        }
        z = w.unscale(wn);
    }
    Eigvec {
        vector: z,
        value,
        iterations: cfg.power_iters,
        converged: false,
        degenerate: false,
    }
}

#[derive(Debug, Clone)]
pub struct FrameInit {
    pub x: CVec,
    pub lambda: f64,
    /// Number of measurements that survived truncation.
    pub retained: usize,
    pub degenerate: bool,
}

pub fn lambda_estimate(y: &DVector<f64>, convention: LambdaConvention) -> f64 {
    let m = y.len() as f64;
    match convention {
        LambdaConvention::Amplitude => (y.sum() / m).sqrt(),
        LambdaConvention::Intensity => (y.norm_squared() / m).sqrt(),
    }
}

/// Truncation weights `y_i² 1{y_i² <= α² λ²}`.
pub fn truncation_weights(y: &DVector<f64>, alpha: f64, lambda: f64) -> DVector<f64> {
    let bound = if alpha.is_infinite() {
        f64::INFINITY
    } else {
        alpha * alpha * lambda * lambda
    };
    y.map(|v| {
        let v2 = v * v;
        if v2 <= bound {
            v2
        } else {
            0.0
        }
    })
}

/// `Y v = Σ_i w_i a_i (a_i^* v)` applied through the sensing map.
pub fn weighted_gram_apply<M: LinearMap + ?Sized>(op: &M, weights: &DVector<f64>, v: &CVec) -> CVec {
    let mut z = op.forward(v);
    for (zi, &w) in z.iter_mut().zip(weights.iter()) {
        *zi *= w;
    }
    op.adjoint(&z)
}

/// Truncated spectral estimate of one signal from its magnitudes.
pub fn twf_init_frame<M: LinearMap + ?Sized>(
    y: &DVector<f64>,
    op: &M,
    row_norms_sq: &[f64],
    cfg: &SpectralInitConfig,
    stream_id: u64,
) -> Result<FrameInit> {
    let m = y.len();
    let n = op.in_dim();
    ensure_dims!(m == op.out_dim(), "{m} observations for an operator with {} outputs", op.out_dim());
    ensure_dims!(row_norms_sq.len() == m, "{} row norms for {m} observations", row_norms_sq.len());

    let lambda = lambda_estimate(y, cfg.lambda);
    let weights = truncation_weights(y, cfg.alpha, lambda);
    let retained = weights.iter().filter(|&&w| w > 0.0).count();
    let eig = leading_eigvec(|v| weighted_gram_apply(op, &weights, v), n, cfg, stream_id);

    let total: f64 = row_norms_sq.iter().sum();
    let scale = if total > 0.0 {
        ((m * n) as f64 / total).sqrt() * lambda
    } else {
        0.0
    };
    let z = if op.is_real() { real_line(&eig.vector) } else { eig.vector };
    Ok(FrameInit {
        x: z * C64::from(scale),
        lambda,
        retained,
        degenerate: eig.degenerate || retained == 0,
    })
}

/// Rotates `x` by the global phase that makes it closest to real, then drops
/// the imaginary part.
pub fn real_line(x: &CVec) -> CVec {
    let s: C64 = x.iter().map(|z| z * z).sum();
    let rot = C64::from_polar(1.0, -0.5 * s.arg());
    x.map(|z| C64::from((z * rot).re))
}

/// One RWF step `x ← x - (step/m) Σ_i (<a_i,x> - y_i phase(<a_i,x>)) a_i`.
pub fn rwf_step<M: LinearMap + ?Sized>(y: &DVector<f64>, op: &M, x: &mut CVec, step: f64) {
    let mut r = op.forward(x);
    for (ri, &yi) in r.iter_mut().zip(y.iter()) {
        // c - y phase(c) written as c (1 - y/|c|): exactly zero when y == |c|
        let a = ri.norm();
        *ri = if a > 0.0 { *ri * (1.0 - yi / a) } else { C64::from(-yi) };
    }
    let g = op.adjoint(&r);
    x.axpy(C64::from(-step / y.len() as f64), &g, C64::from(1.0));
}

/// Reshaped Wirtinger Flow warm-started at `x0`.
pub fn rwf<M: LinearMap + ?Sized>(y: &DVector<f64>, op: &M, x0: &CVec, cfg: &RwfConfig) -> Result<CVec> {
    ensure_dims!(y.len() == op.out_dim(), "{} observations for an operator with {} outputs", y.len(), op.out_dim());
    ensure_dims!(x0.len() == op.in_dim(), "start has length {}, operator expects {}", x0.len(), op.in_dim());
    // With real sensing the imaginary direction is flat to second order, so
    // any imaginary residue would never decay; iterate on the real line.
    let mut x = if op.is_real() { real_line(x0) } else { x0.clone() };
    for _ in 0..cfg.iters {
        rwf_step(y, op, &mut x, cfg.step);
    }
    Ok(x)
}

/// Amplitude loss `(1/2m) Σ (|<a_i,x>| - y_i)²`.
pub fn amplitude_loss<M: LinearMap + ?Sized>(y: &DVector<f64>, op: &M, x: &CVec) -> f64 {
    let z = op.forward(x);
    z.iter().zip(y.iter()).map(|(zi, yi)| (zi.norm() - yi).powi(2)).sum::<f64>() / (2.0 * y.len() as f64)
}

/// RWF on a small explicit sampling matrix (rows `w_i^*`) after whitening
/// the sample covariance `(1/m) W^* W`.
///
/// Runs [`rwf`] in the coordinates `g = Σ^{1/2} x`, where the sampling
/// vectors have identity sample covariance and the fixed step is stable,
/// then maps back. Directions with covariance below `1e-10 · λ_max` are
/// left untouched.
pub fn rwf_whitened(y: &DVector<f64>, rows: &CMat, x0: &CVec, cfg: &RwfConfig) -> Result<CVec> {
    let m = rows.nrows();
    let r = rows.ncols();
    ensure_dims!(y.len() == m, "{} observations for {m} sampling vectors", y.len());
    ensure_dims!(x0.len() == r, "start has length {}, expected {r}", x0.len());
    if cfg.iters == 0 {
        return Ok(x0.clone());
    }
    let cov = rows.ad_mul(rows).unscale(m as f64);
    let eig = cov.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Ok(x0.clone());
    }
    let floor = lmax * 1e-10;
    let v = &eig.eigenvectors;
    let sq: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(floor).sqrt()).collect();
    let diag = |f: &dyn Fn(f64) -> f64| CMat::from_diagonal(&CVec::from_iterator(r, sq.iter().map(|&s| C64::from(f(s)))));
    let half = v * diag(&|s| s) * v.adjoint();
    let inv_half = v * diag(&|s| 1.0 / s) * v.adjoint();

    let whitened = DenseMap::new(rows * &inv_half);
    let g = rwf(y, &whitened, &(&half * x0), cfg)?;
    Ok(inv_half * g)
}
