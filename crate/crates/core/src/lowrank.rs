//! Unstructured low-rank phase retrieval baselines (AltMinLowRaP and
//! AltMinTrunc) for `X = U B^*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::{phased_objective, solve_factor, update_phases as phases_from_frames, FrameLift, PhaseState};
use crate::error::{ensure_dims, Error, Result};
use crate::linop::{CglsConfig, DenseMap, LinearMap};
use crate::measurement::{FrameOp, MeasurementEnsemble};
use crate::pr_base::{rwf_whitened, truncation_weights, twf_init_frame, RwfConfig, SpectralInitConfig};
use crate::rng::{self, Domain};
use crate::tensor::{leading_left_singular_vectors, CMat, CVec, ComplexTensor3, C64};

/// `U` (`n x r`) and the coefficient vectors `b_k`, stored as the columns
/// of the `r x q` matrix `coeffs` so that `x_k = U b_k` and `B = coeffs^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub u: CMat,
    pub coeffs: CMat,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// The `q x r` factor `B` with `X = U B^*`.
    pub fn b(&self) -> CMat {
        self.coeffs.adjoint()
    }

    pub fn frame(&self, k: usize) -> CVec {
        &self.u * self.coeffs.column(k)
    }

    pub fn frames(&self) -> Vec<CVec> {
        (0..self.coeffs.ncols()).map(|k| self.frame(k)).collect()
    }

    /// `X = U B^*` as an `n x q` matrix.
    pub fn matrix(&self) -> CMat {
        &self.u * &self.coeffs
    }

    pub fn to_tensor(&self, n1: usize, n2: usize) -> Result<ComplexTensor3> {
        ComplexTensor3::from_frames(n1, n2, &self.frames())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankConfig {
    pub rank: usize,
    pub iters: usize,
    pub rwf: RwfConfig,
    pub cgls: CglsConfig,
    pub spectral: SpectralInitConfig,
    /// Re-orthonormalize `U` (absorbing `R` into the coefficients) after
    /// every `U` update.
    pub reorthonormalize: bool,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            iters: 20,
            rwf: RwfConfig::default(),
            cgls: CglsConfig::default(),
            spectral: SpectralInitConfig::default(),
            reorthonormalize: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubspaceInit {
    pub u: CMat,
    pub iterations: usize,
    pub degenerate: bool,
}

/// Applies the truncated surrogate `Y = (1/mq) Σ_{i,k} w_{ik} a_{ik} a_{ik}^*`
/// to every column of `v`.
fn surrogate_apply(ops: &[FrameOp], weights: &[nalgebra::DVector<f64>], scale: f64, v: &CMat) -> CMat {
    let parts: Vec<CMat> = ops
        .par_iter()
        .zip(weights.par_iter())
        .map(|(op, w)| {
            let cols: Vec<CVec> = v
                .column_iter()
                .map(|c| {
                    let mut z = op.forward(&c.into_owned());
                    for (zi, &wi) in z.iter_mut().zip(w.iter()) {
                        *zi *= wi;
                    }
                    op.adjoint(&z)
                })
                .collect();
            CMat::from_columns(&cols)
        })
        .collect();
    let mut acc = CMat::zeros(v.nrows(), v.ncols());
    for p in parts {
        acc += p;
    }
    acc * C64::from(scale)
}

/// Top-`r` eigenvectors of the truncated surrogate matrix by orthogonal
/// iteration from a seeded random start.
pub fn init_u(ensemble: &MeasurementEnsemble, r: usize, cfg: &SpectralInitConfig) -> Result<SubspaceInit> {
    ensemble.require_observations()?;
    let (n, m, q) = (ensemble.n(), ensemble.m(), ensemble.q());
    if r == 0 || r > n.min(q) {
        return Err(Error::InvalidArgument(format!("rank {r} must be in 1..=min(n={n}, q={q})")));
    }
    let mq = (m * q) as f64;
    let total: f64 = ensemble.observations.iter().map(|y| y.norm_squared()).sum();
    // y² <= (α²/mq) Σ y²  is the same test as  y² <= α² λ²  with λ² = Σ y² / mq
    let lambda = (total / mq).sqrt();
    let weights: Vec<_> = ensemble
        .observations
        .iter()
        .map(|y| truncation_weights(y, cfg.alpha, lambda))
        .collect();
    let retained = weights.iter().flat_map(|w| w.iter()).filter(|&&w| w > 0.0).count();

    let mut srng = rng::stream(cfg.seed, Domain::SubspaceStart, 0, 0);
    let mut u = rng::orthonormal(&mut srng, n, r);
    if retained == 0 {
        return Ok(SubspaceInit {
            u,
            iterations: 0,
            degenerate: true,
        });
    }
    for it in 0..cfg.power_iters.max(1) {
        let w = surrogate_apply(&ensemble.ops, &weights, 1.0 / mq, &u);
        if w.norm() == 0.0 || !w.norm().is_finite() {
            return Ok(SubspaceInit {
                u,
                iterations: it,
                degenerate: true,
            });
        }
        let next = w.qr().q();
        let change = (&next - &u * u.ad_mul(&next)).norm();
        u = next;
        if change <= cfg.power_tol {
            return Ok(SubspaceInit {
                u,
                iterations: it + 1,
                degenerate: false,
            });
        }
    }
    Ok(SubspaceInit {
        u,
        iterations: cfg.power_iters,
        degenerate: false,
    })
}

/// Rows `(U^* a_{i,k})^*` of the effective `r`-dimensional sampling matrix.
pub fn effective_rows(op: &FrameOp, u: &CMat) -> CMat {
    let cols: Vec<CVec> = u.column_iter().map(|c| op.forward(&c.into_owned())).collect();
    CMat::from_columns(&cols)
}

/// Same effective vectors computed one at a time as `U^* a_{i,k}` from the
/// dense sensing matrix (oracle for [`effective_rows`]).
pub fn effective_vectors_explicit(op: &FrameOp, u: &CMat) -> CMat {
    let rows = op.to_dense();
    let m = rows.nrows();
    let cols: Vec<CVec> = (0..m).map(|i| u.ad_mul(&rows.row(i).adjoint())).collect();
    CMat::from_columns(&cols).adjoint()
}

/// Initial coefficients by an `r`-dimensional truncated spectral estimate.
pub fn init_coeffs(ensemble: &MeasurementEnsemble, u: &CMat, cfg: &SpectralInitConfig) -> Result<CMat> {
    ensemble.require_observations()?;
    let cols: Vec<CVec> = (0..ensemble.q())
        .into_par_iter()
        .map(|k| {
            let rows = effective_rows(&ensemble.ops[k], u);
            let norms: Vec<f64> = rows.row_iter().map(|r| r.norm_squared()).collect();
            let eff = DenseMap::new(rows);
            twf_init_frame(&ensemble.observations[k], &eff, &norms, cfg, 1_000_000 + k as u64).map(|i| i.x)
        })
        .collect::<Result<_>>()?;
    Ok(CMat::from_columns(&cols))
}

/// Per-frame RWF on the coefficient vectors, warm-started at `coeffs_prev`.
pub fn update_b(ensemble: &MeasurementEnsemble, u: &CMat, coeffs_prev: &CMat, cfg: &RwfConfig) -> Result<CMat> {
    ensemble.require_observations()?;
    ensure_dims!(u.nrows() == ensemble.n(), "U has {} rows, frames have length {}", u.nrows(), ensemble.n());
    ensure_dims!(
        coeffs_prev.shape() == (u.ncols(), ensemble.q()),
        "coefficients have shape {:?}, expected ({}, {})",
        coeffs_prev.shape(),
        u.ncols(),
        ensemble.q()
    );
    let cols: Vec<CVec> = (0..ensemble.q())
        .into_par_iter()
        .map(|k| {
            let rows = effective_rows(&ensemble.ops[k], u);
            rwf_whitened(&ensemble.observations[k], &rows, &coeffs_prev.column(k).into_owned(), cfg)
        })
        .collect::<Result<_>>()?;
    Ok(CMat::from_columns(&cols))
}

/// Phases of `A_k^* U b_k`.
pub fn update_phases(ensemble: &MeasurementEnsemble, frames: &[CVec]) -> Result<PhaseState> {
    phases_from_frames(ensemble, frames)
}

/// `vec(U) ↦ U b_k`.
pub struct ULift<'a> {
    pub n: usize,
    pub coeffs: &'a CMat,
}

impl FrameLift for ULift<'_> {
    fn param_dim(&self) -> usize {
        self.n * self.coeffs.nrows()
    }
    fn frame_dim(&self) -> usize {
        self.n
    }
    fn num_frames(&self) -> usize {
        self.coeffs.ncols()
    }
    fn lift(&self, k: usize, p: &CVec) -> CVec {
        let u = CMat::from_column_slice(self.n, self.coeffs.nrows(), p.as_slice());
        u * self.coeffs.column(k)
    }
    fn lift_adjoint(&self, k: usize, x: &CVec) -> CVec {
        let g = x * self.coeffs.column(k).adjoint();
        CVec::from_column_slice(g.as_slice())
    }
}

/// Least-squares update of `U` with phases and coefficients held fixed.
pub fn update_u(
    ensemble: &MeasurementEnsemble,
    phases: &PhaseState,
    coeffs: &CMat,
    u_prev: &CMat,
    cfg: &CglsConfig,
) -> Result<CMat> {
    let n = ensemble.n();
    ensure_dims!(u_prev.shape() == (n, coeffs.nrows()), "U has shape {:?}, expected ({n}, {})", u_prev.shape(), coeffs.nrows());
    let p0 = CVec::from_column_slice(u_prev.as_slice());
    let p = solve_factor(ensemble, phases, ULift { n, coeffs }, &p0, cfg)?;
    Ok(CMat::from_column_slice(n, coeffs.nrows(), p.as_slice()))
}

#[derive(Debug, Clone)]
pub struct LowRankOutput {
    pub factors: LowRankFactors,
    pub phases: PhaseState,
    /// Phase-fixed objective after initialization and after every outer
    /// iteration.
    pub objective_trace: Vec<f64>,
}

fn check_finite(obj: f64, iter: usize) -> Result<f64> {
    if obj.is_finite() {
        Ok(obj)
    } else {
        Err(Error::Numerical(format!("objective became non-finite at outer iteration {iter}")))
    }
}

fn alternate(ensemble: &MeasurementEnsemble, mut factors: LowRankFactors, cfg: &LowRankConfig) -> Result<LowRankOutput> {
    let mut phases = update_phases(ensemble, &factors.frames())?;
    let mut trace = vec![check_finite(phased_objective(ensemble, &phases, &factors.frames()), 0)?];
    for it in 1..=cfg.iters {
        factors.coeffs = update_b(ensemble, &factors.u, &factors.coeffs, &cfg.rwf)?;
        phases = update_phases(ensemble, &factors.frames())?;
        factors.u = update_u(ensemble, &phases, &factors.coeffs, &factors.u, &cfg.cgls)?;
        if cfg.reorthonormalize {
            let qr = factors.u.clone().qr();
            factors.coeffs = qr.r() * &factors.coeffs;
            factors.u = qr.q();
        }
        trace.push(check_finite(phased_objective(ensemble, &phases, &factors.frames()), it)?);
    }
    Ok(LowRankOutput {
        factors,
        phases,
        objective_trace: trace,
    })
}

/// AltMinLowRaP: truncated surrogate spectral init of `U`, spectral init of
/// each `b_k`, then `T` rounds of {B by RWF, phases, U by CGLS}.
pub fn altmin_lowrap(ensemble: &MeasurementEnsemble, cfg: &LowRankConfig) -> Result<LowRankOutput> {
    let init = init_u(ensemble, cfg.rank, &cfg.spectral)?;
    let coeffs = init_coeffs(ensemble, &init.u, &cfg.spectral)?;
    alternate(ensemble, LowRankFactors { u: init.u, coeffs }, cfg)
}

/// AltMinTrunc: per-frame truncated spectral estimates, rank-`r` truncated
/// SVD of their stack, then the same alternating loop.
pub fn altmin_trunc(ensemble: &MeasurementEnsemble, cfg: &LowRankConfig) -> Result<LowRankOutput> {
    ensemble.require_observations()?;
    let (n, q) = (ensemble.n(), ensemble.q());
    if cfg.rank == 0 || cfg.rank > n.min(q) {
        return Err(Error::InvalidArgument(format!("rank {} must be in 1..=min(n={n}, q={q})", cfg.rank)));
    }
    let x0 = CMat::from_columns(&frame_inits(ensemble, &cfg.spectral)?);
    let u = leading_left_singular_vectors(&x0, cfg.rank);
    let coeffs = u.ad_mul(&x0);
    alternate(ensemble, LowRankFactors { u, coeffs }, cfg)
}

/// Truncated spectral estimate of every frame on its own.
pub fn frame_inits(ensemble: &MeasurementEnsemble, cfg: &SpectralInitConfig) -> Result<Vec<CVec>> {
    ensemble.require_observations()?;
    (0..ensemble.q())
        .into_par_iter()
        .map(|k| {
            let op = &ensemble.ops[k];
            twf_init_frame(&ensemble.observations[k], op, &op.row_norms_sq(), cfg, k as u64).map(|i| i.x)
        })
        .collect()
}
