//! Pieces shared by the matrix and Tucker alternating minimizations:
//! measurement phases, the phase-fixed objective and the stacked
//! least-squares operator used for every CGLS factor update.

use rayon::prelude::*;

use crate::error::{ensure_dims, Result};
use crate::linop::{cgls, CglsConfig, LinearMap};
use crate::measurement::{phase, FrameOp, MeasurementEnsemble};
use crate::tensor::{CVec, ZERO};

/// Diagonals `c_k` of the phase matrices `C_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub c: Vec<CVec>,
}

/// `c_k[i] = phase(<a_{i,k}, x_k>)`.
pub fn update_phases(ensemble: &MeasurementEnsemble, frames: &[CVec]) -> Result<PhaseState> {
    ensure_dims!(frames.len() == ensemble.q(), "{} frames for {} operators", frames.len(), ensemble.q());
    let c = ensemble
        .ops
        .par_iter()
        .zip(frames.par_iter())
        .map(|(op, x)| op.forward(x).map(phase))
        .collect();
    Ok(PhaseState { c })
}

/// Target vectors `C_k y_k`.
pub fn phased_targets(ensemble: &MeasurementEnsemble, phases: &PhaseState) -> Vec<CVec> {
    phases
        .c
        .iter()
        .zip(&ensemble.observations)
        .map(|(c, y)| c.zip_map(y, |ci, yi| ci * yi))
        .collect()
}

/// `Σ_k ||C_k y_k - A_k^* x_k||²`.
pub fn phased_objective(ensemble: &MeasurementEnsemble, phases: &PhaseState, frames: &[CVec]) -> f64 {
    let terms: Vec<f64> = (0..ensemble.q())
        .into_par_iter()
        .map(|k| {
            let ax = ensemble.ops[k].forward(&frames[k]);
            ax.iter()
                .zip(phases.c[k].iter().zip(ensemble.observations[k].iter()))
                .map(|(a, (c, &y))| (c * y - a).norm_sqr())
                .sum()
        })
        .collect();
    terms.iter().sum()
}

/// A linear parametrization `p ↦ x_k` of every frame by one factor.
pub trait FrameLift: Send + Sync {
    fn param_dim(&self) -> usize;
    fn frame_dim(&self) -> usize;
    fn num_frames(&self) -> usize;
    /// `x_k` as a function of the vectorized factor.
    fn lift(&self, k: usize, p: &CVec) -> CVec;
    /// Adjoint of [`FrameLift::lift`].
    fn lift_adjoint(&self, k: usize, x: &CVec) -> CVec;
}

/// `p ↦ [A_1^* lift_1(p); ...; A_q^* lift_q(p)]`.
pub struct FactorMap<'a, L> {
    ops: &'a [FrameOp],
    lift: L,
    offsets: Vec<usize>,
}

impl<'a, L: FrameLift> FactorMap<'a, L> {
    pub fn new(ops: &'a [FrameOp], lift: L) -> Result<Self> {
        ensure_dims!(ops.len() == lift.num_frames(), "{} operators for {} frames", ops.len(), lift.num_frames());
        let mut offsets = vec![0];
        for (k, op) in ops.iter().enumerate() {
            ensure_dims!(
                op.in_dim() == lift.frame_dim(),
                "operator {k} expects {} inputs, frames have {}",
                op.in_dim(),
                lift.frame_dim()
            );
            offsets.push(offsets[k] + op.out_dim());
        }
        Ok(Self { ops, lift, offsets })
    }

    pub fn lift(&self) -> &L {
        &self.lift
    }
}

impl<L: FrameLift> LinearMap for FactorMap<'_, L> {
    fn in_dim(&self) -> usize {
        self.lift.param_dim()
    }
    fn out_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn forward(&self, p: &CVec) -> CVec {
        let parts: Vec<CVec> = (0..self.ops.len())
            .into_par_iter()
            .map(|k| self.ops[k].forward(&self.lift.lift(k, p)))
            .collect();
        let mut out = CVec::zeros(self.out_dim());
        for (k, part) in parts.iter().enumerate() {
            out.rows_mut(self.offsets[k], part.len()).copy_from(part);
        }
        out
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        let parts: Vec<CVec> = (0..self.ops.len())
            .into_par_iter()
            .map(|k| {
                let len = self.offsets[k + 1] - self.offsets[k];
                let slice = y.rows(self.offsets[k], len).into_owned();
                self.lift.lift_adjoint(k, &self.ops[k].adjoint(&slice))
            })
            .collect();
        let mut acc = CVec::from_element(self.in_dim(), ZERO);
        for p in parts {
            acc += p;
        }
        acc
    }
}

/// Stacked right-hand side `[C_1 y_1; ...; C_q y_q]`.
pub fn stacked_targets(ensemble: &MeasurementEnsemble, phases: &PhaseState) -> CVec {
    let parts = phased_targets(ensemble, phases);
    let total = parts.iter().map(|p| p.len()).sum();
    let mut out = CVec::zeros(total);
    let mut off = 0;
    for p in parts {
        out.rows_mut(off, p.len()).copy_from(&p);
        off += p.len();
    }
    out
}

/// Minimizes `Σ_k ||C_k y_k - A_k^* lift_k(p)||²` over `p` with CGLS,
/// warm-started at `p0`.
pub fn solve_factor<L: FrameLift>(
    ensemble: &MeasurementEnsemble,
    phases: &PhaseState,
    lift: L,
    p0: &CVec,
    cfg: &CglsConfig,
) -> Result<CVec> {
    ensemble.require_observations()?;
    let map = FactorMap::new(&ensemble.ops, lift)?;
    let b = stacked_targets(ensemble, phases);
    cgls(&map, &b, p0, cfg)
}
