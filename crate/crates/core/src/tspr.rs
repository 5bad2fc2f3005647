//! Tucker-structured phase retrieval.
//!
//! The image stack is modelled as `X = G ×1 D ×2 E ×3 F`, so frame `k` is
//! `x_k = vec(D G_k E^T)` with the mixed core `G_k = Σ_t F[k,t] G[:,:,t]`.
//! Initialization stacks per-frame truncated spectral estimates and runs a
//! truncated HOSVD. Each outer iteration then
//!
//! 1. refits every row `f_k` of `F` by phase retrieval on the `r3`-dimensional
//!    effective sampling vectors,
//! 2. refreshes the measurement phases `C_k`,
//! 3. solves the phase-fixed least-squares problem
//!    `Σ_k ||C_k y_k - A_k^* x_k||²` for `D`, `E` and the core in turn, each
//!    with warm-started CGLS.
//!
//! None of the Kronecker products `(f_k ⊗ E ⊗ D)` are ever formed; every
//! factor update acts through small per-frame matrix products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::{phased_objective, solve_factor, update_phases, FrameLift, PhaseState};
use crate::error::{ensure_dims, Error, Result};
use crate::linop::{CglsConfig, LinearMap};
use crate::lowrank::frame_inits;
use crate::measurement::{FrameOp, MeasurementEnsemble};
use crate::pr_base::{rwf_whitened, RwfConfig, SpectralInitConfig};
use crate::tensor::{hosvd, matricize, CMat, CVec, ComplexTensor3, TuckerFactors};

/// Factor blocks solved by CGLS inside an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    D,
    E,
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsprConfig {
    pub ranks: (usize, usize, usize),
    /// Outer iterations `T`.
    pub iters: usize,
    pub rwf: RwfConfig,
    pub cgls: CglsConfig,
    /// Spectral initialization, including the trimming threshold `alpha`.
    pub spectral: SpectralInitConfig,
    pub block_order: [Block; 3],
}

impl TsprConfig {
    pub fn new(ranks: (usize, usize, usize)) -> Self {
        Self {
            ranks,
            iters: 20,
            rwf: RwfConfig::default(),
            cgls: CglsConfig::default(),
            spectral: SpectralInitConfig::default(),
            block_order: [Block::D, Block::E, Block::Core],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TsprState {
    pub factors: TuckerFactors,
    pub phases: PhaseState,
    /// Phase-fixed objective after initialization and after every
    /// completed outer iteration.
    pub objective_trace: Vec<f64>,
}

fn check_ranks(dims: (usize, usize, usize), ranks: (usize, usize, usize)) -> Result<()> {
    let (n1, n2, q) = dims;
    let (r1, r2, r3) = ranks;
    if r1 == 0 || r2 == 0 || r3 == 0 || r1 > n1 || r2 > n2 || r3 > q {
        return Err(Error::InvalidArgument(format!(
            "Tucker ranks ({r1},{r2},{r3}) must be positive and within ({n1},{n2},{q})"
        )));
    }
    Ok(())
}

fn check_ensemble(ensemble: &MeasurementEnsemble, dims: (usize, usize, usize)) -> Result<()> {
    ensemble.require_observations()?;
    ensure_dims!(
        dims.0 * dims.1 == ensemble.n() && dims.2 == ensemble.q(),
        "dims {:?} do not match ensemble (n={}, q={})",
        dims,
        ensemble.n(),
        ensemble.q()
    );
    Ok(())
}

/// Stack of per-frame truncated spectral estimates reshaped to `n1 x n2`.
pub fn init_tensor(ensemble: &MeasurementEnsemble, dims: (usize, usize, usize), cfg: &SpectralInitConfig) -> Result<ComplexTensor3> {
    check_ensemble(ensemble, dims)?;
    ComplexTensor3::from_frames(dims.0, dims.1, &frame_inits(ensemble, cfg)?)
}

/// Initial Tucker factors: HOSVD of the spectral-estimate stack.
pub fn tspr_init(
    ensemble: &MeasurementEnsemble,
    dims: (usize, usize, usize),
    ranks: (usize, usize, usize),
    cfg: &SpectralInitConfig,
) -> Result<TuckerFactors> {
    check_ranks(dims, ranks)?;
    hosvd(&init_tensor(ensemble, dims, cfg)?, ranks)
}

/// `x_k = (f_k ⊗ E ⊗ D) vec(G)`, computed as `vec(D G_k E^T)`.
pub fn frame_from_factors(factors: &TuckerFactors, k: usize) -> Result<CVec> {
    let q = factors.f.nrows();
    if k >= q {
        return Err(Error::InvalidArgument(format!("frame index {k} out of range for q={q}")));
    }
    Ok(factors.frame(k))
}

fn all_frames(factors: &TuckerFactors) -> Vec<CVec> {
    (0..factors.f.nrows()).into_par_iter().map(|k| factors.frame(k)).collect()
}

/// Columns `vec(D G[:,:,t] E^T)`, `t = 1..r3`: the `n x r3` matrix
/// `(E ⊗ D) M_3(G)^T` mapping `f_k` to `x_k`.
pub fn temporal_basis(factors: &TuckerFactors) -> CMat {
    let et = factors.e.transpose();
    let cols: Vec<CVec> = (0..factors.ranks().2)
        .map(|t| {
            let x = &factors.d * factors.core.frame(t) * &et;
            CVec::from_column_slice(x.as_slice())
        })
        .collect();
    CMat::from_columns(&cols)
}

/// The effective sampling vector `conj(M_3(G)) (E ⊗ D)^* a` for a single
/// `a`, computed as `conj(M_3(G)) vec(D^* mat(a) conj(E))`, so that
/// `<a, x_k> = <w, f_k>`.
pub fn effective_vector(factors: &TuckerFactors, a: &CVec) -> Result<CVec> {
    let (n1, n2, _) = factors.dims();
    ensure_dims!(a.len() == n1 * n2, "sampling vector has length {}, expected {}", a.len(), n1 * n2);
    let amat = CMat::from_column_slice(n1, n2, a.as_slice());
    let proj = factors.d.adjoint() * amat * factors.e.conjugate();
    let g3 = matricize(&factors.core, 3)?;
    Ok(g3.conjugate() * CVec::from_column_slice(proj.as_slice()))
}

/// Rows `w_{i,k}^*` of the effective `m x r3` sampling matrix of frame `k`.
pub fn effective_rows(op: &FrameOp, basis: &CMat) -> CMat {
    let cols: Vec<CVec> = basis.column_iter().map(|c| op.forward(&c.into_owned())).collect();
    CMat::from_columns(&cols)
}

/// Refits every row of `F` by RWF on the effective vectors, warm-started at
/// the current row.
pub fn update_f(ensemble: &MeasurementEnsemble, factors: &TuckerFactors, cfg: &RwfConfig) -> Result<CMat> {
    ensemble.require_observations()?;
    let basis = temporal_basis(factors);
    let rows: Vec<CVec> = (0..ensemble.q())
        .into_par_iter()
        .map(|k| {
            let eff = effective_rows(&ensemble.ops[k], &basis);
            let f0 = factors.f.row(k).transpose();
            rwf_whitened(&ensemble.observations[k], &eff, &f0, cfg)
        })
        .collect::<Result<_>>()?;
    let r3 = factors.ranks().2;
    Ok(CMat::from_fn(ensemble.q(), r3, |k, t| rows[k][t]))
}

pub fn update_phases_tspr(ensemble: &MeasurementEnsemble, factors: &TuckerFactors) -> Result<PhaseState> {
    update_phases(ensemble, &all_frames(factors))
}

/// `vec(D) ↦ vec(D S_k)` with `S_k = G_k E^T = M_1(G) (f_k ⊗ E)^T`.
pub struct DLift {
    n1: usize,
    r1: usize,
    s: Vec<CMat>,
}

impl DLift {
    pub fn new(factors: &TuckerFactors) -> Self {
        let et = factors.e.transpose();
        let s = (0..factors.f.nrows()).map(|k| factors.mixed_core(k) * &et).collect();
        Self {
            n1: factors.d.nrows(),
            r1: factors.d.ncols(),
            s,
        }
    }

    pub fn s(&self, k: usize) -> &CMat {
        &self.s[k]
    }
}

impl FrameLift for DLift {
    fn param_dim(&self) -> usize {
        self.n1 * self.r1
    }
    fn frame_dim(&self) -> usize {
        self.n1 * self.s[0].ncols()
    }
    fn num_frames(&self) -> usize {
        self.s.len()
    }
    fn lift(&self, k: usize, p: &CVec) -> CVec {
        let d = CMat::from_column_slice(self.n1, self.r1, p.as_slice());
        let x = d * &self.s[k];
        CVec::from_column_slice(x.as_slice())
    }
    fn lift_adjoint(&self, k: usize, x: &CVec) -> CVec {
        let z = CMat::from_column_slice(self.n1, self.s[k].ncols(), x.as_slice());
        let g = z * self.s[k].adjoint();
        CVec::from_column_slice(g.as_slice())
    }
}

/// `vec(E) ↦ vec((E V_k)^T)` with `V_k = (D G_k)^T = M_2(G) (f_k ⊗ D)^T`.
pub struct ELift {
    n1: usize,
    n2: usize,
    r2: usize,
    v: Vec<CMat>,
}

impl ELift {
    pub fn new(factors: &TuckerFactors) -> Self {
        let v = (0..factors.f.nrows())
            .map(|k| (&factors.d * factors.mixed_core(k)).transpose())
            .collect();
        Self {
            n1: factors.d.nrows(),
            n2: factors.e.nrows(),
            r2: factors.e.ncols(),
            v,
        }
    }

    pub fn v(&self, k: usize) -> &CMat {
        &self.v[k]
    }
}

impl FrameLift for ELift {
    fn param_dim(&self) -> usize {
        self.n2 * self.r2
    }
    fn frame_dim(&self) -> usize {
        self.n1 * self.n2
    }
    fn num_frames(&self) -> usize {
        self.v.len()
    }
    fn lift(&self, k: usize, p: &CVec) -> CVec {
        let e = CMat::from_column_slice(self.n2, self.r2, p.as_slice());
        let x = (e * &self.v[k]).transpose();
        CVec::from_column_slice(x.as_slice())
    }
    fn lift_adjoint(&self, k: usize, x: &CVec) -> CVec {
        let z = CMat::from_column_slice(self.n1, self.n2, x.as_slice());
        let g = z.transpose() * self.v[k].adjoint();
        CVec::from_column_slice(g.as_slice())
    }
}

/// `vec(G) ↦ vec(D G_k E^T) = (f_k ⊗ E ⊗ D) vec(G)`.
pub struct CoreLift<'a> {
    d: &'a CMat,
    e: &'a CMat,
    f: &'a CMat,
    et: CMat,
    e_conj: CMat,
    d_adj: CMat,
}

impl<'a> CoreLift<'a> {
    pub fn new(factors: &'a TuckerFactors) -> Self {
        Self {
            d: &factors.d,
            e: &factors.e,
            f: &factors.f,
            et: factors.e.transpose(),
            e_conj: factors.e.conjugate(),
            d_adj: factors.d.adjoint(),
        }
    }

    fn ranks(&self) -> (usize, usize, usize) {
        (self.d.ncols(), self.e.ncols(), self.f.ncols())
    }
}

impl FrameLift for CoreLift<'_> {
    fn param_dim(&self) -> usize {
        let (r1, r2, r3) = self.ranks();
        r1 * r2 * r3
    }
    fn frame_dim(&self) -> usize {
        self.d.nrows() * self.e.nrows()
    }
    fn num_frames(&self) -> usize {
        self.f.nrows()
    }
    fn lift(&self, k: usize, p: &CVec) -> CVec {
        let (r1, r2, r3) = self.ranks();
        let slab = r1 * r2;
        let mut g = CMat::zeros(r1, r2);
        for t in 0..r3 {
            let gt = CMat::from_column_slice(r1, r2, &p.as_slice()[t * slab..(t + 1) * slab]);
            g += gt * self.f[(k, t)];
        }
        let x = self.d * g * &self.et;
        CVec::from_column_slice(x.as_slice())
    }
    fn lift_adjoint(&self, k: usize, x: &CVec) -> CVec {
        let (r1, r2, r3) = self.ranks();
        let z = CMat::from_column_slice(self.d.nrows(), self.e.nrows(), x.as_slice());
        let h = &self.d_adj * z * &self.e_conj;
        let mut out = CVec::zeros(r1 * r2 * r3);
        for t in 0..r3 {
            let w = self.f[(k, t)].conj();
            for (o, hv) in out.as_mut_slice()[t * r1 * r2..(t + 1) * r1 * r2].iter_mut().zip(h.iter()) {
                *o = hv * w;
            }
        }
        out
    }
}

pub fn update_d(ensemble: &MeasurementEnsemble, phases: &PhaseState, factors: &TuckerFactors, cfg: &CglsConfig) -> Result<CMat> {
    let p0 = CVec::from_column_slice(factors.d.as_slice());
    let p = solve_factor(ensemble, phases, DLift::new(factors), &p0, cfg)?;
    Ok(CMat::from_column_slice(factors.d.nrows(), factors.d.ncols(), p.as_slice()))
}

pub fn update_e(ensemble: &MeasurementEnsemble, phases: &PhaseState, factors: &TuckerFactors, cfg: &CglsConfig) -> Result<CMat> {
    let p0 = CVec::from_column_slice(factors.e.as_slice());
    let p = solve_factor(ensemble, phases, ELift::new(factors), &p0, cfg)?;
    Ok(CMat::from_column_slice(factors.e.nrows(), factors.e.ncols(), p.as_slice()))
}

pub fn update_g(
    ensemble: &MeasurementEnsemble,
    phases: &PhaseState,
    factors: &TuckerFactors,
    cfg: &CglsConfig,
) -> Result<ComplexTensor3> {
    let p0 = CVec::from_column_slice(factors.core.as_slice());
    let p = solve_factor(ensemble, phases, CoreLift::new(factors), &p0, cfg)?;
    ComplexTensor3::new(factors.ranks(), p.as_slice().to_vec())
}

/// Phase-fixed objective `Σ_k ||C_k y_k - A_k^* x_k||²` at `factors`.
pub fn objective(ensemble: &MeasurementEnsemble, phases: &PhaseState, factors: &TuckerFactors) -> f64 {
    phased_objective(ensemble, phases, &all_frames(factors))
}

/// Runs the alternating minimization from the given factors.
pub fn tspr_from(ensemble: &MeasurementEnsemble, factors: TuckerFactors, cfg: &TsprConfig) -> Result<(ComplexTensor3, TsprState)> {
    factors.validate()?;
    check_ensemble(ensemble, factors.dims())?;
    let mut factors = factors;
    let mut phases = update_phases_tspr(ensemble, &factors)?;
    let mut trace = vec![finite(objective(ensemble, &phases, &factors), 0)?];

    for it in 1..=cfg.iters {
        factors.f = update_f(ensemble, &factors, &cfg.rwf)?;
        phases = update_phases_tspr(ensemble, &factors)?;
        for block in cfg.block_order {
            match block {
                Block::D => factors.d = update_d(ensemble, &phases, &factors, &cfg.cgls)?,
                Block::E => factors.e = update_e(ensemble, &phases, &factors, &cfg.cgls)?,
                Block::Core => factors.core = update_g(ensemble, &phases, &factors, &cfg.cgls)?,
            }
        }
        trace.push(finite(objective(ensemble, &phases, &factors), it)?);
    }

    let xhat = factors.reconstruct()?;
    Ok((
        xhat,
        TsprState {
            factors,
            phases,
            objective_trace: trace,
        },
    ))
}

/// Spectral initialization followed by `cfg.iters` outer iterations.
pub fn tspr_run(ensemble: &MeasurementEnsemble, dims: (usize, usize, usize), cfg: &TsprConfig) -> Result<(ComplexTensor3, TsprState)> {
    let init = tspr_init(ensemble, dims, cfg.ranks, &cfg.spectral)?;
    tspr_from(ensemble, init, cfg)
}

fn finite(v: f64, iter: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("TSPR objective became non-finite at outer iteration {iter}")))
    }
}
