//! Magnitude-only measurement models: real/complex Gaussian and coded
//! diffraction patterns (CDP).
//!
//! Observations are magnitudes `y_k = |A_k^* x_k|`, never intensities.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linop::{DenseMap, LinearMap};
use crate::rng::{self, Domain};
use crate::tensor::{CMat, CVec, ComplexTensor3, C64, ONE, ZERO};

pub type RVec = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    RealGaussian,
    ComplexGaussian,
    Cdp,
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementKind::RealGaussian => "real-gaussian",
            MeasurementKind::ComplexGaussian => "complex-gaussian",
            MeasurementKind::Cdp => "cdp",
        })
    }
}

impl FromStr for MeasurementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real-gaussian" => Ok(Self::RealGaussian),
            "complex-gaussian" => Ok(Self::ComplexGaussian),
            "cdp" => Ok(Self::Cdp),
            other => Err(Error::Config(format!(
                "unknown measurement '{other}' (expected real-gaussian, complex-gaussian or cdp)"
            ))),
        }
    }
}

/// The four admissible CDP mask values `{1, -1, j, -j}`.
pub const MASK_VALUES: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(0.0, -1.0),
];

/// `L` diagonal masks for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CdpMasks {
    pub masks: Vec<Vec<C64>>,
    pub dft_size: usize,
}

impl CdpMasks {
    /// Masks for frame `k`; mask `l` comes from its own `(seed, k, l)` stream.
    pub fn random(seed: u64, k: usize, n: usize, l: usize) -> Self {
        let masks = (0..l)
            .map(|li| {
                let mut rng = rng::stream(seed, Domain::Mask, k as u64, li as u64);
                (0..n).map(|_| MASK_VALUES[rng.random_range(0..4)]).collect()
            })
            .collect();
        Self { masks, dft_size: n }
    }
}

/// `x ↦ [F̃ (M_1 ⊙ x); ...; F̃ (M_L ⊙ x)]` with the unnormalized DFT `F̃`.
#[derive(Clone)]
pub struct CdpMap {
    masks: CdpMasks,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CdpMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdpMap").field("masks", &self.masks).finish()
    }
}

impl CdpMap {
    pub fn new(masks: CdpMasks) -> Result<Self> {
        let n = masks.dft_size;
        if n == 0 || masks.masks.is_empty() {
            return Err(Error::InvalidArgument("CDP needs n >= 1 and L >= 1".into()));
        }
        for m in &masks.masks {
            ensure_dims!(m.len() == n, "mask length {} differs from DFT size {n}", m.len());
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Self { masks, fft, ifft })
    }

    pub fn masks(&self) -> &CdpMasks {
        &self.masks
    }

    pub fn num_masks(&self) -> usize {
        self.masks.masks.len()
    }

    /// Explicit `Ln x n` matrix; for tests and small problems only.
    pub fn to_dense(&self) -> CMat {
        let n = self.masks.dft_size;
        let l = self.num_masks();
        let w = -2.0 * std::f64::consts::PI / n as f64;
        CMat::from_fn(l * n, n, |row, col| {
            let (li, freq) = (row / n, row % n);
            let phase = w * ((freq * col) % n) as f64;
            C64::from_polar(1.0, phase) * self.masks.masks[li][col]
        })
    }
}

impl LinearMap for CdpMap {
    fn in_dim(&self) -> usize {
        self.masks.dft_size
    }
    fn out_dim(&self) -> usize {
        self.masks.dft_size * self.num_masks()
    }
    fn forward(&self, x: &CVec) -> CVec {
        let n = self.masks.dft_size;
        let mut out = Vec::with_capacity(self.out_dim());
        let mut buf = vec![ZERO; n];
        for mask in &self.masks.masks {
            for ((b, &m), &xi) in buf.iter_mut().zip(mask).zip(x.iter()) {
                *b = m * xi;
            }
            self.fft.process(&mut buf);
            out.extend_from_slice(&buf);
        }
        CVec::from_vec(out)
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        let n = self.masks.dft_size;
        let mut acc = CVec::zeros(n);
        let mut buf = vec![ZERO; n];
        for (li, mask) in self.masks.masks.iter().enumerate() {
            buf.copy_from_slice(&y.as_slice()[li * n..(li + 1) * n]);
            // rustfft's inverse is unnormalized, i.e. exactly F̃^*
            self.ifft.process(&mut buf);
            for ((a, &m), &b) in acc.iter_mut().zip(mask).zip(&buf) {
                *a += m.conj() * b;
            }
        }
        acc
    }
}

/// Per-frame sensing operator `x ↦ A_k^* x`.
#[derive(Debug, Clone)]
pub enum FrameOp {
    /// Rows are `a_{i,k}^*`.
    Dense(DenseMap),
    Cdp(CdpMap),
}

impl FrameOp {
    /// `||a_{i,k}||²` for every measurement row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        match self {
            FrameOp::Dense(d) => d
                .matrix
                .row_iter()
                .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
                .collect(),
            // unit-modulus masks times unit-modulus DFT entries
            FrameOp::Cdp(c) => vec![c.in_dim() as f64; c.out_dim()],
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            FrameOp::Dense(d) => d.matrix.clone(),
            FrameOp::Cdp(c) => c.to_dense(),
        }
    }
}

impl LinearMap for FrameOp {
    fn in_dim(&self) -> usize {
        match self {
            FrameOp::Dense(d) => d.in_dim(),
            FrameOp::Cdp(c) => c.in_dim(),
        }
    }
    fn out_dim(&self) -> usize {
        match self {
            FrameOp::Dense(d) => d.out_dim(),
            FrameOp::Cdp(c) => c.out_dim(),
        }
    }
    fn forward(&self, x: &CVec) -> CVec {
        match self {
            FrameOp::Dense(d) => d.forward(x),
            FrameOp::Cdp(c) => c.forward(x),
        }
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        match self {
            FrameOp::Dense(d) => d.adjoint(y),
            FrameOp::Cdp(c) => c.adjoint(y),
        }
    }
    fn is_real(&self) -> bool {
        match self {
            FrameOp::Dense(d) => d.is_real(),
            FrameOp::Cdp(_) => false,
        }
    }
}

/// Everything needed to regenerate an ensemble's operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub kind: MeasurementKind,
    /// Frame length `n = n1 * n2`.
    pub n: usize,
    /// Measurements per frame.
    pub m: usize,
    pub q: usize,
    pub seed: u64,
}

impl SensingSpec {
    pub fn build(&self) -> Result<MeasurementEnsemble> {
        match self.kind {
            MeasurementKind::RealGaussian => gen_gaussian(self.n, self.m, self.q, false, self.seed),
            MeasurementKind::ComplexGaussian => gen_gaussian(self.n, self.m, self.q, true, self.seed),
            MeasurementKind::Cdp => {
                if self.m % self.n != 0 {
                    return Err(Error::Config(format!(
                        "CDP needs m to be a multiple of n, got m={} n={}",
                        self.m, self.n
                    )));
                }
                gen_cdp(self.n, self.m / self.n, self.q, self.seed)
            }
        }
    }
}

/// Sensing operators for every frame plus (optionally) their observations.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    pub spec: SensingSpec,
    pub ops: Vec<FrameOp>,
    /// `y_k`, empty until [`MeasurementEnsemble::observe`] is called.
    pub observations: Vec<RVec>,
}

impl MeasurementEnsemble {
    pub fn kind(&self) -> MeasurementKind {
        self.spec.kind
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn m(&self) -> usize {
        self.spec.m
    }
    pub fn q(&self) -> usize {
        self.ops.len()
    }

    pub fn has_observations(&self) -> bool {
        self.observations.len() == self.ops.len()
    }

    pub fn require_observations(&self) -> Result<()> {
        if !self.has_observations() {
            return Err(Error::InvalidArgument("ensemble has no observations".into()));
        }
        Ok(())
    }

    /// Simulates `y_k = |A_k^* vec(X_k)|` for every frame of `x`.
    pub fn observe(&mut self, x: &ComplexTensor3) -> Result<()> {
        let frames = x.frames();
        self.observations = observe(&self.ops, &frames)?;
        Ok(())
    }

    pub fn with_observations(mut self, observations: Vec<RVec>) -> Result<Self> {
        ensure_dims!(
            observations.len() == self.ops.len(),
            "{} observation vectors for {} frames",
            observations.len(),
            self.ops.len()
        );
        for (k, y) in observations.iter().enumerate() {
            ensure_dims!(y.len() == self.m(), "observation {k} has length {}, expected {}", y.len(), self.m());
            if y.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidArgument(format!("observation {k} has negative or NaN entries")));
            }
        }
        self.observations = observations;
        Ok(self)
    }
}

fn validate_sizes(n: usize, m: usize, q: usize) -> Result<()> {
    if n == 0 || m == 0 || q == 0 {
        return Err(Error::InvalidArgument(format!("n, m, q must be positive (got {n}, {m}, {q})")));
    }
    Ok(())
}

/// `q` independent Gaussian sensing matrices with i.i.d. columns
/// `a_{i,k} ~ N(0, I)` or `CN(0, I)`.
pub fn gen_gaussian(n: usize, m: usize, q: usize, complex: bool, seed: u64) -> Result<MeasurementEnsemble> {
    validate_sizes(n, m, q)?;
    let ops = (0..q)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, Domain::Sensing, k as u64, 0);
            // draw A_k column by column (column i is a_{i,k}), store A_k^*
            let mut rows = CMat::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    let a = if complex {
                        rng::complex_normal(&mut rng)
                    } else {
                        rng::real_normal(&mut rng)
                    };
                    rows[(i, j)] = a.conj();
                }
            }
            FrameOp::Dense(DenseMap::new(rows))
        })
        .collect();
    let kind = if complex {
        MeasurementKind::ComplexGaussian
    } else {
        MeasurementKind::RealGaussian
    };
    Ok(MeasurementEnsemble {
        spec: SensingSpec { kind, n, m, q, seed },
        ops,
        observations: Vec::new(),
    })
}

/// CDP operators with `L` independent random masks per frame.
pub fn gen_cdp(n: usize, l: usize, q: usize, seed: u64) -> Result<MeasurementEnsemble> {
    validate_sizes(n, l, q)?;
    let ops = (0..q)
        .map(|k| {
            CdpMap::new(CdpMasks::random(seed, k, n, l)).map(FrameOp::Cdp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementEnsemble {
        spec: SensingSpec {
            kind: MeasurementKind::Cdp,
            n,
            m: n * l,
            q,
            seed,
        },
        ops,
        observations: Vec::new(),
    })
}

/// `y_k = |A_k^* x_k|` elementwise.
pub fn observe<M: LinearMap + Sync>(ops: &[M], frames: &[CVec]) -> Result<Vec<RVec>> {
    ensure_dims!(ops.len() == frames.len(), "{} operators for {} frames", ops.len(), frames.len());
    for (k, (op, x)) in ops.iter().zip(frames).enumerate() {
        ensure_dims!(op.in_dim() == x.len(), "frame {k} has length {}, operator expects {}", x.len(), op.in_dim());
    }
    Ok(ops
        .par_iter()
        .zip(frames.par_iter())
        .map(|(op, x)| op.forward(x).map(|z| z.norm()))
        .collect())
}

/// `c / |c|`, with `phase(0) = 1`.
#[inline]
pub fn phase(c: C64) -> C64 {
    let r = c.norm();
    if r == 0.0 {
        ONE
    } else {
        c / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_generation_is_deterministic() {
        let a = gen_gaussian(5, 7, 3, true, 11).unwrap();
        let b = gen_gaussian(5, 7, 3, true, 11).unwrap();
        for (x, y) in a.ops.iter().zip(&b.ops) {
            assert_eq!(x.to_dense(), y.to_dense());
        }
        let c = gen_gaussian(5, 7, 3, true, 12).unwrap();
        assert_ne!(a.ops[0].to_dense(), c.ops[0].to_dense());
    }

    #[test]
    fn cdp_impulse_has_flat_spectrum() {
        let masks = CdpMasks {
            masks: vec![vec![ONE; 8]],
            dft_size: 8,
        };
        let op = CdpMap::new(masks).unwrap();
        let mut e1 = CVec::zeros(8);
        e1[0] = ONE;
        for v in op.forward(&e1).iter() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cdp_masks_take_only_admissible_values() {
        let e = gen_cdp(32, 3, 2, 5).unwrap();
        for op in &e.ops {
            let FrameOp::Cdp(c) = op else { panic!("expected CDP") };
            for mask in &c.masks().masks {
                for v in mask {
                    assert!(MASK_VALUES.contains(v));
                }
            }
        }
        assert_eq!(e.m(), 96);
    }

    #[test]
    fn zero_signal_gives_zero_observations() {
        let e = gen_gaussian(4, 6, 2, false, 1).unwrap();
        let y = observe(&e.ops, &[CVec::zeros(4), CVec::zeros(4)]).unwrap();
        assert!(y.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn identity_sensing_returns_moduli() {
        let op = DenseMap::new(CMat::identity(3, 3));
        let x = CVec::from_vec(vec![C64::new(-2.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0)]);
        let y = observe(&[op], &[x]).unwrap();
        assert_eq!(y[0].as_slice(), &[2.0, 0.5, 0.0]);
    }

    #[test]
    fn observe_rejects_bad_frame_length() {
        let e = gen_gaussian(4, 6, 1, false, 1).unwrap();
        assert!(observe(&e.ops, &[CVec::zeros(5)]).is_err());
    }

    #[test]
    fn phase_of_zero_is_one() {
        assert_eq!(phase(ZERO), ONE);
        assert!((phase(C64::new(0.0, -3.0)) - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn cdp_spec_requires_multiple_of_n() {
        let spec = SensingSpec {
            kind: MeasurementKind::Cdp,
            n: 10,
            m: 15,
            q: 1,
            seed: 0,
        };
        assert!(matches!(spec.build(), Err(Error::Config(_))));
    }
}
