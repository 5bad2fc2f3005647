//! Matrix-free linear maps and a CGLS least-squares solver.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::tensor::{CMat, CVec, ZERO};

/// A linear operator known only through its forward and adjoint actions.
///
/// Implementations must satisfy `<forward(x), y> = <x, adjoint(y)>`.
pub trait LinearMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn forward(&self, x: &CVec) -> CVec;
    fn adjoint(&self, y: &CVec) -> CVec;
    /// True when the map sends real vectors to real vectors.
    fn is_real(&self) -> bool {
        false
    }
}

pub type SharedMap = Arc<dyn LinearMap>;

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn forward(&self, x: &CVec) -> CVec {
        (**self).forward(x)
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        (**self).adjoint(y)
    }
    fn is_real(&self) -> bool {
        (**self).is_real()
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Arc<T> {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn forward(&self, x: &CVec) -> CVec {
        (**self).forward(x)
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        (**self).adjoint(y)
    }
    fn is_real(&self) -> bool {
        (**self).is_real()
    }
}

/// An explicit `out_dim x in_dim` matrix.
#[derive(Debug, Clone)]
pub struct DenseMap {
    pub matrix: CMat,
}

impl DenseMap {
    pub fn new(matrix: CMat) -> Self {
        Self { matrix }
    }
}

impl LinearMap for DenseMap {
    fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn forward(&self, x: &CVec) -> CVec {
        &self.matrix * x
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        self.matrix.ad_mul(y)
    }
    fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }
}

/// Vertical concatenation of maps sharing an input space.
pub struct StackedMap<M> {
    maps: Vec<M>,
    offsets: Vec<usize>,
    in_dim: usize,
}

impl<M: LinearMap> StackedMap<M> {
    pub fn new(maps: Vec<M>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot stack an empty list of maps".into()))?;
        let in_dim = first.in_dim();
        let mut offsets = Vec::with_capacity(maps.len() + 1);
        offsets.push(0);
        for (i, m) in maps.iter().enumerate() {
            ensure_dims!(m.in_dim() == in_dim, "map {i} has in_dim {}, expected {in_dim}", m.in_dim());
            offsets.push(offsets[i] + m.out_dim());
        }
        Ok(Self { maps, offsets, in_dim })
    }

    pub fn maps(&self) -> &[M] {
        &self.maps
    }
}

/// Builds the stacked operator of a list of maps.
pub fn stacked_map<M: LinearMap>(maps: Vec<M>) -> Result<StackedMap<M>> {
    StackedMap::new(maps)
}

impl<M: LinearMap> LinearMap for StackedMap<M> {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn forward(&self, x: &CVec) -> CVec {
        let parts: Vec<CVec> = self.maps.par_iter().map(|m| m.forward(x)).collect();
        let mut out = CVec::zeros(self.out_dim());
        for (i, p) in parts.iter().enumerate() {
            out.rows_mut(self.offsets[i], p.len()).copy_from(p);
        }
        out
    }
    fn adjoint(&self, y: &CVec) -> CVec {
        let parts: Vec<CVec> = self
            .maps
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let slice = y.rows(self.offsets[i], m.out_dim()).into_owned();
                m.adjoint(&slice)
            })
            .collect();
        // sequential sum keeps the result bit-reproducible
        let mut acc = CVec::from_element(self.in_dim, ZERO);
        for p in parts {
            acc += p;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CglsConfig {
    pub max_iters: usize,
    /// Stop once `||L*(b - Lx)|| <= rel_tolerance * ||L* b||`.
    pub rel_tolerance: f64,
}

impl Default for CglsConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CglsOutput {
    pub x: CVec,
    /// `||b - L x_t||` for t = 0 (the start) through the last iterate.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

/// CGLS for `min ||b - L x||²` starting from `x0`.
pub fn cgls<M: LinearMap + ?Sized>(l: &M, b: &CVec, x0: &CVec, cfg: &CglsConfig) -> Result<CVec> {
    Ok(cgls_trace(l, b, x0, cfg)?.x)
}

pub fn cgls_trace<M: LinearMap + ?Sized>(l: &M, b: &CVec, x0: &CVec, cfg: &CglsConfig) -> Result<CglsOutput> {
    ensure_dims!(b.len() == l.out_dim(), "rhs has length {}, operator out_dim is {}", b.len(), l.out_dim());
    ensure_dims!(x0.len() == l.in_dim(), "x0 has length {}, operator in_dim is {}", x0.len(), l.in_dim());
    if cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("CGLS max_iters must be at least 1".into()));
    }

    let mut x = x0.clone();
    let mut r = b - l.forward(&x);
    let mut s = l.adjoint(&r);
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    let stop = cfg.rel_tolerance * l.adjoint(b).norm();
    let mut residual_norms = vec![r.norm()];
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if gamma.sqrt() <= stop || gamma == 0.0 {
            break;
        }
        let lp = l.forward(&p);
        let denom = lp.norm_squared();
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let alpha = gamma / denom;
        let mut r_next = r.clone();
        r_next.axpy((-alpha).into(), &lp, 1.0.into());
        let r_norm = r_next.norm();
        // stagnation at rounding level: the step cannot reduce the residual
        if r_norm > residual_norms[residual_norms.len() - 1] {
            break;
        }
        x.axpy(alpha.into(), &p, 1.0.into());
        r = r_next;
        s = l.adjoint(&r);
        let gamma_next = s.norm_squared();
        iterations += 1;
        residual_norms.push(r_norm);
        let beta = gamma_next / gamma;
        p = &s + &p * nalgebra::Complex::from(beta);
        gamma = gamma_next;
    }

    Ok(CglsOutput {
        x,
        residual_norms,
        iterations,
    })
}
