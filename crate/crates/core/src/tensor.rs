//! Dense complex tensors, mode unfoldings, Kronecker products and HOSVD.
//!
//! Everything is column-major. A frame `X_k` of an `n1 x n2 x q` stack is the
//! contiguous slice `data[k*n1*n2 .. (k+1)*n1*n2]`, which is exactly `vec(X_k)`.
//!
//! Unfoldings follow the convention under which
//! `X_(1) = D G_(1) (F ⊗ E)^T`, `X_(2) = E G_(2) (F ⊗ D)^T` and
//! `X_(3) = F G_(3) (E ⊗ D)^T` hold for `X = G ×1 D ×2 E ×3 F`
//! (plain transpose, not conjugate transpose).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ensure_dims, Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense 3-way complex array in column-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: (usize, usize, usize),
    data: Vec<C64>,
}

impl ComplexTensor3 {
    pub fn new(dims: (usize, usize, usize), data: Vec<C64>) -> Result<Self> {
        let (n1, n2, q) = dims;
        if n1 == 0 || n2 == 0 || q == 0 {
            return Err(Error::InvalidArgument(format!(
                "tensor dims must be positive, got {n1}x{n2}x{q}"
            )));
        }
        ensure_dims!(
            data.len() == n1 * n2 * q,
            "data length {} does not match {n1}x{n2}x{q}",
            data.len()
        );
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![ZERO; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    /// Stacks equally-sized `n1 x n2` frames along the third mode.
    pub fn from_frames(n1: usize, n2: usize, frames: &[CVec]) -> Result<Self> {
        let mut data = Vec::with_capacity(n1 * n2 * frames.len());
        for (k, fr) in frames.iter().enumerate() {
            ensure_dims!(fr.len() == n1 * n2, "frame {k} has length {}, expected {}", fr.len(), n1 * n2);
            data.extend_from_slice(fr.as_slice());
        }
        Self::new((n1, n2, frames.len()), data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn frame_len(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// `vec(X_k)` as a slice.
    pub fn frame_slice(&self, k: usize) -> &[C64] {
        let n = self.frame_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn frame_vec(&self, k: usize) -> CVec {
        CVec::from_column_slice(self.frame_slice(k))
    }

    /// Frontal slice `X_k` as an `n1 x n2` matrix.
    pub fn frame(&self, k: usize) -> CMat {
        CMat::from_column_slice(self.dims.0, self.dims.1, self.frame_slice(k))
    }

    pub fn frames(&self) -> Vec<CVec> {
        (0..self.dims.2).map(|k| self.frame_vec(k)).collect()
    }

    pub fn set_frame(&mut self, k: usize, v: &[C64]) -> Result<()> {
        let n = self.frame_len();
        ensure_dims!(v.len() == n, "frame length {} does not match {n}", v.len());
        self.data[k * n..(k + 1) * n].copy_from_slice(v);
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidArgument(format!("mode must be 1, 2 or 3, got {mode}")));
    }
    Ok(())
}

/// Mode-`mode` unfolding (1-based mode).
pub fn matricize(t: &ComplexTensor3, mode: usize) -> Result<CMat> {
    check_mode(mode)?;
    let (n1, n2, q) = t.dims;
    Ok(match mode {
        1 => CMat::from_column_slice(n1, n2 * q, &t.data),
        2 => CMat::from_fn(n2, n1 * q, |j, c| t.get(c % n1, j, c / n1)),
        _ => CMat::from_fn(q, n1 * n2, |k, c| t.get(c % n1, c / n1, k)),
    })
}

/// Inverse of [`matricize`].
pub fn fold(m: &CMat, mode: usize, dims: (usize, usize, usize)) -> Result<ComplexTensor3> {
    check_mode(mode)?;
    let (n1, n2, q) = dims;
    let expected = match mode {
        1 => (n1, n2 * q),
        2 => (n2, n1 * q),
        _ => (q, n1 * n2),
    };
    ensure_dims!(
        m.shape() == expected,
        "mode-{mode} unfolding has shape {:?}, expected {:?}",
        m.shape(),
        expected
    );
    Ok(match mode {
        1 => ComplexTensor3 {
            dims,
            data: m.as_slice().to_vec(),
        },
        2 => ComplexTensor3::from_fn(dims, |i, j, k| m[(j, i + n1 * k)]),
        _ => ComplexTensor3::from_fn(dims, |i, j, k| m[(k, i + n1 * j)]),
    })
}

/// `t ×_mode m`: multiplies every mode-`mode` fiber by `m`.
pub fn mode_product(t: &ComplexTensor3, m: &CMat, mode: usize) -> Result<ComplexTensor3> {
    let unf = matricize(t, mode)?;
    ensure_dims!(
        m.ncols() == unf.nrows(),
        "mode-{mode} product: matrix has {} columns, tensor mode has size {}",
        m.ncols(),
        unf.nrows()
    );
    let (n1, n2, q) = t.dims;
    let dims = match mode {
        1 => (m.nrows(), n2, q),
        2 => (n1, m.nrows(), q),
        _ => (n1, n2, m.nrows()),
    };
    fold(&(m * unf), mode, dims)
}

/// Standard Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (br, bc) = b.shape();
    CMat::from_fn(a.nrows() * br, a.ncols() * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// `vec(A X B)` computed by direct multiplication.
///
/// Equals `(B^T ⊗ A) vec(X)`; over the complex field the identity uses the
/// plain transpose of `B`.
pub fn vec_axb(a: &CMat, x: &CMat, b: &CMat) -> Result<CVec> {
    ensure_dims!(
        a.ncols() == x.nrows() && x.ncols() == b.nrows(),
        "vec(AXB): shapes {:?} {:?} {:?} are not conformable",
        a.shape(),
        x.shape(),
        b.shape()
    );
    let p = a * x * b;
    Ok(CVec::from_column_slice(p.as_slice()))
}

/// Core tensor plus the three factor matrices of a Tucker model.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    pub core: ComplexTensor3,
    pub d: CMat,
    pub e: CMat,
    pub f: CMat,
}

impl TuckerFactors {
    pub fn new(core: ComplexTensor3, d: CMat, e: CMat, f: CMat) -> Result<Self> {
        let tf = Self { core, d, e, f };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        let (r1, r2, r3) = self.core.dims();
        ensure_dims!(self.d.ncols() == r1, "D has {} columns, core mode 1 is {r1}", self.d.ncols());
        ensure_dims!(self.e.ncols() == r2, "E has {} columns, core mode 2 is {r2}", self.e.ncols());
        ensure_dims!(self.f.ncols() == r3, "F has {} columns, core mode 3 is {r3}", self.f.ncols());
        let (n1, n2, q) = self.dims();
        if r1 > n1 || r2 > n2 || r3 > q {
            return Err(Error::InvalidArgument(format!(
                "ranks ({r1},{r2},{r3}) exceed dims ({n1},{n2},{q})"
            )));
        }
        Ok(())
    }

    pub fn ranks(&self) -> (usize, usize, usize) {
        self.core.dims()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d.nrows(), self.e.nrows(), self.f.nrows())
    }

    /// Mixed core slice `G_k = Σ_t F[k,t] G[:,:,t]` (an `r1 x r2` matrix).
    pub fn mixed_core(&self, k: usize) -> CMat {
        let (r1, r2, r3) = self.ranks();
        let mut g = CMat::zeros(r1, r2);
        for t in 0..r3 {
            let w = self.f[(k, t)];
            if w == ZERO {
                continue;
            }
            g += self.core.frame(t) * w;
        }
        g
    }

    /// `x_k = vec(D G_k E^T)`, i.e. `(f_k ⊗ E ⊗ D) vec(G)` without forming
    /// the Kronecker product.
    pub fn frame(&self, k: usize) -> CVec {
        let x = &self.d * self.mixed_core(k) * self.e.transpose();
        CVec::from_column_slice(x.as_slice())
    }

    pub fn reconstruct(&self) -> Result<ComplexTensor3> {
        tucker_reconstruct(self)
    }
}

/// `X = G ×1 D ×2 E ×3 F`.
pub fn tucker_reconstruct(f: &TuckerFactors) -> Result<ComplexTensor3> {
    f.validate()?;
    let t = mode_product(&f.core, &f.d, 1)?;
    let t = mode_product(&t, &f.e, 2)?;
    mode_product(&t, &f.f, 3)
}

/// Top-`r` left singular vectors of `m`, completed to `r` orthonormal
/// columns when `m` has fewer than `r` singular vectors.
pub fn leading_left_singular_vectors(m: &CMat, r: usize) -> CMat {
    let nrows = m.nrows();
    assert!(r <= nrows, "rank {r} exceeds row count {nrows}");
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let take = r.min(u.ncols());
    let mut cols: Vec<CVec> = (0..take).map(|c| u.column(c).into_owned()).collect();
    // Complete with Gram-Schmidt over the canonical basis.
    let mut basis = 0;
    while cols.len() < r && basis < nrows {
        let mut v = CVec::zeros(nrows);
        v[basis] = ONE;
        basis += 1;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / C64::from(nv));
        }
    }
    CMat::from_columns(&cols)
}

/// Truncated higher-order SVD.
pub fn hosvd(t: &ComplexTensor3, ranks: (usize, usize, usize)) -> Result<TuckerFactors> {
    let (n1, n2, q) = t.dims();
    let (r1, r2, r3) = ranks;
    if r1 == 0 || r2 == 0 || r3 == 0 || r1 > n1 || r2 > n2 || r3 > q {
        return Err(Error::InvalidArgument(format!(
            "HOSVD ranks ({r1},{r2},{r3}) must be positive and within dims ({n1},{n2},{q})"
        )));
    }
    let d = leading_left_singular_vectors(&matricize(t, 1)?, r1);
    let e = leading_left_singular_vectors(&matricize(t, 2)?, r2);
    let f = leading_left_singular_vectors(&matricize(t, 3)?, r3);
    let core = mode_product(t, &d.adjoint(), 1)?;
    let core = mode_product(&core, &e.adjoint(), 2)?;
    let core = mode_product(&core, &f.adjoint(), 3)?;
    TuckerFactors::new(core, d, e, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn mode1_unfolding_of_counting_tensor() {
        let t = ComplexTensor3::new((2, 2, 2), (1..=8).map(|v| c(v as f64)).collect()).unwrap();
        let m = matricize(&t, 1).unwrap();
        let expected = CMat::from_row_slice(2, 4, &[1., 3., 5., 7., 2., 4., 6., 8.].map(c));
        assert_eq!(m, expected);
    }

    #[test]
    fn invalid_mode_is_rejected() {
        let t = ComplexTensor3::zeros((2, 2, 2));
        assert!(matches!(matricize(&t, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(matricize(&t, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fold_inverts_matricize_on_every_mode() {
        let t = ComplexTensor3::from_fn((3, 2, 4), |i, j, k| C64::new(i as f64 + 0.5 * j as f64, k as f64 - i as f64));
        for mode in 1..=3 {
            let m = matricize(&t, mode).unwrap();
            assert_eq!(fold(&m, mode, t.dims()).unwrap(), t);
        }
    }

    #[test]
    fn kron_block_expansion() {
        let a = CMat::from_row_slice(1, 2, &[c(1.), c(2.)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.), c(1.), c(1.), c(0.)]);
        let expected = CMat::from_row_slice(2, 4, &[0., 1., 0., 2., 1., 0., 2., 0.].map(c));
        assert_eq!(kron(&a, &b), expected);
        assert_eq!(kron(&CMat::identity(2, 2), &CMat::identity(3, 3)), CMat::identity(6, 6));
    }

    #[test]
    fn rank_one_reconstruction() {
        let core = ComplexTensor3::new((1, 1, 1), vec![C64::new(2.0, -1.0)]).unwrap();
        let d = CMat::from_column_slice(2, 1, &[c(1.), c(3.)]);
        let e = CMat::from_column_slice(3, 1, &[c(2.), C64::new(0., 1.), c(-1.)]);
        let f = CMat::from_column_slice(2, 1, &[c(0.5), c(4.)]);
        let tf = TuckerFactors::new(core, d.clone(), e.clone(), f.clone()).unwrap();
        let x = tf.reconstruct().unwrap();
        for k in 0..2 {
            for j in 0..3 {
                for i in 0..2 {
                    let want = C64::new(2.0, -1.0) * d[(i, 0)] * e[(j, 0)] * f[(k, 0)];
                    assert!((x.get(i, j, k) - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn identity_factors_return_core() {
        let g = ComplexTensor3::from_fn((2, 3, 2), |i, j, k| C64::new((i * 7 + j) as f64, k as f64));
        let tf = TuckerFactors::new(g.clone(), CMat::identity(2, 2), CMat::identity(3, 3), CMat::identity(2, 2)).unwrap();
        assert_eq!(tf.reconstruct().unwrap(), g);
    }

    #[test]
    fn ranks_exceeding_dims_rejected() {
        let t = ComplexTensor3::zeros((2, 3, 2));
        assert!(matches!(hosvd(&t, (3, 1, 1)), Err(Error::InvalidArgument(_))));
        assert!(matches!(hosvd(&t, (1, 1, 0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_tensor_hosvd_has_zero_core_and_orthonormal_factors() {
        let t = ComplexTensor3::zeros((3, 4, 2));
        let tf = hosvd(&t, (2, 2, 1)).unwrap();
        assert!(tf.core.norm() == 0.0);
        let g = tf.d.adjoint() * &tf.d;
        assert!((g - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn vec_axb_identity_case() {
        let x = CMat::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64));
        let v = vec_axb(&CMat::identity(3, 3), &x, &CMat::identity(2, 2)).unwrap();
        assert_eq!(v.as_slice(), x.as_slice());
        assert!(vec_axb(&CMat::identity(2, 2), &x, &CMat::identity(2, 2)).is_err());
    }

    #[test]
    fn frame_vectorization_is_column_major() {
        let t = ComplexTensor3::from_fn((2, 3, 2), |i, j, k| c((100 * k + 10 * j + i) as f64));
        let f = t.frame(1);
        assert_eq!(f[(1, 2)], c(121.0));
        assert_eq!(t.frame_slice(1)[1 + 2 * 2], c(121.0));
    }
}
