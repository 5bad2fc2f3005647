#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use tspr::altmin::FactorMap;
use tspr::linop::LinearMap;
use tspr::lowrank::{effective_rows as lowrank_rows, ULift};
use tspr::measurement::{gen_cdp, gen_gaussian, FrameOp, MeasurementEnsemble};
use tspr::rng::{self, Domain};
use tspr::tensor::{kron, matricize, CMat, CVec, ComplexTensor3, TuckerFactors, C64};
use tspr::tspr::{effective_rows, effective_vector, temporal_basis, CoreLift, DLift, ELift};

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    rng::stream(seed, Domain::Test, 0, 0)
}

pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn random_tensor(r: &mut ChaCha8Rng, dims: (usize, usize, usize)) -> ComplexTensor3 {
    let v = rng::complex_normal_vec(r, dims.0 * dims.1 * dims.2);
    ComplexTensor3::new(dims, v.as_slice().to_vec()).unwrap()
}

/// Gaussian (not orthonormal) factors, so that no identity hides a
/// transposition or conjugation error.
pub fn random_factors(seed: u64, dims: (usize, usize, usize), ranks: (usize, usize, usize)) -> TuckerFactors {
    let mut r = test_rng(seed);
    let core = random_tensor(&mut r, ranks);
    let d = rng::complex_normal_mat(&mut r, dims.0, ranks.0);
    let e = rng::complex_normal_mat(&mut r, dims.1, ranks.1);
    let f = rng::complex_normal_mat(&mut r, dims.2, ranks.2);
    TuckerFactors::new(core, d, e, f).unwrap()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `K` with `vec(X^T) = K vec(X)` for `X` of shape `rows x cols`.
pub fn commutation(rows: usize, cols: usize) -> CMat {
    let mut k = CMat::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            k[(j + cols * i, i + rows * j)] = C64::new(1.0, 0.0);
        }
    }
    k
}

pub fn row_of(m: &CMat, k: usize) -> CMat {
    m.rows(k, 1).into_owned()
}

/// `(f_k ⊗ E ⊗ D)`.
pub fn explicit_core_lift(f: &TuckerFactors, k: usize) -> CMat {
    kron(&kron(&row_of(&f.f, k), &f.e), &f.d)
}

/// `(S_k^T ⊗ I_{n1})` with `S_k = M_1(G) (f_k ⊗ E)^T`.
pub fn explicit_d_lift(f: &TuckerFactors, k: usize) -> CMat {
    let s = matricize(&f.core, 1).unwrap() * kron(&row_of(&f.f, k), &f.e).transpose();
    kron(&s.transpose(), &identity(f.d.nrows()))
}

/// `K (U_k^T ⊗ I_{n2})` with `U_k = M_2(G) (f_k ⊗ D)^T`: `vec(E) ↦ vec((E U_k)^T)`.
pub fn explicit_e_lift(f: &TuckerFactors, k: usize) -> CMat {
    let u = matricize(&f.core, 2).unwrap() * kron(&row_of(&f.f, k), &f.d).transpose();
    let (n1, n2) = (f.d.nrows(), f.e.nrows());
    commutation(n2, n1) * kron(&u.transpose(), &identity(n2))
}

/// `(b_k^T ⊗ I_n)`.
pub fn explicit_u_lift(coeffs: &CMat, k: usize, n: usize) -> CMat {
    kron(&coeffs.columns(k, 1).transpose(), &identity(n))
}

/// Effective vector `conj(M_3(G)) (E ⊗ D)^* a` from the explicit Kronecker product.
pub fn explicit_effective_vector(f: &TuckerFactors, a: &CVec) -> CVec {
    matricize(&f.core, 3).unwrap().conjugate() * kron(&f.e, &f.d).adjoint() * a
}

/// Vertical stack of `A_k M_k`.
pub fn stacked(ops: &[FrameOp], lift: impl Fn(usize) -> CMat) -> CMat {
    let blocks: Vec<CMat> = ops.iter().enumerate().map(|(k, op)| op.to_dense() * lift(k)).collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = CMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        out.rows_mut(off, b.nrows()).copy_from(&b);
        off += b.nrows();
    }
    out
}

/// `|<Lx, y> - <x, L*y>| / (||Lx|| ||y||)` on random `x`, `y`.
pub fn adjoint_mismatch<M: LinearMap + ?Sized>(map: &M, r: &mut ChaCha8Rng) -> f64 {
    let x = rng::complex_normal_vec(r, map.in_dim());
    let y = rng::complex_normal_vec(r, map.out_dim());
    let lx = map.forward(&x);
    let lhs = y.dotc(&lx);
    let rhs = map.adjoint(&y).dotc(&x);
    (lhs - rhs).norm() / (lx.norm() * y.norm())
}

pub struct OracleCheck {
    pub name: &'static str,
    /// Relative error of the matrix-free forward (or effective vectors)
    /// against the explicit construction.
    pub forward: f64,
    /// Worst of the inner-product test and the explicit adjoint comparison.
    pub adjoint: f64,
}

fn check_map<M: LinearMap>(name: &'static str, map: &M, explicit: &CMat, r: &mut ChaCha8Rng) -> OracleCheck {
    let p = rng::complex_normal_vec(r, map.in_dim());
    let forward = rel_err(map.forward(&p).as_slice(), (explicit * &p).as_slice());
    let y = rng::complex_normal_vec(r, map.out_dim());
    let adj = rel_err(map.adjoint(&y).as_slice(), (explicit.adjoint() * &y).as_slice());
    OracleCheck {
        name,
        forward,
        adjoint: adj.max(adjoint_mismatch(map, r)),
    }
}

pub fn ensemble(kind: &str, n: usize, m_or_l: usize, q: usize, seed: u64) -> MeasurementEnsemble {
    match kind {
        "cdp" => gen_cdp(n, m_or_l, q, seed).unwrap(),
        "real" => gen_gaussian(n, m_or_l, q, false, seed).unwrap(),
        _ => gen_gaussian(n, m_or_l, q, true, seed).unwrap(),
    }
}

/// Every matrix-free operator against its explicit dense construction.
pub fn oracle_suite(seed: u64, dims: (usize, usize, usize), ranks: (usize, usize, usize)) -> Vec<OracleCheck> {
    let mut r = test_rng(seed ^ 0x5eed);
    let n = dims.0 * dims.1;
    let f = random_factors(seed, dims, ranks);
    let ens = ensemble("complex", n, 2 * n + 1, dims.2, seed);
    let ops = &ens.ops;
    let mut out = Vec::new();

    let d_map = FactorMap::new(ops, DLift::new(&f)).unwrap();
    out.push(check_map("update_D", &d_map, &stacked(ops, |k| explicit_d_lift(&f, k)), &mut r));
    let e_map = FactorMap::new(ops, ELift::new(&f)).unwrap();
    out.push(check_map("update_E", &e_map, &stacked(ops, |k| explicit_e_lift(&f, k)), &mut r));
    let g_map = FactorMap::new(ops, CoreLift::new(&f)).unwrap();
    out.push(check_map("update_G", &g_map, &stacked(ops, |k| explicit_core_lift(&f, k)), &mut r));

    let r_lr = ranks.0;
    let coeffs = rng::complex_normal_mat(&mut r, r_lr, dims.2);
    let u_map = FactorMap::new(ops, ULift { n, coeffs: &coeffs }).unwrap();
    out.push(check_map("update_U", &u_map, &stacked(ops, |k| explicit_u_lift(&coeffs, k, n)), &mut r));

    // update_F: effective vectors one at a time and as the per-frame matrix
    let basis = temporal_basis(&f);
    let mut fwd: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for (k, op) in ops.iter().enumerate() {
        let dense = op.to_dense();
        let rows = effective_rows(op, &basis);
        for i in 0..dense.nrows() {
            let a = dense.row(i).adjoint();
            let explicit = explicit_effective_vector(&f, &a);
            fwd = fwd.max(rel_err(effective_vector(&f, &a).unwrap().as_slice(), explicit.as_slice()));
            fwd = fwd.max(rel_err(rows.row(i).adjoint().as_slice(), explicit.as_slice()));
        }
        // <a, x_k> = <w, f_k> for every measurement
        let fk = f.f.row(k).transpose();
        let lhs = op.forward(&f.frame(k));
        let rhs = &rows * &fk;
        adj = adj.max(rel_err(rhs.as_slice(), lhs.as_slice()));
    }
    out.push(OracleCheck {
        name: "update_F effective vectors",
        forward: fwd,
        adjoint: adj,
    });

    // update_B effective vectors U^* a
    let u = rng::complex_normal_mat(&mut r, n, r_lr);
    let mut fwd: f64 = 0.0;
    for op in ops {
        let dense = op.to_dense();
        let rows = lowrank_rows(op, &u);
        for i in 0..dense.nrows() {
            let explicit = u.adjoint() * dense.row(i).adjoint();
            fwd = fwd.max(rel_err(rows.row(i).adjoint().as_slice(), explicit.as_slice()));
        }
    }
    out.push(OracleCheck {
        name: "update_B effective vectors",
        forward: fwd,
        adjoint: 0.0,
    });

    let cdp = ensemble("cdp", n, 3, 1, seed);
    let dense = cdp.ops[0].to_dense();
    out.push(check_map("CDP", &cdp.ops[0], &dense, &mut r));
    out
}
