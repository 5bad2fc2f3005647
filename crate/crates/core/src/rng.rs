//! Seeded, splittable random streams.
//!
//! Every random draw in the library comes from a ChaCha8 generator keyed by
//! the user seed, with an independent stream per `(domain, k, l)` triple so
//! frames and masks can be generated in any order (or in parallel) with the
//! same result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{CMat, CVec, C64};

/// Purpose tags that keep streams for different uses disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Sensing = 1,
    Mask = 2,
    PowerStart = 3,
    SubspaceStart = 4,
    Synth = 5,
    Test = 99,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: Domain, k: u64, l: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = splitmix64(splitmix64(splitmix64(domain as u64) ^ k) ^ l.rotate_left(32));
    rng.set_stream(id);
    rng
}

/// Circularly-symmetric complex normal with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn real_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), 0.0)
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

pub fn complex_normal_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill order keeps draws independent of nalgebra internals
    let data: Vec<C64> = (0..rows * cols).map(|_| complex_normal(rng)).collect();
    CMat::from_column_slice(rows, cols, &data)
}

/// Random `n x r` matrix with orthonormal columns (QR of a Gaussian draw).
pub fn orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> CMat {
    let g = complex_normal_mat(rng, n, r);
    g.qr().q().columns(0, r).into_owned()
}
