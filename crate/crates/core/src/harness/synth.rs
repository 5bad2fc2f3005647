use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::{ComplexTensor3, TuckerFactors, C64};

/// Exactly Tucker-rank ground truth: random orthonormal factors and a random
/// core scaled so that `||X||_F = sqrt(q)`.
pub fn synth_factors(dims: (usize, usize, usize), ranks: (usize, usize, usize), seed: u64) -> Result<TuckerFactors> {
    let (n1, n2, q) = dims;
    let (r1, r2, r3) = ranks;
    if r1 == 0 || r2 == 0 || r3 == 0 || r1 > n1 || r2 > n2 || r3 > q {
        return Err(Error::InvalidArgument(format!(
            "ranks ({r1},{r2},{r3}) must be positive and within dims ({n1},{n2},{q})"
        )));
    }
    let d = rng::orthonormal(&mut rng::stream(seed, Domain::Synth, 1, 0), n1, r1);
    let e = rng::orthonormal(&mut rng::stream(seed, Domain::Synth, 2, 0), n2, r2);
    let f = rng::orthonormal(&mut rng::stream(seed, Domain::Synth, 3, 0), q, r3);
    let mut crng = rng::stream(seed, Domain::Synth, 4, 0);
    let g = rng::complex_normal_vec(&mut crng, r1 * r2 * r3);
    let scale = (q as f64).sqrt() / g.norm();
    let core = ComplexTensor3::new(ranks, g.iter().map(|z| z * scale).collect::<Vec<C64>>())?;
    TuckerFactors::new(core, d, e, f)
}

pub fn synth(dims: (usize, usize, usize), ranks: (usize, usize, usize), seed: u64) -> Result<ComplexTensor3> {
    synth_factors(dims, ranks, seed)?.reconstruct()
}
