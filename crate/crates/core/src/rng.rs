//! Seeded randomness: per-run seed derivation and Gaussian sampling.
//!
//! Run seeds are derived with SplitMix64 so that a `(master_seed, run_index)`
//! pair maps to the same stream on every platform. Each run splits its seed
//! into independent ChaCha8 streams (truth, measurements) so that changing a
//! sensor parameter never perturbs the simulated ground truth.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// One SplitMix64 output step for the given state.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo run `run_index` under `master_seed`.
pub fn derive_run_seed(master_seed: u64, run_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run_index))
}

/// Independent named streams of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Truth = 0,
    Estimate = 1,
    Sensor = 2,
}

pub fn stream_rng(run_seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws `x ~ N(0, cov)` for a symmetric PSD `cov`.
///
/// Uses a Cholesky factor when `cov` is positive definite and falls back to
/// a symmetric eigendecomposition (negative eigenvalues clamped to zero)
/// for singular covariances, so a zero covariance yields an exact zero.
pub fn sample_gaussian<const N: usize, R: Rng + ?Sized>(
    cov: &SMatrix<f64, N, N>,
    rng: &mut R,
) -> SVector<f64, N> {
    let mut white = SVector::<f64, N>::zeros();
    for w in white.iter_mut() {
        *w = rng.sample(StandardNormal);
    }
    if let Some(chol) = cov.cholesky() {
        return chol.l() * white;
    }
    let eig = DMatrix::from_column_slice(N, N, cov.as_slice()).symmetric_eigen();
    let scaled = DVector::from_fn(N, |i, _| eig.eigenvalues[i].max(0.0).sqrt() * white[i]);
    SVector::<f64, N>::from_column_slice((eig.eigenvectors * scaled).as_slice())
}
