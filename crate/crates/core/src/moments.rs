//! Monte Carlo expectations of the inverse estimated-channel Gram matrix.
//!
//! With `A = (ĜᴴĜ)⁻¹Ĝᴴ` the ZF pseudo-inverse, every inner expectation the
//! ZF/ZFP closed forms need is a linear functional of `ψ_km = E|A_km|²`:
//!
//! * `φ_k = E[(ĜᴴĜ)⁻¹]_kk = Σ_m ψ_km`
//! * `χ_i^k = Σ_m ψ_im (β_mk − α_mk)` (diagonal error covariance of user k)
//! * `δ_km = ψ_km` (per-antenna ZFP transmit load)
//!
//! so a single pass over channel draws serves all three.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{draw_estimates_split, expand_to_antennas};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::linalg::PsiKernel;
use crate::scenario::LargeScaleState;

/// Sample means of `|A_km|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfMoments {
    /// `M × K`; entry `(m, k)` is `E|A_km|²`.
    pub psi: DMatrix<f64>,
    pub samples: usize,
    pub redraws: usize,
}

impl ZfMoments {
    /// `φ_k`, the expected diagonal of the inverse Gram matrix.
    pub fn phi(&self) -> Vec<f64> {
        self.psi.column_iter().map(|c| c.sum()).collect()
    }

    /// `K × K` matrix with entry `(i, k) = Σ_m ψ_im · err[m][k]` for an
    /// `M × K` per-antenna error-variance matrix.
    pub fn weighted(&self, err_per_antenna: &DMatrix<f64>) -> DMatrix<f64> {
        self.psi.transpose() * err_per_antenna
    }

    /// `Σ_k δ_km` for every antenna m.
    pub fn antenna_load(&self) -> Vec<f64> {
        self.psi.row_iter().map(|r| r.sum()).collect()
    }
}

/// Per-antenna error variances `β − α`, `M × K`.
pub fn error_per_antenna(ls: &LargeScaleState, n_t: usize) -> DMatrix<f64> {
    expand_to_antennas(&ls.error_variance(), n_t)
}

/// Estimates [`ZfMoments`] from `cfg.n_channel_samples` draws of Ĝ.
pub fn estimate_zf_moments<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<ZfMoments> {
    estimate_zf_moments_with(ls, cfg.antennas_per_ap(), cfg.n_channel_samples, rng)
}

/// As [`estimate_zf_moments`] with explicit antennas per AP and sample count.
///
/// Draws whose Gram matrix is numerically singular are discarded and
/// redrawn; more than 1% redraws is an error.
pub fn estimate_zf_moments_with<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    n_t: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<ZfMoments> {
    let m = ls.aps() * n_t;
    let k = ls.users();
    if k >= m {
        return Err(Error::Dimension(format!(
            "zero forcing needs M > K, got M = {m}, K = {k}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::EmptySamples);
    }
    let mut sum = vec![0.0; m * k];
    let mut kernel = PsiKernel::new(m, k);
    let mut split = Vec::with_capacity(2 * m * k);
    let mut accepted = 0;
    let mut redraws = 0;
    while accepted < n_samples {
        draw_estimates_split(ls, n_t, rng, &mut split);
        if !kernel.accumulate(&split, &mut sum) {
            redraws += 1;
            if redraws * 100 > n_samples {
                return Err(Error::SingularGram {
                    redraws,
                    samples: n_samples,
                });
            }
            continue;
        }
        accepted += 1;
    }
    let inv_n = 1.0 / n_samples as f64;
    Ok(ZfMoments {
        psi: DMatrix::from_vec(m, k, sum.into_iter().map(|s| s * inv_n).collect()),
        samples: n_samples,
        redraws,
    })
}
