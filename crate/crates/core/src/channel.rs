//! Small-scale Rayleigh channel draws split into MMSE estimate and error.
//!
//! Estimates and errors are drawn directly from their output distributions
//! (ĝ ~ CN(0, α), g̃ ~ CN(0, β − α), independent) instead of simulating
//! pilot symbols.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::LargeScaleState;

pub type C64 = Complex<f64>;

/// One realization of the `M × K` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub g_hat: DMatrix<C64>,
    pub g_err: DMatrix<C64>,
    pub g_true: DMatrix<C64>,
}

/// Circularly symmetric complex Gaussian with the given variance.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Replicates each AP row `n_t` times, giving a per-antenna `M × K` matrix.
pub fn expand_to_antennas(per_ap: &DMatrix<f64>, n_t: usize) -> DMatrix<f64> {
    DMatrix::from_fn(per_ap.nrows() * n_t, per_ap.ncols(), |m, k| {
        per_ap[(m / n_t, k)]
    })
}

/// Fills an `M × K` matrix column by column with CN(0, var[q][k]) entries,
/// where q is the AP owning antenna m.
fn fill_gaussian<R: Rng + ?Sized>(var: &DMatrix<f64>, n_t: usize, rng: &mut R) -> DMatrix<C64> {
    let (n_ap, k) = var.shape();
    let m = n_ap * n_t;
    let mut out = DMatrix::zeros(m, k);
    for u in 0..k {
        let col = &mut out.as_mut_slice()[u * m..(u + 1) * m];
        for (q, block) in col.chunks_exact_mut(n_t).enumerate() {
            let s = (0.5 * var[(q, u)]).sqrt();
            for z in block {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z = C64::new(s * re, s * im);
            }
        }
    }
    out
}

/// Same draws as [`draw_estimates`], written in split form: an `M × 2K`
/// column-major real matrix with real parts in columns `0..K` and imaginary
/// parts in columns `K..2K`.
pub fn draw_estimates_split<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    n_t: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let (n_ap, k) = ls.alpha.shape();
    let m = n_ap * n_t;
    out.resize(2 * m * k, 0.0);
    let (re_part, im_part) = out.split_at_mut(m * k);
    for u in 0..k {
        let re_col = &mut re_part[u * m..(u + 1) * m];
        let im_col = &mut im_part[u * m..(u + 1) * m];
        for q in 0..n_ap {
            let s = (0.5 * ls.alpha[(q, u)]).sqrt();
            for row in q * n_t..(q + 1) * n_t {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                re_col[row] = s * re;
                im_col[row] = s * im;
            }
        }
    }
}

/// Channel estimates only; consumes the same random numbers as the first
/// half of [`draw_channel`].
pub fn draw_estimates<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    n_t: usize,
    rng: &mut R,
) -> DMatrix<C64> {
    fill_gaussian(&ls.alpha, n_t, rng)
}

pub fn draw_channel<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    n_t: usize,
    rng: &mut R,
) -> Result<ChannelDraw> {
    let err_var = ls.error_variance();
    if let Some(bad) = err_var.iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::InvariantViolation(format!(
            "beta below alpha (error variance {bad})"
        )));
    }
    if ls.alpha.iter().any(|a| *a < 0.0) {
        return Err(Error::InvariantViolation("negative alpha".into()));
    }
    let g_hat = fill_gaussian(&ls.alpha, n_t, rng);
    let g_err = fill_gaussian(&err_var, n_t, rng);
    let g_true = &g_hat + &g_err;
    Ok(ChannelDraw {
        g_hat,
        g_err,
        g_true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn state(beta: &[f64], alpha: &[f64], n_ap: usize) -> LargeScaleState {
        let k = beta.len() / n_ap;
        LargeScaleState {
            beta: DMatrix::from_row_slice(n_ap, k, beta),
            alpha: DMatrix::from_row_slice(n_ap, k, alpha),
        }
    }

    #[test]
    fn expand_replicates_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(expand_to_antennas(&m, 1), m);
        let e = expand_to_antennas(&m, 2);
        assert_eq!(
            e,
            DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0])
        );
        assert_eq!(e.sum(), 2.0 * m.sum());
    }

    #[test]
    fn perfect_csi_has_no_error() {
        let ls = state(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], 2);
        let d = draw_channel(&ls, 3, &mut stream(1, 0, Purpose::Channel)).unwrap();
        assert!(d.g_err.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(d.g_true, d.g_hat);
        assert_eq!(d.g_hat.shape(), (6, 2));
    }

    #[test]
    fn rejects_alpha_above_beta() {
        let ls = state(&[1.0], &[2.0], 1);
        assert!(matches!(
            draw_channel(&ls, 1, &mut stream(1, 0, Purpose::Channel)),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn truth_is_sum_and_estimates_match_prefix() {
        let ls = state(&[2.0, 1.0], &[0.5, 0.25], 1);
        let d = draw_channel(&ls, 4, &mut stream(2, 0, Purpose::Channel)).unwrap();
        assert_eq!(d.g_true, &d.g_hat + &d.g_err);
        let g = draw_estimates(&ls, 4, &mut stream(2, 0, Purpose::Channel));
        assert_eq!(g, d.g_hat);

        let two_ap = state(&[2.0, 1.0, 3.0, 0.5], &[0.5, 0.25, 1.0, 0.1], 2);
        let g = draw_estimates(&two_ap, 3, &mut stream(5, 0, Purpose::Channel));
        let mut split = Vec::new();
        draw_estimates_split(&two_ap, 3, &mut stream(5, 0, Purpose::Channel), &mut split);
        let re: Vec<f64> = g.iter().map(|z| z.re).collect();
        let im: Vec<f64> = g.iter().map(|z| z.im).collect();
        assert_eq!(split[..12], re[..]);
        assert_eq!(split[12..], im[..]);
    }

    #[test]
    fn estimate_moments() {
        // M=2, K=1, α=1: E|ĝ|² = 1 and E[Re·Im] = 0.
        let ls = state(&[1.0], &[1.0], 1);
        let mut rng = stream(3, 0, Purpose::Channel);
        let n = 100_000;
        let (mut p, mut cross, mut cross2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let g = draw_estimates(&ls, 2, &mut rng);
            for z in g.iter() {
                p += z.norm_sqr();
                let c = z.re * z.im;
                cross += c;
                cross2 += c * c;
            }
        }
        let count = 2.0 * n as f64;
        assert!((p / count - 1.0).abs() < 0.02);
        let mean = cross / count;
        let se = ((cross2 / count - mean * mean) / count).sqrt();
        assert!(mean.abs() < 3.0 * se, "{mean} vs {se}");
    }
}
