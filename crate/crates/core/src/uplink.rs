//! Uplink detection: matched filtering with full CSI or statistics only, and
//! zero-forcing detection.
//!
//! Closed forms are written over per-AP sums; an AP with `N_t` antennas
//! contributes `N_t` identical terms.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{complex_normal, draw_channel, C64};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::linalg::pseudo_inverse;
use crate::moments::{error_per_antenna, estimate_zf_moments, ZfMoments};
use crate::scenario::LargeScaleState;
use crate::sinr::{ratio, SinrVector};
use crate::link::{LinkAccumulator, LinkReport};
use crate::stats::{Batched, Estimate, Projection, Running, DEFAULT_BATCHES};

/// Uplink power coefficients, one per user, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkPower {
    pub eta: Vec<f64>,
}

impl UplinkPower {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvariantViolation(format!(
                "uplink power coefficient {bad} outside [0, 1]"
            )));
        }
        Ok(Self { eta })
    }

    pub fn full(users: usize) -> Self {
        Self {
            eta: vec![1.0; users],
        }
    }
}

fn check_inputs(ls: &LargeScaleState, eta: &[f64], cfg: &SimulationConfig) -> Result<()> {
    ls.check(cfg)?;
    if eta.len() != ls.users() {
        return Err(Error::Dimension(format!(
            "{} power coefficients for {} users",
            eta.len(),
            ls.users()
        )));
    }
    Ok(())
}

/// Closed-form powers of the matched-filter output terms for every user.
///
/// `signal` is the power through the mean gain `E‖ĝ_k‖²`; `uncertainty` is
/// the power of the fluctuation `‖ĝ_k‖² − E‖ĝ_k‖²`, which only counts as
/// interference when the detector knows statistics alone.
#[derive(Debug, Clone, PartialEq)]
pub struct MfTerms {
    pub signal: Vec<f64>,
    pub estimation_error: Vec<f64>,
    pub interference: Vec<f64>,
    pub noise: Vec<f64>,
    pub uncertainty: Vec<f64>,
}

pub fn mf_terms(ls: &LargeScaleState, power: &UplinkPower, cfg: &SimulationConfig) -> Result<MfTerms> {
    check_inputs(ls, &power.eta, cfg)?;
    let eta = &power.eta;
    let p_u = cfg.p_u_w;
    let noise = cfg.noise_power_w();
    let n_t = cfg.antennas_per_ap() as f64;
    let (n_ap, k) = ls.beta.shape();
    let mut t = MfTerms {
        signal: vec![0.0; k],
        estimation_error: vec![0.0; k],
        interference: vec![0.0; k],
        noise: vec![0.0; k],
        uncertainty: vec![0.0; k],
    };
    for u in 0..k {
        let a = ls.alpha.column(u);
        let b = ls.beta.column(u);
        let sum_a: f64 = a.sum();
        let sum_a2: f64 = a.iter().map(|x| x * x).sum();
        let sum_err: f64 = (0..n_ap).map(|q| (b[q] - a[q]) * a[q]).sum();
        let mut interf = 0.0;
        for i in (0..k).filter(|i| *i != u) {
            let cross: f64 = (0..n_ap).map(|q| ls.beta[(q, i)] * a[q]).sum();
            interf += eta[i] * cross;
        }
        t.signal[u] = p_u * eta[u] * n_t * n_t * sum_a * sum_a;
        t.estimation_error[u] = p_u * eta[u] * n_t * sum_err;
        t.interference[u] = p_u * n_t * interf;
        t.noise[u] = noise * n_t * sum_a;
        t.uncertainty[u] = p_u * eta[u] * n_t * sum_a2;
    }
    Ok(t)
}

/// Matched filtering with full CSI at the receiver.
pub fn mf_sinr_full_csi(
    ls: &LargeScaleState,
    power: &UplinkPower,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    let t = mf_terms(ls, power, cfg)?;
    let gamma = (0..t.signal.len())
        .map(|u| {
            ratio(
                t.signal[u],
                t.estimation_error[u] + t.interference[u] + t.noise[u],
            )
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Matched filtering when the receiver knows only channel statistics: the
/// gain fluctuation joins the interference.
pub fn mf_sinr_stats_only(
    ls: &LargeScaleState,
    power: &UplinkPower,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    let t = mf_terms(ls, power, cfg)?;
    let gamma = (0..t.signal.len())
        .map(|u| {
            ratio(
                t.signal[u],
                t.estimation_error[u] + t.interference[u] + t.noise[u] + t.uncertainty[u],
            )
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Monte Carlo `φ_k = E[(ĜᴴĜ)⁻¹]_kk` over `cfg.n_channel_samples` draws.
pub fn estimate_phi<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(estimate_zf_moments(ls, cfg, rng)?.phi())
}

/// Zero-forcing detection SINR.
///
/// The estimation-error leakage into output k weighs each antenna's error
/// variance by the detector's per-antenna energy,
/// `Σ_m E|A_km|² (β_mi − α_mi)`, and the noise term by `φ_k`.
pub fn zf_sinr(
    ls: &LargeScaleState,
    power: &UplinkPower,
    moments: &ZfMoments,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    check_inputs(ls, &power.eta, cfg)?;
    let k = ls.users();
    if moments.psi.shape() != (cfg.antennas, k) {
        return Err(Error::Dimension(format!(
            "moments are {:?}, expected {:?}",
            moments.psi.shape(),
            (cfg.antennas, k)
        )));
    }
    let phi = moments.phi();
    check_phi(&phi)?;
    // leak[(u, i)] = Σ_m ψ_um e_mi
    let leak = moments.weighted(&error_per_antenna(ls, cfg.antennas_per_ap()));
    let p_u = cfg.p_u_w;
    let noise = cfg.noise_power_w();
    let gamma = (0..k)
        .map(|u| {
            let err: f64 = (0..k).map(|i| power.eta[i] * leak[(u, i)]).sum();
            ratio(p_u * power.eta[u], p_u * err + noise * phi[u])
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Looser ZF bound that replaces the per-antenna weighting in [`zf_sinr`]
/// with `φ_k · Σ_m (β_mi − α_mi)`. By Cauchy–Schwarz it never exceeds
/// [`zf_sinr`].
pub fn zf_sinr_norm_bound(
    ls: &LargeScaleState,
    power: &UplinkPower,
    phi: &[f64],
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    check_inputs(ls, &power.eta, cfg)?;
    if phi.len() != ls.users() {
        return Err(Error::Dimension(format!("{} phi values", phi.len())));
    }
    check_phi(phi)?;
    let n_t = cfg.antennas_per_ap() as f64;
    let err = ls.error_variance();
    let total_err: f64 = (0..ls.users())
        .map(|i| power.eta[i] * n_t * err.column(i).sum())
        .sum();
    let p_u = cfg.p_u_w;
    let noise = cfg.noise_power_w();
    let gamma = (0..ls.users())
        .map(|u| ratio(p_u * power.eta[u], phi[u] * (p_u * total_err + noise)))
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

fn check_phi(phi: &[f64]) -> Result<()> {
    for (user, &value) in phi.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidEstimate { user, value });
        }
    }
    Ok(())
}

/// Per-user Monte Carlo estimates of the matched-filter output terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MfOracleUser {
    pub signal: Estimate,
    pub uncertainty: Estimate,
    pub estimation_error: Estimate,
    pub interference: Estimate,
    pub noise: Estimate,
    /// Coherent signal power over the power of the three interference terms.
    pub sinr_full_csi: Estimate,
    /// Use-and-forget SINR of the whole detector output.
    pub sinr_stats_only: Estimate,
    /// Largest |y_k − (S0 + I1 + I2 + I3)| seen; zero up to rounding.
    pub decomposition_residual: f64,
}

#[derive(Default, Clone)]
struct MfBatch {
    s0: Projection,
    interference: Running,
}

impl crate::stats::Merge for MfBatch {
    fn merge_from(&mut self, o: &Self) {
        self.s0.merge(&o.s0);
        self.interference.merge(&o.interference);
    }
    fn is_empty(&self) -> bool {
        self.interference.count() == 0
    }
}

/// Simulates the matched-filter output `y_k = ĝ_kᴴ(√p_u G D_η^{1/2} x + n)`
/// term by term.
pub fn mf_variance_oracle<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    power: &UplinkPower,
    cfg: &SimulationConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<MfOracleUser>> {
    check_inputs(ls, &power.eta, cfg)?;
    if n_samples == 0 {
        return Err(Error::EmptySamples);
    }
    let k = ls.users();
    let n_t = cfg.antennas_per_ap();
    let p_u = cfg.p_u_w;
    let noise = cfg.noise_power_w();
    let amp: Vec<f64> = power.eta.iter().map(|e| (p_u * e).sqrt()).collect();

    let mut main: Vec<Batched<MfBatch>> = vec![Batched::new(n_samples, DEFAULT_BATCHES); k];
    let mut stats: Vec<Batched<Projection>> = vec![Batched::new(n_samples, DEFAULT_BATCHES); k];
    let mut i1p = vec![Running::default(); k];
    let mut i2p = vec![Running::default(); k];
    let mut i3p = vec![Running::default(); k];
    let mut residual = vec![0.0f64; k];

    for s in 0..n_samples {
        let ch = draw_channel(ls, n_t, rng)?;
        let x: Vec<C64> = (0..k).map(|_| complex_normal(rng, 1.0)).collect();
        let m = ch.g_hat.nrows();
        let n: Vec<C64> = (0..m).map(|_| complex_normal(rng, noise)).collect();
        let mut received = vec![C64::new(0.0, 0.0); m];
        for i in 0..k {
            let xi = x[i] * amp[i];
            for (r, g) in received.iter_mut().zip(ch.g_true.column(i).iter()) {
                *r += g * xi;
            }
        }
        for (r, w) in received.iter_mut().zip(&n) {
            *r += w;
        }
        for u in 0..k {
            let gh = ch.g_hat.column(u);
            let dot = |v: &mut dyn Iterator<Item = C64>| -> C64 {
                gh.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
            };
            let norm2: f64 = gh.iter().map(|z| z.norm_sqr()).sum();
            let s0 = x[u] * (amp[u] * norm2);
            let i1 = x[u] * amp[u] * dot(&mut ch.g_err.column(u).iter().copied());
            let mut i2 = C64::new(0.0, 0.0);
            for i in (0..k).filter(|i| *i != u) {
                i2 += x[i] * amp[i] * dot(&mut ch.g_true.column(i).iter().copied());
            }
            let i3 = dot(&mut n.iter().copied());
            let y = dot(&mut received.iter().copied());
            let interf = i1 + i2 + i3;
            residual[u] = residual[u].max((y - s0 - interf).norm());

            let b = main[u].batch_mut(s);
            b.s0.push(s0, x[u]);
            b.interference.push(interf.norm_sqr());
            stats[u].batch_mut(s).push(y, x[u]);
            i1p[u].push(i1.norm_sqr());
            i2p[u].push(i2.norm_sqr());
            i3p[u].push(i3.norm_sqr());
        }
    }

    Ok((0..k)
        .map(|u| MfOracleUser {
            signal: main[u].estimate(|b| b.s0.coherent_power()),
            uncertainty: main[u].estimate(|b| b.s0.residual_power()),
            estimation_error: i1p[u].estimate(),
            interference: i2p[u].estimate(),
            noise: i3p[u].estimate(),
            sinr_full_csi: main[u].estimate(|b| b.s0.coherent_power() / b.interference.mean()),
            sinr_stats_only: stats[u].sinr(),
            decomposition_residual: residual[u],
        })
        .collect())
}

/// Link-level ZF detection: per draw, detects `y = A(√p_u G D_η^{1/2} x + n)`
/// with `A` the pseudo-inverse of Ĝ and records the empirical SINR.
pub fn simulate_uplink_zf<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    power: &UplinkPower,
    cfg: &SimulationConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<LinkReport> {
    check_inputs(ls, &power.eta, cfg)?;
    if n_samples == 0 {
        return Err(Error::EmptySamples);
    }
    let k = ls.users();
    let n_t = cfg.antennas_per_ap();
    let noise = cfg.noise_power_w();
    let amp: Vec<f64> = power.eta.iter().map(|e| (cfg.p_u_w * e).sqrt()).collect();
    let mut acc = LinkAccumulator::new(k, n_samples);
    let mut redraws = 0;
    let mut s = 0;
    while s < n_samples {
        let ch = draw_channel(ls, n_t, rng)?;
        let Some(pinv) = pseudo_inverse(&ch.g_hat) else {
            redraws += 1;
            if redraws * 100 > n_samples {
                return Err(Error::SingularGram {
                    redraws,
                    samples: n_samples,
                });
            }
            continue;
        };
        // effective[(u, i)] = a_u · g_i · √(p_u η_i)
        let a = pinv.rows_t.transpose();
        let mut effective: DMatrix<C64> = &a * &ch.g_true;
        for i in 0..k {
            effective.column_mut(i).scale_mut(amp[i]);
        }
        let x: Vec<C64> = (0..k).map(|_| complex_normal(rng, 1.0)).collect();
        let n: Vec<C64> = (0..ch.g_hat.nrows()).map(|_| complex_normal(rng, noise)).collect();
        for u in 0..k {
            let row: Vec<C64> = effective.row(u).iter().copied().collect();
            let an: C64 = pinv.row(u).iter().zip(&n).map(|(a, w)| a * w).sum();
            acc.push(s, u, &row, &x, an);
        }
        s += 1;
    }
    Ok(acc.finish(redraws))
}

/// Applies detector rows to a received vector.
pub fn zf_detect(pinv: &crate::linalg::PseudoInverse, received: &[C64]) -> Vec<C64> {
    (0..pinv.users())
        .map(|u| pinv.row(u).iter().zip(received).map(|(a, r)| a * r).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn unit_noise_cfg(antennas: usize, aps: usize, users: usize) -> SimulationConfig {
        // 30 dBm/Hz over 1 Hz with 0 dB NF: σ² = 1 W.
        SimulationConfig {
            antennas,
            aps,
            users,
            p_u_w: 1.0,
            p_d_w: 1.0,
            noise_density_dbm_hz: 30.0,
            bandwidth_hz: 1.0,
            noise_figure_db: 0.0,
            ..Default::default()
        }
    }

    fn state(n_ap: usize, beta: &[f64], alpha: &[f64]) -> LargeScaleState {
        let k = beta.len() / n_ap;
        LargeScaleState {
            beta: DMatrix::from_row_slice(n_ap, k, beta),
            alpha: DMatrix::from_row_slice(n_ap, k, alpha),
        }
    }

    #[test]
    fn single_user_single_ap_reduces() {
        // γ = p_u·η·N·α / (p_u·η·(β−α) + σ²)
        let n = 8;
        let cfg = unit_noise_cfg(n, 1, 1);
        let (b, a, eta) = (2.0, 0.5, 0.7);
        let ls = state(1, &[b], &[a]);
        let g = mf_sinr_full_csi(&ls, &UplinkPower::new(vec![eta]).unwrap(), &cfg).unwrap();
        let expect = eta * n as f64 * a / (eta * (b - a) + 1.0);
        assert!((g.gamma[0] / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_csi_without_noise_is_clamped() {
        let cfg = SimulationConfig {
            noise_density_dbm_hz: -1e4,
            ..unit_noise_cfg(4, 1, 1)
        };
        let ls = state(1, &[1.0], &[1.0]);
        let g = mf_sinr_full_csi(&ls, &UplinkPower::full(1), &cfg).unwrap();
        assert!(g.gamma[0] > 1e300);
        assert!(g.se[0].is_finite());
    }

    #[test]
    fn unreachable_user_has_zero_sinr() {
        let cfg = unit_noise_cfg(4, 2, 2);
        let ls = state(2, &[1.0, 1.0, 1.0, 1.0], &[0.5, 0.0, 0.5, 0.0]);
        let p = UplinkPower::full(2);
        assert_eq!(mf_sinr_full_csi(&ls, &p, &cfg).unwrap().gamma[1], 0.0);
        assert_eq!(mf_sinr_stats_only(&ls, &p, &cfg).unwrap().gamma[1], 0.0);
    }

    #[test]
    fn stats_only_symmetric_cell() {
        // all β, α equal, η = 1: γ = p_u·M·α² / (p_u·K·α·β + σ²·α)
        let cfg = unit_noise_cfg(4, 1, 2);
        let (b, a) = (3.0, 1.5);
        let ls = state(1, &[b, b], &[a, a]);
        let g = mf_sinr_stats_only(&ls, &UplinkPower::full(2), &cfg).unwrap();
        let expect = 4.0 * a * a / (2.0 * a * b + a);
        assert!((g.gamma[0] / expect - 1.0).abs() < 1e-12);
        assert!((g.gamma[1] / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_bounds_enforced() {
        assert!(UplinkPower::new(vec![0.5, 1.2]).is_err());
        assert!(UplinkPower::new(vec![-0.1]).is_err());
        assert_eq!(UplinkPower::full(3).eta, vec![1.0; 3]);
    }

    #[test]
    fn zf_perfect_csi_and_silent_user() {
        let cfg = unit_noise_cfg(8, 1, 2);
        let ls = state(1, &[1.0, 2.0], &[1.0, 2.0]);
        let mo = crate::moments::estimate_zf_moments_with(&ls, 8, 200, &mut stream(1, 0, Purpose::Channel)).unwrap();
        let phi = mo.phi();
        let p = UplinkPower::new(vec![1.0, 0.0]).unwrap();
        let g = zf_sinr(&ls, &p, &mo, &cfg).unwrap();
        assert!((g.gamma[0] - 1.0 / phi[0]).abs() < 1e-9 * g.gamma[0]);
        assert_eq!(g.gamma[1], 0.0);
        let bound = zf_sinr_norm_bound(&ls, &p, &phi, &cfg).unwrap();
        assert!((bound.gamma[0] - g.gamma[0]).abs() < 1e-9 * g.gamma[0]);
    }

    #[test]
    fn zf_rejects_bad_phi() {
        let cfg = unit_noise_cfg(8, 1, 2);
        let ls = state(1, &[1.0, 2.0], &[0.5, 1.0]);
        let err = zf_sinr_norm_bound(&ls, &UplinkPower::full(2), &[0.1, 0.0], &cfg).unwrap_err();
        assert_eq!(err, Error::InvalidEstimate { user: 1, value: 0.0 });
    }

    #[test]
    fn oracle_trivial_cases() {
        let cfg = unit_noise_cfg(4, 2, 2);
        let ls = state(2, &[1.0, 0.5, 0.8, 2.0], &[0.6, 0.2, 0.3, 1.1]);
        let p = UplinkPower::new(vec![0.0, 1.0]).unwrap();
        let o = mf_variance_oracle(&ls, &p, &cfg, 500, &mut stream(2, 0, Purpose::Auxiliary)).unwrap();
        assert_eq!(o[0].signal.value, 0.0);
        assert_eq!(o[0].estimation_error.value, 0.0);
        assert!(o.iter().all(|u| u.decomposition_residual < 1e-12));

        let single = state(2, &[1.0, 0.8], &[0.6, 0.3]);
        let cfg1 = unit_noise_cfg(4, 2, 1);
        let o = mf_variance_oracle(&single, &UplinkPower::full(1), &cfg1, 200, &mut stream(3, 0, Purpose::Auxiliary)).unwrap();
        assert_eq!(o[0].interference.value, 0.0);
    }

    #[test]
    fn zf_cancels_interference_with_perfect_csi() {
        let cfg = SimulationConfig {
            noise_density_dbm_hz: -1e4,
            ..unit_noise_cfg(8, 1, 3)
        };
        let ls = state(1, &[1.0, 0.5, 2.0], &[1.0, 0.5, 2.0]);
        let p = UplinkPower::new(vec![1.0, 0.25, 0.5]).unwrap();
        let mut rng = stream(4, 0, Purpose::Auxiliary);
        let ch = draw_channel(&ls, 8, &mut rng).unwrap();
        let pinv = pseudo_inverse(&ch.g_hat).unwrap();
        let x: Vec<C64> = (0..3).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let mut r = vec![C64::new(0.0, 0.0); 8];
        for i in 0..3 {
            for m in 0..8 {
                r[m] += ch.g_true[(m, i)] * x[i] * p.eta[i].sqrt();
            }
        }
        let y = zf_detect(&pinv, &r);
        for i in 0..3 {
            assert!((y[i] - x[i] * p.eta[i].sqrt()).norm() < 1e-12);
        }
        let rep = simulate_uplink_zf(&ls, &p, &cfg, 200, &mut rng).unwrap();
        for u in &rep.users {
            assert!(u.inter_user_power < 1e-20 * u.own_power);
        }
    }
}
