//! Downlink precoding: conjugate beamforming (CBF) and zero-forcing
//! precoding (ZFP).
//!
//! Users decode against the mean effective gain; there are no downlink
//! pilots. In the ZFP expressions the estimate matrix is read as `K × M`
//! (users by antennas), the only orientation under which the products are
//! conformable.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{complex_normal, draw_channel, C64};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::link::{LinkAccumulator, LinkReport};
use crate::linalg::pseudo_inverse;
use crate::moments::{error_per_antenna, estimate_zf_moments, ZfMoments};
use crate::scenario::LargeScaleState;
use crate::sinr::{ratio, SinrVector};
use crate::stats::{Estimate, Running};

/// Slack allowed on the per-AP power constraint for rounding.
const CONSTRAINT_TOL: f64 = 1e-9;

/// Per-AP, per-user CBF power coefficients (`N_AP × K`).
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkPowerCbf {
    pub eta: DMatrix<f64>,
}

impl DownlinkPowerCbf {
    /// Checks non-negativity and `Σ_k η_qk α_qk ≤ 1` for every AP.
    pub fn new(eta: DMatrix<f64>, ls: &LargeScaleState) -> Result<Self> {
        let p = Self { eta };
        p.check(ls)?;
        Ok(p)
    }

    pub fn check(&self, ls: &LargeScaleState) -> Result<()> {
        if self.eta.shape() != ls.alpha.shape() {
            return Err(Error::Dimension(format!(
                "CBF power is {:?}, state is {:?}",
                self.eta.shape(),
                ls.alpha.shape()
            )));
        }
        if let Some(bad) = self.eta.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(Error::InvariantViolation(format!(
                "CBF power coefficient {bad} is not a nonnegative number"
            )));
        }
        for q in 0..ls.aps() {
            let load = self.load(ls, q);
            if load > 1.0 + CONSTRAINT_TOL {
                return Err(Error::InvariantViolation(format!(
                    "AP {q} power load {load} exceeds 1"
                )));
            }
        }
        Ok(())
    }

    /// `Σ_k η_qk α_qk`, the fraction of per-antenna power AP q uses.
    pub fn load(&self, ls: &LargeScaleState, q: usize) -> f64 {
        self.eta
            .row(q)
            .iter()
            .zip(ls.alpha.row(q).iter())
            .map(|(e, a)| e * a)
            .sum()
    }
}

/// Common-across-antennas ZFP power coefficients, one per user.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkPowerZfp {
    pub eta: Vec<f64>,
}

impl DownlinkPowerZfp {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(Error::InvariantViolation(format!(
                "ZFP power coefficient {bad} is not a nonnegative number"
            )));
        }
        Ok(Self { eta })
    }
}

/// `χ[(i, k)]`: error leakage of user k's channel into ZFP stream i.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub chi: DMatrix<f64>,
}

impl ChiMatrix {
    /// `χ[(i, k)] = Σ_m E|A_im|² (β_mk − α_mk)`.
    pub fn from_moments(ls: &LargeScaleState, moments: &ZfMoments, n_t: usize) -> Self {
        Self {
            chi: moments.weighted(&error_per_antenna(ls, n_t)),
        }
    }
}

/// CBF effective SINR for arbitrary per-AP power coefficients.
pub fn cbf_sinr(
    ls: &LargeScaleState,
    power: &DownlinkPowerCbf,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    ls.check(cfg)?;
    power.check(ls)?;
    let p_d = cfg.p_d_w;
    let noise = cfg.noise_power_w();
    let n_t = cfg.antennas_per_ap() as f64;
    let loads: Vec<f64> = (0..ls.aps()).map(|q| power.load(ls, q)).collect();
    let gamma = (0..ls.users())
        .map(|k| {
            let coherent: f64 = (0..ls.aps())
                .map(|q| power.eta[(q, k)].sqrt() * ls.alpha[(q, k)])
                .sum();
            let spread: f64 = (0..ls.aps()).map(|q| ls.beta[(q, k)] * loads[q]).sum();
            ratio(
                p_d * n_t * n_t * coherent * coherent,
                noise + p_d * n_t * spread,
            )
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Monte Carlo `χ` over `cfg.n_channel_samples` draws of the estimates.
pub fn estimate_chi<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<ChiMatrix> {
    let moments = estimate_zf_moments(ls, cfg, rng)?;
    Ok(ChiMatrix::from_moments(ls, &moments, cfg.antennas_per_ap()))
}

/// ZFP effective SINR `p_d η_k / (σ² + p_d Σ_i η_i χ[(i, k)])`.
pub fn zfp_sinr(
    power: &DownlinkPowerZfp,
    chi: &ChiMatrix,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    let k = power.eta.len();
    if chi.chi.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "chi is {:?} for {k} users",
            chi.chi.shape()
        )));
    }
    let p_d = cfg.p_d_w;
    let noise = cfg.noise_power_w();
    let gamma = (0..k)
        .map(|u| {
            let leak: f64 = (0..k).map(|i| power.eta[i] * chi.chi[(i, u)]).sum();
            ratio(p_d * power.eta[u], noise + p_d * leak)
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Cellular ZFP, where `χ[(i, k)]` factors as `(β_k − α_k) φ_i`.
pub fn zfp_sinr_cellular(
    power: &DownlinkPowerZfp,
    ls: &LargeScaleState,
    phi: &[f64],
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    if ls.aps() != 1 {
        return Err(Error::Misuse(format!(
            "cellular ZFP needs a single AP, state has {}",
            ls.aps()
        )));
    }
    let k = ls.users();
    if power.eta.len() != k || phi.len() != k {
        return Err(Error::Dimension(format!(
            "{} power coefficients and {} phi values for {k} users",
            power.eta.len(),
            phi.len()
        )));
    }
    let p_d = cfg.p_d_w;
    let noise = cfg.noise_power_w();
    let common: f64 = power.eta.iter().zip(phi).map(|(e, f)| e * f).sum();
    let gamma = (0..k)
        .map(|u| {
            let err = ls.beta[(0, u)] - ls.alpha[(0, u)];
            ratio(p_d * power.eta[u], noise + p_d * err * common)
        })
        .collect();
    Ok(SinrVector::from_gamma(gamma))
}

/// Precoder and power for [`simulate_downlink`].
#[derive(Debug, Clone, Copy)]
pub enum Precoding<'a> {
    Cbf(&'a DownlinkPowerCbf),
    Zfp(&'a DownlinkPowerZfp),
}

/// Link-level result plus the empirical per-antenna transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkReport {
    pub link: LinkReport,
    /// `E|t_m|² / p_d` for every antenna m.
    pub antenna_load: Vec<Estimate>,
}

/// Simulates `r = √p_d Gᵀ B u + w` with `B` built from the estimates: CBF
/// weights `√η_mk ĝ*_mk`, ZFP weights `[B]_mi = A_im √η_i` where `A` is the
/// pseudo-inverse of Ĝ (so `Ĝᵀ B = D_η^{1/2}`).
pub fn simulate_downlink<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    precoding: Precoding<'_>,
    cfg: &SimulationConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<DownlinkReport> {
    ls.check(cfg)?;
    if n_samples == 0 {
        return Err(Error::EmptySamples);
    }
    let k = ls.users();
    let n_t = cfg.antennas_per_ap();
    let m = cfg.antennas;
    match precoding {
        Precoding::Cbf(p) => p.check(ls)?,
        Precoding::Zfp(p) if p.eta.len() != k => {
            return Err(Error::Dimension(format!(
                "{} ZFP coefficients for {k} users",
                p.eta.len()
            )))
        }
        Precoding::Zfp(_) => {
            if k >= m {
                return Err(Error::Dimension(format!(
                    "zero forcing needs M > K, got M = {m}, K = {k}"
                )));
            }
        }
    }
    let amp_d = cfg.p_d_w.sqrt();
    let noise = cfg.noise_power_w();
    let mut acc = LinkAccumulator::new(k, n_samples);
    let mut load = vec![Running::default(); m];
    let mut redraws = 0;
    let mut s = 0;
    while s < n_samples {
        let ch = draw_channel(ls, n_t, rng)?;
        let b: DMatrix<C64> = match precoding {
            Precoding::Cbf(p) => DMatrix::from_fn(m, k, |row, i| {
                ch.g_hat[(row, i)].conj() * p.eta[(row / n_t, i)].sqrt()
            }),
            Precoding::Zfp(p) => {
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
                let mut b = pinv.rows_t;
                for i in 0..k {
                    b.column_mut(i).scale_mut(p.eta[i].sqrt());
                }
                b
            }
        };
        for (row, l) in load.iter_mut().enumerate() {
            l.push(b.row(row).iter().map(|z| z.norm_sqr()).sum());
        }
        // effective[(u, i)] = √p_d g_uᵀ b_i
        let effective = ch.g_true.transpose() * &b * C64::new(amp_d, 0.0);
        let symbols: Vec<C64> = (0..k).map(|_| complex_normal(rng, 1.0)).collect();
        for u in 0..k {
            let row: Vec<C64> = effective.row(u).iter().copied().collect();
            acc.push(s, u, &row, &symbols, complex_normal(rng, noise));
        }
        s += 1;
    }
    Ok(DownlinkReport {
        link: acc.finish(redraws),
        antenna_load: load.iter().map(Running::estimate).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::estimate_zf_moments_with;
    use crate::rng::{stream, Purpose};

    fn unit_cfg(antennas: usize, aps: usize, users: usize) -> SimulationConfig {
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
    fn cbf_single_user_cell() {
        let m = 16;
        let cfg = unit_cfg(m, 1, 1);
        let ls = state(1, &[1.0], &[1.0]);
        let p = DownlinkPowerCbf::new(DMatrix::from_element(1, 1, 1.0), &ls).unwrap();
        let g = cbf_sinr(&ls, &p, &cfg).unwrap();
        let mf = (m * m) as f64 / (1.0 + m as f64);
        assert!((g.gamma[0] / mf - 1.0).abs() < 1e-12);

        let zero = DownlinkPowerCbf::new(DMatrix::zeros(1, 1), &ls).unwrap();
        assert_eq!(cbf_sinr(&ls, &zero, &cfg).unwrap().gamma[0], 0.0);
    }

    #[test]
    fn cbf_power_constraint_checked() {
        let ls = state(1, &[1.0, 1.0], &[0.5, 0.5]);
        assert!(DownlinkPowerCbf::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &ls).is_ok());
        assert!(DownlinkPowerCbf::new(DMatrix::from_row_slice(1, 2, &[1.5, 1.0]), &ls).is_err());
        assert!(DownlinkPowerCbf::new(DMatrix::from_row_slice(1, 2, &[-0.1, 1.0]), &ls).is_err());
    }

    #[test]
    fn zfp_hand_values() {
        let cfg = unit_cfg(8, 1, 2);
        let chi = ChiMatrix {
            chi: DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]),
        };
        let p = DownlinkPowerZfp::new(vec![2.0, 0.5]).unwrap();
        let g = zfp_sinr(&p, &chi, &cfg).unwrap();
        // user 0: 2 / (1 + 2·0.1 + 0.5·0.3); user 1: 0.5 / (1 + 2·0.2 + 0.5·0.4)
        assert!((g.gamma[0] - 2.0 / 1.35).abs() < 1e-12);
        assert!((g.gamma[1] - 0.5 / 1.6).abs() < 1e-12);

        let perfect = ChiMatrix { chi: DMatrix::zeros(2, 2) };
        assert_eq!(zfp_sinr(&p, &perfect, &cfg).unwrap().gamma, vec![2.0, 0.5]);
    }

    #[test]
    fn cellular_zfp_rejects_distributed_state() {
        let cfg = unit_cfg(4, 2, 1);
        let ls = state(2, &[1.0, 1.0], &[0.5, 0.5]);
        let p = DownlinkPowerZfp::new(vec![1.0]).unwrap();
        assert!(matches!(
            zfp_sinr_cellular(&p, &ls, &[1.0], &cfg),
            Err(Error::Misuse(_))
        ));
    }

    #[test]
    fn chi_vanishes_with_perfect_csi() {
        let ls = state(2, &[1.0, 0.5, 0.2, 2.0], &[1.0, 0.5, 0.2, 2.0]);
        let mo = estimate_zf_moments_with(&ls, 4, 50, &mut stream(1, 0, Purpose::Channel)).unwrap();
        let chi = ChiMatrix::from_moments(&ls, &mo, 4);
        assert!(chi.chi.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn zfp_perfect_csi_delivers_exact_symbol() {
        let cfg = SimulationConfig {
            noise_density_dbm_hz: -1e4,
            ..unit_cfg(12, 3, 3)
        };
        let ls = state(3, &[1.0, 0.3, 2.0, 0.5, 0.7, 1.1, 0.2, 0.9, 0.4], &[1.0, 0.3, 2.0, 0.5, 0.7, 1.1, 0.2, 0.9, 0.4]);
        let p = DownlinkPowerZfp::new(vec![0.04, 0.01, 0.09]).unwrap();
        let rep = simulate_downlink(&ls, Precoding::Zfp(&p), &cfg, 300, &mut stream(5, 0, Purpose::Auxiliary)).unwrap();
        for (u, user) in rep.link.users.iter().enumerate() {
            assert!((user.gain - C64::new(p.eta[u].sqrt(), 0.0)).norm() < 1e-12);
            assert!(user.inter_user_power < 1e-20 * user.own_power);
        }
        assert_eq!(rep.antenna_load.len(), 12);
    }
}
