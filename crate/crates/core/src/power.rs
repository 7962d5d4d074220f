//! Power control: uplink full power, CBF per-AP full power, ZFP common
//! coefficient and cellular CBF max-min.

use nalgebra::DMatrix;
use rand::Rng;

use crate::config::SimulationConfig;
use crate::downlink::{DownlinkPowerCbf, DownlinkPowerZfp};
use crate::error::{Error, Result};
use crate::moments::{estimate_zf_moments, ZfMoments};
use crate::scenario::LargeScaleState;
use crate::uplink::UplinkPower;

pub fn ul_full_power(users: usize) -> UplinkPower {
    UplinkPower::full(users)
}

/// Every AP spends its full budget with one coefficient for all users,
/// `η_q = 1 / Σ_k α_qk`. An AP that hears nobody stays silent.
pub fn cbf_full_power(ls: &LargeScaleState) -> DownlinkPowerCbf {
    let mut eta = DMatrix::zeros(ls.aps(), ls.users());
    for q in 0..ls.aps() {
        let total: f64 = ls.alpha.row(q).sum();
        if total > 0.0 {
            eta.row_mut(q).fill(1.0 / total);
        } else {
            log::warn!("AP {q} has no usable channel estimate and is switched off");
        }
    }
    DownlinkPowerCbf { eta }
}

/// Common ZFP coefficient `(max_m Σ_k δ_km)⁻¹` with `δ_km = E|A_km|²`.
pub fn zfp_subopt_power<R: Rng + ?Sized>(
    ls: &LargeScaleState,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<DownlinkPowerZfp> {
    zfp_power_from_moments(&estimate_zf_moments(ls, cfg, rng)?)
}

pub fn zfp_power_from_moments(moments: &ZfMoments) -> Result<DownlinkPowerZfp> {
    let peak = moments.antenna_load().into_iter().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidEstimate {
            user: 0,
            value: peak,
        });
    }
    DownlinkPowerZfp::new(vec![1.0 / peak; moments.psi.ncols()])
}

/// Max-min fair CBF power for a single-AP cell and the common SINR `t` it
/// achieves.
///
/// With the budget fully used, user k's SINR is
/// `p_d M² η_k α_k² / (σ² + p_d M β_k)`; equalizing at `t` gives
/// `η_k = t w_k / α_k` with `w_k = (σ² + p_d M β_k) / (p_d M² α_k)` and
/// `t = 1 / Σ_k w_k`.
pub fn cbf_maxmin_cellular(
    ls: &LargeScaleState,
    cfg: &SimulationConfig,
) -> Result<(DownlinkPowerCbf, f64)> {
    if ls.aps() != 1 {
        return Err(Error::Misuse(format!(
            "max-min CBF is defined for a single AP, state has {}",
            ls.aps()
        )));
    }
    let m = cfg.antennas as f64;
    let p_d = cfg.p_d_w;
    let noise = cfg.noise_power_w();
    let mut w = Vec::with_capacity(ls.users());
    for k in 0..ls.users() {
        let a = ls.alpha[(0, k)];
        if !(a > 0.0) {
            return Err(Error::Infeasible(format!(
                "user {k} has no channel estimate and cannot be equalized"
            )));
        }
        w.push((noise + p_d * m * ls.beta[(0, k)]) / (p_d * m * m * a));
    }
    let t = 1.0 / w.iter().sum::<f64>();
    let eta = DMatrix::from_fn(1, ls.users(), |_, k| t * w[k] / ls.alpha[(0, k)]);
    Ok((DownlinkPowerCbf { eta }, t))
}
