//! Topologies, COST-Hata path loss with log-normal shadowing, and the
//! MMSE estimate statistics that drive every closed-form SINR.
//!
//! Distances inside the three-slope model are in kilometres and the carrier
//! frequency is in MHz, which reproduces L0 = 140.72 dB at 1900 MHz.
//! Large-scale statistics are stored per AP (`N_AP × K`); every antenna of an
//! AP sees the same β and α.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SimulationConfig;
use crate::error::{Error, Result};

/// Reference loss L0 (dB) of the COST-Hata model.
pub fn l0_db(f_c_mhz: f64, h_ap: f64, h_ue: f64) -> Result<f64> {
    if !(f_c_mhz > 0.0) {
        return Err(Error::Domain {
            what: "carrier frequency",
            expected: "> 0 MHz",
            value: f_c_mhz,
        });
    }
    if !(h_ap > 0.0) {
        return Err(Error::Domain {
            what: "AP height",
            expected: "> 0 m",
            value: h_ap,
        });
    }
    if !(h_ue >= 0.0) {
        return Err(Error::Domain {
            what: "UE height",
            expected: ">= 0 m",
            value: h_ue,
        });
    }
    let lf = f_c_mhz.log10();
    Ok(46.3 + 33.9 * lf - 13.82 * h_ap.log10() - (1.1 * lf - 0.7) * h_ue + 1.56 * lf - 0.8)
}

/// Three-slope path-loss model. `gain_db` returns the signed gain −L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub l0_db: f64,
    pub d0_km: f64,
    pub d1_km: f64,
}

impl PathLossModel {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        Ok(Self {
            l0_db: l0_db(cfg.f_c_mhz, cfg.h_ap_m, cfg.h_ue_m)?,
            d0_km: cfg.d0_km,
            d1_km: cfg.d1_km,
        })
    }

    pub fn gain_db(&self, d_km: f64) -> f64 {
        let d = d_km.max(0.0);
        if d > self.d1_km {
            -self.l0_db - 35.0 * d.log10()
        } else if d > self.d0_km {
            -self.l0_db - 10.0 * (self.d1_km.powf(1.5) * d * d).log10()
        } else {
            -self.l0_db - 10.0 * (self.d1_km.powf(1.5) * self.d0_km * self.d0_km).log10()
        }
    }
}

/// Path gain in dB (−L) at `d_km` kilometres under `cfg`'s propagation parameters.
pub fn path_loss_db(d_km: f64, cfg: &SimulationConfig) -> Result<f64> {
    if !(d_km >= 0.0) {
        return Err(Error::Domain {
            what: "distance",
            expected: ">= 0 km",
            value: d_km,
        });
    }
    Ok(PathLossModel::from_config(cfg)?.gain_db(d_km))
}

pub fn noise_power_watts(cfg: &SimulationConfig) -> f64 {
    let dbm = cfg.noise_density_dbm_hz + 10.0 * cfg.bandwidth_hz.log10() + cfg.noise_figure_db;
    10f64.powf((dbm - 30.0) / 10.0)
}

/// A planar point in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
}

/// UEs uniform over the square; APs uniform too, except a lone AP (the
/// cellular base station) sits at the centre. UEs are drawn first so that
/// layouts sharing a stream also share user positions.
pub fn generate_topology<R: Rng + ?Sized>(cfg: &SimulationConfig, rng: &mut R) -> Topology {
    let side = cfg.area_side_m;
    let uniform_point = |rng: &mut R| Point {
        x: rng.random::<f64>() * side,
        y: rng.random::<f64>() * side,
    };
    let ue_positions = (0..cfg.users).map(|_| uniform_point(rng)).collect();
    let ap_positions = if cfg.aps == 1 {
        vec![Point {
            x: side / 2.0,
            y: side / 2.0,
        }]
    } else {
        (0..cfg.aps).map(|_| uniform_point(rng)).collect()
    };
    Topology {
        ap_positions,
        ue_positions,
    }
}

/// Per-AP large-scale gains β and MMSE estimate variances α, both `N_AP × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleState {
    pub beta: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
}

impl LargeScaleState {
    /// Builds the state from β, deriving α with the MMSE rule.
    pub fn from_beta(beta: DMatrix<f64>, p_u: f64, noise_power: f64) -> Self {
        let alpha = beta.map(|b| mmse_variance(b, p_u, noise_power));
        Self { beta, alpha }
    }

    pub fn aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn users(&self) -> usize {
        self.beta.ncols()
    }

    /// Estimation-error variances β − α.
    pub fn error_variance(&self) -> DMatrix<f64> {
        &self.beta - &self.alpha
    }

    /// Checks shapes against `cfg` and that 0 ≤ α ≤ β everywhere.
    pub fn check(&self, cfg: &SimulationConfig) -> Result<()> {
        if self.beta.shape() != self.alpha.shape() {
            return Err(Error::Dimension(format!(
                "beta is {:?} but alpha is {:?}",
                self.beta.shape(),
                self.alpha.shape()
            )));
        }
        if self.aps() != cfg.aps || self.users() != cfg.users {
            return Err(Error::Dimension(format!(
                "state is {}x{} but config has {} APs and {} users",
                self.aps(),
                self.users(),
                cfg.aps,
                cfg.users
            )));
        }
        for (b, a) in self.beta.iter().zip(self.alpha.iter()) {
            if !(*a >= 0.0 && *b >= *a && b.is_finite()) {
                return Err(Error::InvariantViolation(format!(
                    "need 0 <= alpha <= beta, got alpha = {a}, beta = {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Variance of the MMSE channel estimate, p_u·β² / (p_u·β + σ²).
pub fn mmse_variance(beta: f64, p_u: f64, noise_power: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    p_u * beta * beta / (p_u * beta + noise_power)
}

/// Path loss plus one i.i.d. shadowing draw per (AP, UE) pair, row-major over APs.
pub fn large_scale<R: Rng + ?Sized>(
    topology: &Topology,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<LargeScaleState> {
    let model = PathLossModel::from_config(cfg)?;
    let n_ap = topology.ap_positions.len();
    let k = topology.ue_positions.len();
    let mut beta = DMatrix::zeros(n_ap, k);
    for (q, ap) in topology.ap_positions.iter().enumerate() {
        for (u, ue) in topology.ue_positions.iter().enumerate() {
            let d_km = ap.distance(ue) / 1000.0;
            let z: f64 = rng.sample(StandardNormal);
            let shadow_db = cfg.sigma_sd_db * z;
            beta[(q, u)] = 10f64.powf((model.gain_db(d_km) + shadow_db) / 10.0);
        }
    }
    Ok(LargeScaleState::from_beta(beta, cfg.p_u_w, cfg.noise_power_w()))
}
