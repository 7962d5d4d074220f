//! Simulation parameters and the TOML configuration file.
//!
//! Every field is optional in the file; missing values fall back to the
//! reference deployment (256 antennas over a 1 km square, 16 users,
//! 1900 MHz COST-Hata propagation, 5 MHz bandwidth).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All physical and experiment parameters for one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Total service antennas M.
    pub antennas: usize,
    /// Access points N_AP; each carries `antennas / aps` antennas.
    pub aps: usize,
    /// Single-antenna users K.
    pub users: usize,
    pub area_side_m: f64,
    /// UE transmit power (W).
    pub p_u_w: f64,
    /// Per-antenna downlink power (W).
    pub p_d_w: f64,
    pub f_c_mhz: f64,
    pub h_ap_m: f64,
    pub h_ue_m: f64,
    pub sigma_sd_db: f64,
    pub d0_km: f64,
    pub d1_km: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub n_topology_trials: usize,
    /// Channel draws per topology for the inverse-Gram expectations.
    pub n_channel_samples: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            antennas: 256,
            aps: 256,
            users: 16,
            area_side_m: 1000.0,
            p_u_w: 0.1,
            p_d_w: 0.2,
            f_c_mhz: 1900.0,
            h_ap_m: 15.0,
            h_ue_m: 1.65,
            sigma_sd_db: 8.0,
            d0_km: 0.01,
            d1_km: 0.05,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            bandwidth_hz: 5e6,
            n_topology_trials: 200,
            n_channel_samples: 1000,
            seed: 1,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl SimulationConfig {
    /// Antennas per AP, N_t.
    pub fn antennas_per_ap(&self) -> usize {
        self.antennas / self.aps.max(1)
    }

    pub fn is_cellular(&self) -> bool {
        self.aps == 1
    }

    /// Receiver noise power σ_n² in watts.
    pub fn noise_power_w(&self) -> f64 {
        crate::scenario::noise_power_watts(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(invalid("antennas", "must be at least 1"));
        }
        if self.aps == 0 || self.aps > self.antennas {
            return Err(invalid(
                "aps",
                format!("must lie in 1..={}, got {}", self.antennas, self.aps),
            ));
        }
        if self.antennas % self.aps != 0 {
            return Err(invalid(
                "aps",
                format!(
                    "{} antennas cannot be split evenly over {} APs",
                    self.antennas, self.aps
                ),
            ));
        }
        if self.users == 0 || self.users >= self.antennas {
            return Err(invalid(
                "users",
                format!(
                    "need 1 <= K < M = {}, got K = {}",
                    self.antennas, self.users
                ),
            ));
        }
        let positive: [(&'static str, f64); 9] = [
            ("area_side_m", self.area_side_m),
            ("p_u_w", self.p_u_w),
            ("p_d_w", self.p_d_w),
            ("f_c_mhz", self.f_c_mhz),
            ("h_ap_m", self.h_ap_m),
            ("h_ue_m", self.h_ue_m),
            ("d0_km", self.d0_km),
            ("d1_km", self.d1_km),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.d0_km >= self.d1_km {
            return Err(invalid(
                "d0_km",
                format!("need d0 < d1, got {} >= {}", self.d0_km, self.d1_km),
            ));
        }
        if !(self.sigma_sd_db.is_finite() && self.sigma_sd_db >= 0.0) {
            return Err(invalid("sigma_sd_db", "must be finite and >= 0"));
        }
        if !self.noise_density_dbm_hz.is_finite() {
            return Err(invalid("noise_density_dbm_hz", "must be finite"));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(invalid("noise_figure_db", "must be finite"));
        }
        if self.n_topology_trials == 0 {
            return Err(invalid("n_topology_trials", "must be at least 1"));
        }
        if self.n_channel_samples == 0 {
            return Err(invalid("n_channel_samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Copy with a different AP count (same total antennas).
    pub fn with_aps(&self, aps: usize) -> Result<Self> {
        let cfg = Self {
            aps,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with a different user count.
    pub fn with_users(&self, users: usize) -> Result<Self> {
        let cfg = Self {
            users,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which layouts and user counts the CLI experiments cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// AP counts; each is paired with `antennas / aps` antennas per AP.
    pub layouts: Vec<usize>,
    pub sweep_users: Vec<usize>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            layouts: vec![256, 32, 1],
            sweep_users: vec![2, 6, 10, 16, 20, 24, 32],
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SystemSection {
    antennas: Option<usize>,
    aps: Option<usize>,
    users: Option<usize>,
    area_side_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PowerSection {
    uplink_w: Option<f64>,
    downlink_w: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PropagationSection {
    carrier_mhz: Option<f64>,
    ap_height_m: Option<f64>,
    ue_height_m: Option<f64>,
    shadowing_db: Option<f64>,
    d0_km: Option<f64>,
    d1_km: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NoiseSection {
    density_dbm_hz: Option<f64>,
    figure_db: Option<f64>,
    bandwidth_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MonteCarloSection {
    topology_trials: Option<usize>,
    channel_samples: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentSection {
    layouts: Option<Vec<usize>>,
    sweep_users: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfigFile {
    system: SystemSection,
    power: PowerSection,
    propagation: PropagationSection,
    noise: NoiseSection,
    monte_carlo: MonteCarloSection,
    experiment: ExperimentSection,
}

/// Parsed configuration file.
///
/// ```toml
/// [system]
/// antennas = 256
/// aps = 256
/// users = 16
///
/// [monte_carlo]
/// topology_trials = 200
/// channel_samples = 1000
/// seed = 7
///
/// [experiment]
/// layouts = [256, 32, 1]
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub sim: SimulationConfig,
    pub plan: ExperimentPlan,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfigFile = toml::from_str(text).map_err(|e| Error::InvalidConfig {
            field: "<file>",
            reason: e.to_string(),
        })?;
        let d = SimulationConfig::default();
        let sim = SimulationConfig {
            antennas: raw.system.antennas.unwrap_or(d.antennas),
            aps: raw.system.aps.unwrap_or(d.aps),
            users: raw.system.users.unwrap_or(d.users),
            area_side_m: raw.system.area_side_m.unwrap_or(d.area_side_m),
            p_u_w: raw.power.uplink_w.unwrap_or(d.p_u_w),
            p_d_w: raw.power.downlink_w.unwrap_or(d.p_d_w),
            f_c_mhz: raw.propagation.carrier_mhz.unwrap_or(d.f_c_mhz),
            h_ap_m: raw.propagation.ap_height_m.unwrap_or(d.h_ap_m),
            h_ue_m: raw.propagation.ue_height_m.unwrap_or(d.h_ue_m),
            sigma_sd_db: raw.propagation.shadowing_db.unwrap_or(d.sigma_sd_db),
            d0_km: raw.propagation.d0_km.unwrap_or(d.d0_km),
            d1_km: raw.propagation.d1_km.unwrap_or(d.d1_km),
            noise_density_dbm_hz: raw.noise.density_dbm_hz.unwrap_or(d.noise_density_dbm_hz),
            noise_figure_db: raw.noise.figure_db.unwrap_or(d.noise_figure_db),
            bandwidth_hz: raw.noise.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            n_topology_trials: raw.monte_carlo.topology_trials.unwrap_or(d.n_topology_trials),
            n_channel_samples: raw.monte_carlo.channel_samples.unwrap_or(d.n_channel_samples),
            seed: raw.monte_carlo.seed.unwrap_or(d.seed),
        };
        let dp = ExperimentPlan::default();
        let plan = ExperimentPlan {
            layouts: raw.experiment.layouts.unwrap_or(dp.layouts),
            sweep_users: raw.experiment.sweep_users.unwrap_or(dp.sweep_users),
        };
        let file = Self { sim, plan };
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            kind: source.kind(),
        })?;
        Ok(Self::from_toml_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.plan.layouts.is_empty() {
            return Err(invalid("experiment.layouts", "must list at least one AP count"));
        }
        for &aps in &self.plan.layouts {
            self.sim.with_aps(aps).map_err(|e| match e {
                Error::InvalidConfig { reason, .. } => invalid("experiment.layouts", reason),
                other => other,
            })?;
        }
        for &k in &self.plan.sweep_users {
            if k == 0 || k >= self.sim.antennas {
                return Err(invalid(
                    "experiment.sweep_users",
                    format!("need 1 <= K < M = {}, got {k}", self.sim.antennas),
                ));
            }
        }
        Ok(())
    }
}

/// Failure to read or parse a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read config {path}: {kind}")]
    Io {
        path: String,
        kind: std::io::ErrorKind,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SimulationConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.antennas_per_ap(), 1);
        assert_eq!(cfg.with_aps(32).unwrap().antennas_per_ap(), 8);
        assert!(cfg.with_aps(1).unwrap().is_cellular());
    }

    #[test]
    fn rejects_bad_layouts() {
        let cfg = SimulationConfig::default();
        assert!(cfg.with_aps(0).is_err());
        assert!(cfg.with_aps(300).is_err());
        assert!(cfg.with_aps(3).is_err());
        assert!(cfg.with_users(256).is_err());
        assert!(cfg.with_users(0).is_err());
    }

    #[test]
    fn rejects_nonpositive_fields() {
        let cfg = SimulationConfig {
            p_d_w: 0.0,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "p_d_w"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SimulationConfig {
            d0_km: 0.06,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_file_is_all_defaults() {
        let f = ConfigFile::from_toml_str("").unwrap();
        assert_eq!(f, ConfigFile::default());
    }

    #[test]
    fn nested_overrides() {
        let f = ConfigFile::from_toml_str(
            r#"
            [system]
            antennas = 64
            aps = 8
            users = 4
            [power]
            downlink_w = 0.5
            [monte_carlo]
            seed = 9
            [experiment]
            layouts = [64, 1]
            sweep_users = [2, 4]
            "#,
        )
        .unwrap();
        assert_eq!(f.sim.antennas, 64);
        assert_eq!(f.sim.antennas_per_ap(), 8);
        assert_eq!(f.sim.p_d_w, 0.5);
        assert_eq!(f.sim.p_u_w, 0.1);
        assert_eq!(f.sim.seed, 9);
        assert_eq!(f.plan.layouts, vec![64, 1]);
    }

    #[test]
    fn unknown_key_is_reported() {
        let err = ConfigFile::from_toml_str("[system]\nantenas = 3\n").unwrap_err();
        assert!(err.to_string().contains("antenas"), "{err}");
    }

    #[test]
    fn sweep_users_must_fit() {
        let err = ConfigFile::from_toml_str("[experiment]\nsweep_users = [2, 256]\n").unwrap_err();
        match err {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "experiment.sweep_users"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
