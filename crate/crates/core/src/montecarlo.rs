//! Topology-level Monte Carlo: per-user SE pooled over draws, CDFs,
//! percentiles and sum-SE sweeps over the number of users.
//!
//! Draw `d` uses RNG streams keyed by `(seed, d)`, and results are folded in
//! draw order, so reports do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::config::SimulationConfig;
use crate::downlink::{cbf_sinr, zfp_sinr, zfp_sinr_cellular, ChiMatrix};
use crate::error::{Error, Result};
use crate::moments::{estimate_zf_moments, ZfMoments};
use crate::power::{cbf_full_power, cbf_maxmin_cellular, ul_full_power, zfp_power_from_moments};
use crate::rng::{fast_stream, stream, Purpose};
use crate::scenario::{generate_topology, large_scale, LargeScaleState};
use crate::sinr::SinrVector;
use crate::stats::Running;
use crate::uplink::{mf_sinr_full_csi, mf_sinr_stats_only, zf_sinr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    DlCbf,
    DlCbfMaxMin,
    DlZfp,
    UlMfFullCsi,
    UlMfStats,
    UlZf,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::DlCbf,
        Scheme::DlCbfMaxMin,
        Scheme::DlZfp,
        Scheme::UlMfFullCsi,
        Scheme::UlMfStats,
        Scheme::UlZf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::DlCbf => "DL-CBF",
            Scheme::DlCbfMaxMin => "DL-CBF-maxmin",
            Scheme::DlZfp => "DL-ZFP",
            Scheme::UlMfFullCsi => "UL-MF-fullCSI",
            Scheme::UlMfStats => "UL-MF-stats",
            Scheme::UlZf => "UL-ZF",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Scheme::DlCbf => "dl_cbf",
            Scheme::DlCbfMaxMin => "dl_cbf_maxmin",
            Scheme::DlZfp => "dl_zfp",
            Scheme::UlMfFullCsi => "ul_mf_fullcsi",
            Scheme::UlMfStats => "ul_mf_stats",
            Scheme::UlZf => "ul_zf",
        }
    }

    fn needs_moments(self) -> bool {
        matches!(self, Scheme::DlZfp | Scheme::UlZf)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A scheme run on a particular antenna layout (`aps` APs sharing the
/// configured total antenna count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub aps: usize,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, aps: usize) -> Self {
        Self { scheme, aps }
    }

    /// e.g. `DL-ZFP N_AP=32 N_t=8`.
    pub fn label(&self, antennas: usize) -> String {
        format!(
            "{} N_AP={} N_t={}",
            self.scheme.label(),
            self.aps,
            antennas / self.aps.max(1)
        )
    }

    /// File-name friendly form, e.g. `dl_zfp_nap32_nt8`.
    pub fn slug(&self, antennas: usize) -> String {
        format!(
            "{}_nap{}_nt{}",
            self.scheme.slug(),
            self.aps,
            antennas / self.aps.max(1)
        )
    }

    /// Rejects impossible combinations before any computation.
    pub fn validate(&self, cfg: &SimulationConfig) -> Result<()> {
        cfg.with_aps(self.aps)?;
        if self.scheme == Scheme::DlCbfMaxMin && self.aps != 1 {
            return Err(Error::InvalidConfig {
                field: "aps",
                reason: format!(
                    "max-min CBF is only defined for the cellular layout, got {} APs",
                    self.aps
                ),
            });
        }
        Ok(())
    }
}

/// Pooled per-user spectral efficiency for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SEReport {
    pub scheme_label: String,
    /// Per-user SE in bit/s/Hz, draw-major.
    pub samples: Vec<f64>,
    pub sum_se_mean: f64,
    pub sum_se_stderr: f64,
    pub percentile_05: f64,
    pub median: f64,
    pub n_draws: usize,
    /// Singular channel draws discarded while estimating ZF expectations.
    pub redraws: usize,
}

impl SEReport {
    fn from_draws(label: String, draws: &[(Vec<f64>, usize)]) -> Result<Self> {
        let mut sum = Running::default();
        let mut samples = Vec::new();
        let mut redraws = 0;
        for (se, r) in draws {
            sum.push(se.iter().sum());
            samples.extend_from_slice(se);
            redraws += r;
        }
        Ok(Self {
            scheme_label: label,
            percentile_05: percentile(&samples, 0.05)?,
            median: percentile(&samples, 0.5)?,
            sum_se_mean: sum.mean(),
            sum_se_stderr: sum.stderr(),
            n_draws: draws.len(),
            redraws,
            samples,
        })
    }
}

/// Empirical CDF: sorted values with probabilities `i / n`, `i = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CdfSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn cdf(samples: &[f64]) -> Result<CdfSeries> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let values = sorted(samples);
    let n = values.len() as f64;
    let probabilities = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(CdfSeries {
        values,
        probabilities,
    })
}

/// Percentile by linear interpolation between order statistics at rank
/// `(n − 1) p`.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let v = sorted(samples);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn run_experiment(cfg: &SimulationConfig, spec: SchemeSpec) -> Result<SEReport> {
    Ok(run_experiments(cfg, &[spec])?.remove(0))
}

/// Runs several schemes over the same topology draws. Schemes sharing a
/// layout also share the channel-sample expectations of each draw.
pub fn run_experiments(cfg: &SimulationConfig, specs: &[SchemeSpec]) -> Result<Vec<SEReport>> {
    for spec in specs {
        spec.validate(cfg)?;
    }
    if cfg.n_topology_trials == 0 {
        return Err(Error::InvalidConfig {
            field: "n_topology_trials",
            reason: "must be at least 1".into(),
        });
    }
    let mut layouts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, spec) in specs.iter().enumerate() {
        layouts.entry(spec.aps).or_default().push(i);
    }
    let mut reports: Vec<Option<SEReport>> = vec![None; specs.len()];
    for (aps, members) in layouts {
        let layout_cfg = cfg.with_aps(aps)?;
        let schemes: Vec<Scheme> = members.iter().map(|i| specs[*i].scheme).collect();
        log::info!(
            "layout N_AP={aps}: {} draws, schemes {:?}",
            cfg.n_topology_trials,
            schemes
        );
        let per_draw: Vec<Vec<(Vec<f64>, usize)>> = (0..cfg.n_topology_trials)
            .into_par_iter()
            .map(|d| evaluate_draw(&layout_cfg, &schemes, d as u64))
            .collect::<Result<_>>()?;
        for (j, &i) in members.iter().enumerate() {
            let draws: Vec<(Vec<f64>, usize)> = per_draw.iter().map(|r| r[j].clone()).collect();
            reports[i] = Some(SEReport::from_draws(specs[i].label(cfg.antennas), &draws)?);
        }
    }
    Ok(reports.into_iter().map(|r| r.expect("every spec evaluated")).collect())
}

/// Large-scale state of draw `d`; users are placed before APs so all layouts
/// of the same draw share user positions.
pub fn draw_state(cfg: &SimulationConfig, draw: u64) -> Result<LargeScaleState> {
    let mut rng = stream(cfg.seed, draw, Purpose::Topology);
    let topology = generate_topology(cfg, &mut rng);
    large_scale(&topology, cfg, &mut rng)
}

fn evaluate_draw(
    cfg: &SimulationConfig,
    schemes: &[Scheme],
    draw: u64,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let ls = draw_state(cfg, draw)?;
    let moments = if schemes.iter().any(|s| s.needs_moments()) {
        Some(estimate_zf_moments(
            &ls,
            cfg,
            &mut fast_stream(cfg.seed, draw, Purpose::Channel),
        )?)
    } else {
        None
    };
    schemes
        .iter()
        .map(|&s| {
            let sinr = scheme_sinr(s, &ls, moments.as_ref(), cfg)?;
            let redraws = if s.needs_moments() {
                moments.as_ref().map_or(0, |m| m.redraws)
            } else {
                0
            };
            Ok((sinr.se, redraws))
        })
        .collect()
}

/// Closed-form SINR of `scheme` with its power-control rule.
pub fn scheme_sinr(
    scheme: Scheme,
    ls: &LargeScaleState,
    moments: Option<&ZfMoments>,
    cfg: &SimulationConfig,
) -> Result<SinrVector> {
    let need = || {
        moments.ok_or_else(|| Error::Misuse(format!("{scheme} needs ZF channel moments")))
    };
    match scheme {
        Scheme::DlCbf => cbf_sinr(ls, &cbf_full_power(ls), cfg),
        Scheme::DlCbfMaxMin => cbf_sinr(ls, &cbf_maxmin_cellular(ls, cfg)?.0, cfg),
        Scheme::DlZfp => {
            let mo = need()?;
            let power = zfp_power_from_moments(mo)?;
            if ls.aps() == 1 {
                zfp_sinr_cellular(&power, ls, &mo.phi(), cfg)
            } else {
                let chi = ChiMatrix::from_moments(ls, mo, cfg.antennas_per_ap());
                zfp_sinr(&power, &chi, cfg)
            }
        }
        Scheme::UlMfFullCsi => mf_sinr_full_csi(ls, &ul_full_power(ls.users()), cfg),
        Scheme::UlMfStats => mf_sinr_stats_only(ls, &ul_full_power(ls.users()), cfg),
        Scheme::UlZf => zf_sinr(ls, &ul_full_power(ls.users()), need()?, cfg),
    }
}

/// Mean sum SE at one user count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub users: usize,
    pub sum_se_mean: f64,
    pub sum_se_stderr: f64,
}

pub fn sweep_users(
    cfg: &SimulationConfig,
    k_list: &[usize],
    spec: SchemeSpec,
) -> Result<Vec<SweepPoint>> {
    Ok(sweep_users_multi(cfg, k_list, &[spec])?.remove(0))
}

/// Sum-SE sweep for several schemes; result `i` belongs to `specs[i]`.
pub fn sweep_users_multi(
    cfg: &SimulationConfig,
    k_list: &[usize],
    specs: &[SchemeSpec],
) -> Result<Vec<Vec<SweepPoint>>> {
    if k_list.is_empty() {
        return Err(Error::InvalidConfig {
            field: "sweep_users",
            reason: "the user-count list is empty".into(),
        });
    }
    for &k in k_list {
        let c = cfg.with_users(k)?;
        for spec in specs {
            spec.validate(&c)?;
        }
    }
    let mut out = vec![Vec::with_capacity(k_list.len()); specs.len()];
    for &k in k_list {
        let reports = run_experiments(&cfg.with_users(k)?, specs)?;
        for (series, r) in out.iter_mut().zip(reports) {
            series.push(SweepPoint {
                users: k,
                sum_se_mean: r.sum_se_mean,
                sum_se_stderr: r.sum_se_stderr,
            });
        }
    }
    Ok(out)
}
