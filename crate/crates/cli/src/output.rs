//! CSV and JSON result files, written through a temporary file and renamed
//! into place so readers never see partial output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cfmimo::montecarlo::{CdfSeries, SEReport, SweepPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfRecord {
    pub se_bps_hz: f64,
    pub cum_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub scheme: String,
    pub percentile_05: f64,
    pub median: f64,
    pub sum_se_mean: f64,
}

impl From<&SEReport> for SummaryRecord {
    fn from(r: &SEReport) -> Self {
        Self {
            scheme: r.scheme_label.clone(),
            percentile_05: r.percentile_05,
            median: r.median,
            sum_se_mean: r.sum_se_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scheme: String,
    #[serde(rename = "K")]
    pub users: usize,
    pub sum_se_mean: f64,
    pub sum_se_stderr: f64,
}

impl SweepRecord {
    pub fn new(scheme: &str, p: &SweepPoint) -> Self {
        Self {
            scheme: scheme.to_string(),
            users: p.users,
            sum_se_mean: p.sum_se_mean,
            sum_se_stderr: p.sum_se_stderr,
        }
    }
}

pub fn cdf_records(cdf: &CdfSeries) -> Vec<CdfRecord> {
    cdf.values
        .iter()
        .zip(&cdf.probabilities)
        .map(|(v, p)| CdfRecord {
            se_bps_hz: *v,
            cum_prob: *p,
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn to_csv<T: Serialize>(records: &[T], path: &Path) -> Result<Vec<u8>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| OutputError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })
}

/// Writes `records` as `<stem>.csv`, plus `<stem>.json` when `json` is set.
/// Returns the paths written.
pub fn write_records<T: Serialize>(
    dir: &Path,
    stem: &str,
    records: &[T],
    json: bool,
) -> Result<Vec<PathBuf>, OutputError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    atomic_write(&csv_path, &to_csv(records, &csv_path)?)?;
    let mut written = vec![csv_path];
    if json {
        let path = dir.join(format!("{stem}.json"));
        let mut bytes = serde_json::to_vec_pretty(records).map_err(|source| OutputError::Json {
            path: path.clone(),
            source,
        })?;
        bytes.push(b'\n');
        atomic_write(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}
