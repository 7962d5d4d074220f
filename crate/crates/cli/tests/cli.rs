use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfmimo_cli::output::{read_csv, SummaryRecord, SweepRecord};

const SMALL: &str = r#"
[system]
antennas = 32
aps = 32
users = 4

[monte_carlo]
topology_trials = 4
channel_samples = 50

[experiment]
layouts = [32, 4, 1]
sweep_users = [2, 4]
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn cfmimo(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cfmimo"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().unwrap()
}

fn run_ok(sub: &str, cfg: &Path, out: &Path, extra: &[&str], threads: Option<&str>) {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = cfmimo(&args, threads);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn downlink_writes_six_cdfs_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("dl");
    run_ok("downlink", &cfg, &out, &[], None);
    let names = files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("cdf_")).count(), 6);
    assert!(names.contains(&"cdf_dl_cbf_maxmin_nap1_nt32.csv".to_string()), "{names:?}");
    let summary: Vec<SummaryRecord> = read_csv(&out.join("downlink_summary.csv")).unwrap();
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().all(|r| r.percentile_05 <= r.median));
    let text = fs::read_to_string(out.join("cdf_dl_zfp_nap32_nt1.csv")).unwrap();
    assert!(text.starts_with("se_bps_hz,cum_prob\n"));
    assert!(!names.iter().any(|n| n.ends_with(".tmp")));
}

#[test]
fn uplink_writes_nine_cdfs_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("ul");
    run_ok("uplink", &cfg, &out, &["--json"], None);
    let names = files(&out);
    assert_eq!(names.iter().filter(|n| n.starts_with("cdf_") && n.ends_with(".csv")).count(), 9);
    assert_eq!(names.iter().filter(|n| n.starts_with("cdf_") && n.ends_with(".json")).count(), 9);
    let csv: Vec<SummaryRecord> = read_csv(&out.join("uplink_summary.csv")).unwrap();
    let json: Vec<SummaryRecord> =
        serde_json::from_slice(&fs::read(out.join("uplink_summary.json")).unwrap()).unwrap();
    assert_eq!(csv, json);
}

#[test]
fn sweep_writes_one_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sw");
    run_ok("sweep", &cfg, &out, &[], None);
    assert_eq!(files(&out), vec!["sweep.csv".to_string()]);
    let rows: Vec<SweepRecord> = read_csv(&out.join("sweep.csv")).unwrap();
    // Six downlink curves at two user counts.
    assert_eq!(rows.len(), 12);
}

#[test]
fn output_is_reproducible_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dirs = [("a", None), ("b", None), ("c", Some("1")), ("d", Some("3"))];
    for (name, threads) in dirs {
        run_ok("downlink", &cfg, &tmp.path().join(name), &["--seed", "7"], threads);
    }
    let reference = files(&tmp.path().join("a"));
    for (name, _) in &dirs[1..] {
        let dir = tmp.path().join(name);
        assert_eq!(files(&dir), reference);
        for f in &reference {
            assert_eq!(
                fs::read(tmp.path().join("a").join(f)).unwrap(),
                fs::read(dir.join(f)).unwrap(),
                "{name}/{f} differs"
            );
        }
    }
    run_ok("downlink", &cfg, &tmp.path().join("e"), &["--seed", "8"], None);
    assert_ne!(
        fs::read(tmp.path().join("a/downlink_summary.csv")).unwrap(),
        fs::read(tmp.path().join("e/downlink_summary.csv")).unwrap()
    );
}

#[test]
fn config_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    let o = cfmimo(&["downlink", "--config", "/nonexistent/cfg.toml", "--out", out], None);
    assert_eq!(o.status.code(), Some(3));

    let bad = write_config(tmp.path(), "[system]\nantennas = 30\naps = 7\n");
    let o = cfmimo(&["downlink", "--config", bad.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(4));

    let unknown = write_config(tmp.path(), "[system]\nantenas = 32\n");
    let o = cfmimo(&["uplink", "--config", unknown.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(4));

    let empty = write_config(tmp.path(), &SMALL.replace("sweep_users = [2, 4]", "sweep_users = []"));
    let o = cfmimo(&["sweep", "--config", empty.to_str().unwrap(), "--out", out], None);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep_users"));

    let o = cfmimo(&["downlink", "--trials", "many"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(out).exists());
}
