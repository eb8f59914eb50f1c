//! Study reports: long-format CSV plus a JSON sidecar.
//!
//! The CSV has exactly the columns `study,arm,width,metric,value,se`. Values
//! are written with Rust's shortest round-trip float formatting, so reading a
//! report back and writing it again reproduces the file byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{Estimate, SlopeFit};

pub const CSV_HEADER: &str = "study,arm,width,metric,value,se";

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub arm: String,
    pub width: usize,
    pub metric: String,
    pub value: f64,
    pub se: f64,
}

impl ReportPoint {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub arm: String,
    pub metric: String,
    pub fit: SlopeFit,
}

/// A pass/fail flag tied to a declared threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Human-readable statement of the threshold and the measured value.
    pub detail: String,
}

/// Output of every study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub ladder: Vec<usize>,
    pub trials: usize,
    pub points: Vec<ReportPoint>,
    pub slopes: Vec<SlopeRecord>,
    pub checks: Vec<Check>,
    /// Notes on rungs or metrics that hit the Monte Carlo noise floor.
    pub degenerate: Vec<String>,
}

impl ConvergenceReport {
    pub fn new(study: &str, config_hash: String, master_seed: u64, ladder: Vec<usize>, trials: usize) -> Self {
        Self {
            study: study.into(),
            config_hash,
            master_seed,
            ladder,
            trials,
            points: Vec::new(),
            slopes: Vec::new(),
            checks: Vec::new(),
            degenerate: Vec::new(),
        }
    }

    pub fn push(&mut self, arm: &str, width: usize, metric: &str, est: Estimate) {
        self.points.push(ReportPoint {
            arm: arm.into(),
            width,
            metric: metric.into(),
            value: est.value,
            se: est.se.max(0.0),
        });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn get(&self, arm: &str, width: usize, metric: &str) -> Option<Estimate> {
        self.points
            .iter()
            .find(|p| p.arm == arm && p.width == width && p.metric == metric)
            .map(ReportPoint::estimate)
    }

    /// Like [`get`](Self::get), but a missing point is an error.
    pub fn require(&self, arm: &str, width: usize, metric: &str) -> Result<Estimate> {
        self.get(arm, width, metric)
            .ok_or_else(|| Error::Validation(format!("report has no {metric} for {arm} at width {width}")))
    }

    /// `(width, estimate)` for one metric of one arm, in ladder order.
    pub fn series(&self, arm: &str, metric: &str) -> Vec<(usize, Estimate)> {
        self.points
            .iter()
            .filter(|p| p.arm == arm && p.metric == metric)
            .map(|p| (p.width, p.estimate()))
            .collect()
    }

    pub fn metrics(&self, arm: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in self.points.iter().filter(|p| p.arm == arm) {
            if !out.contains(&p.metric) {
                out.push(p.metric.clone());
            }
        }
        out
    }

    pub fn arms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.arm) {
                out.push(p.arm.clone());
            }
        }
        out
    }

    pub fn slope(&self, arm: &str, metric: &str) -> Option<&SlopeFit> {
        self.slopes
            .iter()
            .find(|s| s.arm == arm && s.metric == metric)
            .map(|s| &s.fit)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.points.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{:?},{:?}\n",
                self.study, p.arm, p.width, p.metric, p.value, p.se
            ));
        }
        out
    }
}

/// Rows of a report CSV: `(study, point)`.
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, ReportPoint)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "report header must be {CSV_HEADER:?}, got {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::Parse(format!("report line {}: {what}: {line:?}", i + 2));
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let width = f[2].parse().map_err(|_| bad("bad width"))?;
            let value = f[4].parse().map_err(|_| bad("bad value"))?;
            let se = f[5].parse().map_err(|_| bad("bad se"))?;
            Ok((
                f[0].to_string(),
                ReportPoint {
                    arm: f[1].into(),
                    width,
                    metric: f[3].into(),
                    value,
                    se,
                },
            ))
        })
        .collect()
}

/// Sidecar written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSidecar {
    pub study: String,
    pub config_hash: String,
    pub seed: u64,
    pub ladder: Vec<usize>,
    pub trials: usize,
    pub slopes: Vec<SlopeRecord>,
    pub checks: Vec<Check>,
    pub degenerate: Vec<String>,
    /// The fully resolved run configuration.
    pub config: serde_json::Value,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

/// Write `contents` to `path` via a temporary file in the same directory
/// and a rename, creating the parent directory if needed.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = parent.join(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Write the CSV and its `<path>.json` sidecar.
pub fn write_report(report: &ConvergenceReport, config: &serde_json::Value, path: &Path) -> Result<()> {
    write_atomic(path, report.to_csv().as_bytes())?;
    let sidecar = ReportSidecar {
        study: report.study.clone(),
        config_hash: report.config_hash.clone(),
        seed: report.master_seed,
        ladder: report.ladder.clone(),
        trials: report.trials,
        slopes: report.slopes.clone(),
        checks: report.checks.clone(),
        degenerate: report.degenerate.clone(),
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    let side = sidecar_path(path);
    write_atomic(&side, json.as_bytes())
}

/// Read a report written by [`write_report`].
pub fn read_report(path: &Path) -> Result<(ConvergenceReport, ReportSidecar)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let side_text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: ReportSidecar =
        serde_json::from_str(&side_text).map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?;
    let rows = parse_report_csv(&text)?;
    if let Some((study, _)) = rows.iter().find(|(s, _)| *s != sidecar.study) {
        return Err(Error::Parse(format!(
            "CSV study {study:?} does not match sidecar study {:?}",
            sidecar.study
        )));
    }
    let report = ConvergenceReport {
        study: sidecar.study.clone(),
        config_hash: sidecar.config_hash.clone(),
        master_seed: sidecar.seed,
        ladder: sidecar.ladder.clone(),
        trials: sidecar.trials,
        points: rows.into_iter().map(|(_, p)| p).collect(),
        slopes: sidecar.slopes.clone(),
        checks: sidecar.checks.clone(),
        degenerate: sidecar.degenerate.clone(),
    };
    Ok((report, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvergenceReport {
        let mut r = ConvergenceReport::new("converge", "abcd".into(), 7, vec![8, 16], 100);
        r.push("network", 8, "cov_error", Estimate::new(0.1, 1e-5));
        r.push("oracle", 16, "cf_distance", Estimate::new(1.0 / 3.0, 0.0));
        r.check("x", true, "always");
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ConvergenceReport::new("kernel", String::new(), 0, vec![], 0);
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_point_round_trips() {
        let mut r = ConvergenceReport::new("s", "h".into(), 1, vec![4], 10);
        r.push("a", 4, "m", Estimate::new(-2.5e-7, 0.125));
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 2);
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(rows[0].1, r.points[0]);
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("r.csv");
        let cfg = serde_json::json!({"depth": 2});
        let r = sample();
        write_report(&r, &cfg, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let (back, side) = read_report(&path).unwrap();
        assert_eq!(back, r);
        assert_eq!(side.config, cfg);
        let path2 = dir.path().join("r2.csv");
        write_report(&back, &side.config, &path2).unwrap();
        assert_eq!(first, fs::read(&path2).unwrap());
        assert_eq!(fs::read(sidecar_path(&path)).unwrap(), fs::read(sidecar_path(&path2)).unwrap());
        // No temporary files are left behind.
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_report_csv("a,b\n").is_err());
        assert!(parse_report_csv(&format!("{CSV_HEADER}\ns,a,x,m,1,2\n")).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = write_report(&sample(), &serde_json::Value::Null, &blocker.join("r.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
