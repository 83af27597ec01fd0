use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        })
    }
}

// JSON has no NaN or infinity; those are written as null and read back as NaN.
fn ser_real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

fn de_real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub status: Status,
    #[serde(serialize_with = "ser_real", deserialize_with = "de_real")]
    pub value: f64,
    #[serde(serialize_with = "ser_real", deserialize_with = "de_real")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Vec<String>,
    pub records: Vec<Record>,
    /// Command-specific measurements (training curves, verdict tables).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub data: Value,
    pub wall_clock_s: f64,
    pub version: String,
}

impl Report {
    pub fn new(command: Vec<String>) -> Report {
        Report { command, records: Vec::new(), data: Value::Null, wall_clock_s: 0.0, version: env!("CARGO_PKG_VERSION").to_string() }
    }

    pub fn push(&mut self, name: impl Into<String>, pass: bool, value: f64, tolerance: f64) {
        let status = if pass { Status::Pass } else { Status::Fail };
        self.records.push(Record { name: name.into(), status, value, tolerance });
    }

    /// Passes iff `value <= tolerance`; NaN fails.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.push(name, value <= tolerance, value, tolerance);
    }

    /// Passes iff `value >= tolerance`; NaN fails.
    pub fn check_ge(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.push(name, value >= tolerance, value, tolerance);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Pass)
    }

    pub fn status(&self) -> Status {
        if self.passed() {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn stamp(&mut self, started: Instant) {
        self.wall_clock_s = started.elapsed().as_secs_f64();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }

    /// The JSON document with the wall clock zeroed; equal for equal runs.
    pub fn payload(&self) -> String {
        Report { wall_clock_s: 0.0, ..self.clone() }.to_json()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Report> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::IoError(format!("{}: {e}", path.display())))
    }

    /// One `STATUS name value (tol ...)` line per record.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{} {} value={:.3e} tol={:.3e}\n", r.status, r.name, r.value, r.tolerance));
        }
        out.push_str(&format!("{} {}\n", self.status(), self.command.join(" ")));
        out
    }
}

/// Concatenates reports in argument order. Record names are prefixed with
/// the first word of the producing command.
pub fn cmd_report(paths: &[&Path]) -> Result<Report> {
    if paths.is_empty() {
        return Err(HarnessError::NoInput);
    }
    let started = Instant::now();
    let mut merged = Report::new(std::iter::once("report".to_string()).chain(paths.iter().map(|p| p.display().to_string())).collect());
    let mut sources = Vec::new();
    for p in paths {
        let r = Report::read(p)?;
        let tag = r.command.first().cloned().unwrap_or_default();
        sources.push(serde_json::json!({ "command": r.command, "status": r.status() }));
        merged.records.extend(r.records.into_iter().map(|rec| Record { name: format!("{tag}/{}", rec.name), ..rec }));
    }
    merged.data = Value::Array(sources);
    merged.stamp(started);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pass: bool) -> Report {
        let mut r = Report::new(vec!["verify".into(), "lemma1".into()]);
        r.check_le("a", 0.0, 1e-12);
        r.push("b", pass, f64::NAN, 1.0);
        r
    }

    #[test]
    fn status_is_conjunction() {
        assert!(sample(true).passed());
        assert_eq!(sample(false).status(), Status::Fail);
        let mut r = Report::new(vec![]);
        r.check_le("nan", f64::NAN, 1.0);
        assert!(!r.passed());
    }

    #[test]
    fn json_round_trip_keeps_nan_as_null() {
        let r = sample(true);
        let text = r.to_json();
        assert!(text.contains("null"));
        let back: Report = serde_json::from_str(&text).unwrap();
        assert!(back.records[1].value.is_nan());
        assert_eq!(back.records[0], r.records[0]);
    }

    #[test]
    fn payload_ignores_wall_clock() {
        let mut a = sample(true);
        let b = a.clone();
        a.wall_clock_s = 12.5;
        assert_eq!(a.payload(), b.payload());
        assert_ne!(a.to_json(), b.to_json());
    }

    #[test]
    fn merging() {
        let dir = tempfile::tempdir().unwrap();
        let (p, f) = (dir.path().join("p.json"), dir.path().join("f.json"));
        sample(true).write(&p).unwrap();
        sample(false).write(&f).unwrap();
        let both = cmd_report(&[&p, &p]).unwrap();
        assert!(both.passed());
        assert_eq!(both.records.len(), 4);
        assert_eq!(both.records[0].name, "verify/a");
        assert!(!cmd_report(&[&p, &f]).unwrap().passed());
        assert!(matches!(cmd_report(&[]), Err(HarnessError::NoInput)));
        assert!(matches!(cmd_report(&[&dir.path().join("missing")]), Err(HarnessError::IoError(_))));
    }
}
