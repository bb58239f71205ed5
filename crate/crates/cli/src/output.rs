//! Trajectory CSV, key-value summaries and atomic file writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use radreact::trajectory::Sample;

use crate::error::CliError;

pub const CSV_HEADER: &str = "t,qx,qy,qz,vx,vy,vz,ax,ay,az,energy,schott,radiated_cum";

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Trajectory rows in the fixed schema.
pub fn trajectory_csv(samples: &[Sample<f64>]) -> String {
    let mut out = String::with_capacity(64 + samples.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        let cols = [
            s.t, s.q.x, s.q.y, s.q.z, s.v.x, s.v.y, s.v.z, s.a.x, s.a.y, s.a.z, s.energy, s.schott, s.radiated,
        ];
        let row: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Generic table with a header line.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
}

/// Flat `key = value` summary, keys sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: BTreeMap<String, Value>,
}

impl Summary {
    pub fn num(&mut self, key: &str, x: f64) {
        self.entries.insert(key.to_string(), Value::Num(x));
    }
    pub fn int(&mut self, key: &str, n: usize) {
        self.entries.insert(key.to_string(), Value::Int(n as u64));
    }
    pub fn text(&mut self, key: &str, s: impl Into<String>) {
        self.entries.insert(key.to_string(), Value::Text(s.into()));
    }
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let v = match v {
                Value::Num(x) => fmt_f64(*x),
                Value::Int(n) => n.to_string(),
                Value::Text(s) => s.clone(),
            };
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parses a rendered summary back into raw strings.
pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Everything one run emits, relative to its own directory.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: Summary,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().ok_or_else(|| CliError::Io(format!("{} has no parent", path.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let io = |e: std::io::Error, p: &Path| CliError::Io(format!("{}: {e}", p.display()));
    fs::write(&tmp, contents).map_err(|e| io(e, &tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e, path)
    })
}

/// Writes the files, then `summary.txt`, each atomically. Returns the paths
/// in write order.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::with_capacity(out.files.len() + 1);
    for (name, contents) in &out.files {
        let p = dir.join(name);
        write_atomic(&p, contents)?;
        written.push(p);
    }
    let p = dir.join("summary.txt");
    write_atomic(&p, &out.summary.render())?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use radreact::scalar::Vec3;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, -2.5e-300, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE, 5e-324] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn csv_header_and_row_shape() {
        let s = Sample {
            t: 0.5,
            q: Vec3::new(1.0, 2.0, 3.0),
            v: Vec3::zeros(),
            a: Vec3::zeros(),
            energy: 1.5,
            schott: 1.5,
            radiated: 0.0,
        };
        let csv = trajectory_csv(&[s]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 13);
    }

    #[test]
    fn summary_is_sorted_and_parses_back() {
        let mut s = Summary::default();
        s.num("penning.omega_plus", 2.0);
        s.text("cli.kind", "penning");
        s.int("cli.samples", 3);
        let text = s.render();
        assert_eq!(text, "cli.kind = penning\ncli.samples = 3\npenning.omega_plus = 2.0\n");
        assert_eq!(parse_summary(&text)["penning.omega_plus"], "2.0");
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::default();
        out.files.push(("a.csv".into(), "x\n".into()));
        write_run(dir.path(), &out).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["a.csv", "summary.txt"]);
    }
}
