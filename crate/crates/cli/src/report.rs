//! Report writers. The CSV carries no timings so equal configs give equal bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::run::{Artifact, Row};

pub const CSV_HEADER: &str = "scenario,subject,c,value,se,bound,margin,pass";

#[derive(Debug, Serialize)]
pub struct Environment {
    pub version: &'static str,
    pub generator: &'static str,
    pub workers: usize,
    pub seed_override: Option<u64>,
    pub config: String,
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub environment: Environment,
    /// Seconds since the Unix epoch when the run started.
    pub started_unix: u64,
    pub total_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub metadata: Metadata,
    pub pass: bool,
    pub rows: &'a [Row],
    pub artifacts: Vec<&'a str>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_line(r: &Row) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        quote(&r.scenario),
        quote(&r.subject),
        opt(r.c),
        r.value,
        r.se,
        opt(r.bound),
        opt(r.margin),
        r.pass
    )
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", csv_line(r));
    }
    out
}

pub fn write_all(dir: &Path, report: &Report, artifacts: &[Artifact]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), to_csv(report.rows))?;
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.body)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> Row {
        Row {
            scenario: "s".into(),
            mode: "tau",
            subject: "quad:lambda=0.5,a=0.3".into(),
            c: Some(0.25),
            value: 0.5,
            se: 0.0,
            bound: Some(1.0),
            margin: Some(0.5),
            pass: true,
            note: String::new(),
            seconds: 3.0,
        }
    }

    #[test]
    fn subject_with_commas_is_quoted() {
        assert_eq!(csv_line(&row()), "s,\"quad:lambda=0.5,a=0.3\",0.25,0.5,0,1,0.5,true");
    }

    #[test]
    fn csv_ignores_timings() {
        let mut b = row();
        b.seconds = 99.0;
        assert_eq!(to_csv(&[row()]), to_csv(&[b]));
    }
}
