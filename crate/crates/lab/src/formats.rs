//! CSV tables and JSON reports.
//!
//! Every file starts with provenance: CSV files with a comment line
//! `# sse-lab <version> master_seed=<seed> config_hash=<hex>`, JSON files
//! with the same three fields at the top level.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sse_decay::ensemble::{ComparisonReport, EnsembleTable};
use sse_decay::EnsembleEstimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub master_seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(master_seed: u64, config_hash: impl Into<String>) -> Self {
        Provenance {
            version: VERSION.to_string(),
            master_seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn header(&self) -> String {
        format!(
            "# sse-lab {} master_seed={} config_hash={}",
            self.version, self.master_seed, self.config_hash
        )
    }

    pub fn parse_header(line: &str) -> Option<Provenance> {
        let rest = line.strip_prefix("# sse-lab ")?;
        let mut parts = rest.split_whitespace();
        let version = parts.next()?.to_string();
        let mut seed = None;
        let mut hash = None;
        for p in parts {
            if let Some(v) = p.strip_prefix("master_seed=") {
                seed = v.parse().ok();
            } else if let Some(v) = p.strip_prefix("config_hash=") {
                hash = Some(v.to_string());
            }
        }
        Some(Provenance {
            version,
            master_seed: seed?,
            config_hash: hash?,
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Long format: one row per `(t, observable)`; an undefined standard error
/// is written as `nan`.
pub fn table_to_csv(table: &EnsembleTable, prov: &Provenance) -> String {
    let mut out = String::new();
    out.push_str(&prov.header());
    out.push('\n');
    out.push_str("t,observable,mean,std_error,n\n");
    for (t, row) in table.times.iter().zip(&table.rows) {
        for (name, e) in table.columns.iter().zip(row) {
            let se = e.std_error.map_or_else(|| "nan".to_string(), fmt_f64);
            writeln!(out, "{},{},{},{},{}", fmt_f64(*t), name, fmt_f64(e.mean), se, e.n).unwrap();
        }
    }
    out
}

/// A table read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub provenance: Option<Provenance>,
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<EnsembleEstimate>>,
}

impl CsvTable {
    pub fn series(&self, name: &str) -> Option<Vec<EnsembleEstimate>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn table_from_csv(text: &str) -> Result<CsvTable, String> {
    let mut provenance = None;
    let mut times: Vec<f64> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<EnsembleEstimate>> = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('#') {
            if provenance.is_none() {
                provenance = Provenance::parse_header(line);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != "t,observable,mean,std_error,n" {
                return Err(format!("line {lineno}: expected the column header"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(format!("line {lineno}: expected 5 fields, got {}", f.len()));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {lineno}: {e}"));
        let t = num(f[0])?;
        let se = num(f[3])?;
        let est = EnsembleEstimate {
            mean: num(f[2])?,
            std_error: (!se.is_nan()).then_some(se),
            n: f[4].trim().parse().map_err(|e| format!("line {lineno}: {e}"))?,
        };
        if times.last() != Some(&t) {
            if rows.len() > 1 && rows.last().map(Vec::len) != Some(columns.len()) {
                return Err(format!("line {lineno}: ragged table"));
            }
            times.push(t);
            rows.push(Vec::new());
        }
        let first = rows.len() == 1;
        let row = rows.last_mut().unwrap();
        if first {
            columns.push(f[1].to_string());
        } else if columns.get(row.len()).map(String::as_str) != Some(f[1]) {
            return Err(format!("line {lineno}: column `{}` out of order", f[1]));
        }
        row.push(est);
    }
    if rows.last().is_some_and(|r| r.len() != columns.len()) {
        return Err("ragged table".into());
    }
    Ok(CsvTable {
        provenance,
        times,
        columns,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonJson {
    pub name: String,
    pub max_abs_z: f64,
    pub fraction_over_3: f64,
    pub points: usize,
    pub pass: bool,
}

impl ComparisonJson {
    pub fn new(name: impl Into<String>, r: &ComparisonReport) -> Self {
        ComparisonJson {
            name: name.into(),
            max_abs_z: r.max_abs_z,
            fraction_over_3: r.fraction_over_3,
            points: r.z.len(),
            pass: r.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub pass: bool,
    pub max_z: f64,
    pub comparisons: Vec<ComparisonJson>,
    #[serde(default)]
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Report {
    pub fn new(provenance: Provenance, comparisons: Vec<ComparisonJson>) -> Self {
        Report {
            provenance,
            pass: comparisons.iter().all(|c| c.pass),
            max_z: comparisons.iter().fold(0.0, |m, c| m.max(c.max_abs_z)),
            comparisons,
            details: Default::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sse_decay::ensemble::Engine;

    fn table() -> EnsembleTable {
        let e = |mean: f64, se: Option<f64>| EnsembleEstimate {
            mean,
            std_error: se,
            n: 3,
        };
        EnsembleTable {
            engine: Engine::ImaginaryNoise,
            master_seed: 5,
            n_traj: 3,
            times: vec![0.0, 0.1, 0.30000000000000004],
            columns: vec!["survival".into(), "p1".into()],
            rows: vec![
                vec![e(1.0, Some(0.0)), e(0.0, Some(0.0))],
                vec![e(0.9, Some(1e-3)), e(1.0 / 3.0, None)],
                vec![e(f64::MIN_POSITIVE, Some(2.5e-300)), e(-0.0, Some(1.0))],
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let prov = Provenance::new(5, "ab12");
        let text = table_to_csv(&table(), &prov);
        assert!(text.starts_with("# sse-lab "));
        let back = table_from_csv(&text).unwrap();
        let t = table();
        assert_eq!(back.provenance, Some(prov));
        assert_eq!(back.times, t.times);
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows, t.rows);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(table_from_csv("t,observable,mean,std_error,n\n0,a,1\n").is_err());
        assert!(table_from_csv("x\n").is_err());
    }
}
