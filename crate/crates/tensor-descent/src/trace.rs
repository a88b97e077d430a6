//! Per-iteration run traces with a fixed CSV schema and a JSON summary.
//!
//! The CSV header is stable; optional columns are left empty when a field
//! does not apply to the algorithm that produced the trace. Identical
//! configurations and seeds produce byte-identical CSV output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::MAX_ORDER;

pub const CSV_HEADER: &str = "iter,restart_index,outer_iter,value,gap,grad_norm,lambda,eta,a_big,step_norm,probes,inner_iters,n_f,n_g,f_calls_0,f_calls_1,f_calls_2,f_calls_3,g_calls_0,g_calls_1,g_calls_2,g_calls_3,resid_q,resid_p";

#[derive(Clone, Debug, Default)]
pub struct TraceRecord {
    pub iter: u64,
    pub restart_index: Option<u64>,
    pub outer_iter: Option<u64>,
    pub value: f64,
    pub gap: Option<f64>,
    pub grad_norm: f64,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub a_big: Option<f64>,
    pub step_norm: Option<f64>,
    pub probes: Option<u64>,
    pub inner_iters: Option<u64>,
    /// Cumulative order-p calls of f.
    pub n_f: u64,
    /// Cumulative order-p calls of g (0 when g has no oracle).
    pub n_g: u64,
    pub f_calls: [u64; MAX_ORDER + 1],
    pub g_calls: [u64; MAX_ORDER + 1],
    pub resid_q: Option<f64>,
    pub resid_p: Option<f64>,
}

fn push_f64(row: &mut String, v: f64) {
    row.push(',');
    row.push_str(&format!("{v}"));
}

fn push_opt_f64(row: &mut String, v: Option<f64>) {
    row.push(',');
    if let Some(v) = v {
        row.push_str(&format!("{v}"));
    }
}

fn push_opt_u64(row: &mut String, v: Option<u64>) {
    row.push(',');
    if let Some(v) = v {
        row.push_str(&format!("{v}"));
    }
}

impl TraceRecord {
    fn csv_row(&self) -> String {
        let mut row = format!("{}", self.iter);
        push_opt_u64(&mut row, self.restart_index);
        push_opt_u64(&mut row, self.outer_iter);
        push_f64(&mut row, self.value);
        push_opt_f64(&mut row, self.gap);
        push_f64(&mut row, self.grad_norm);
        push_opt_f64(&mut row, self.lambda);
        push_opt_f64(&mut row, self.eta);
        push_opt_f64(&mut row, self.a_big);
        push_opt_f64(&mut row, self.step_norm);
        push_opt_u64(&mut row, self.probes);
        push_opt_u64(&mut row, self.inner_iters);
        row.push_str(&format!(",{},{}", self.n_f, self.n_g));
        for c in self.f_calls {
            row.push_str(&format!(",{c}"));
        }
        for c in self.g_calls {
            row.push_str(&format!(",{c}"));
        }
        push_opt_f64(&mut row, self.resid_q);
        push_opt_f64(&mut row, self.resid_p);
        row
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub problem: String,
    pub algorithm: String,
    pub p: usize,
    pub q: Option<usize>,
    pub iterations: u64,
    pub final_value: f64,
    pub final_gap: Option<f64>,
    pub final_grad_norm: f64,
    pub n_f: u64,
    pub n_g: u64,
    pub outer_iters: Option<u64>,
    pub total_inner_iters: Option<u64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.csv_string().as_bytes())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn write_summary(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.summary_json().as_bytes())
    }

    /// Reads records back from fixed-schema CSV text.
    pub fn parse_csv_records(text: &str) -> Result<Vec<TraceRecord>> {
        let bad = |what: String| crate::error::SolverError::InvalidArgument(what);
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| bad(format!("unreadable trace header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        if header != expected {
            return Err(bad("trace header does not match the schema".into()));
        }
        let opt_f =
            |s: &str| -> Option<f64> { (!s.is_empty()).then(|| s.parse().unwrap_or(f64::NAN)) };
        let opt_u = |s: &str| -> Option<u64> { (!s.is_empty()).then(|| s.parse().unwrap_or(0)) };
        let req_f = |s: &str| -> f64 { s.parse().unwrap_or(f64::NAN) };
        let req_u = |s: &str| -> u64 { s.parse().unwrap_or(0) };
        let mut out = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| bad(format!("unreadable trace row: {e}")))?;
            if row.len() != expected.len() {
                return Err(bad(format!("trace row has {} fields", row.len())));
            }
            out.push(TraceRecord {
                iter: req_u(&row[0]),
                restart_index: opt_u(&row[1]),
                outer_iter: opt_u(&row[2]),
                value: req_f(&row[3]),
                gap: opt_f(&row[4]),
                grad_norm: req_f(&row[5]),
                lambda: opt_f(&row[6]),
                eta: opt_f(&row[7]),
                a_big: opt_f(&row[8]),
                step_norm: opt_f(&row[9]),
                probes: opt_u(&row[10]),
                inner_iters: opt_u(&row[11]),
                n_f: req_u(&row[12]),
                n_g: req_u(&row[13]),
                f_calls: [
                    req_u(&row[14]),
                    req_u(&row[15]),
                    req_u(&row[16]),
                    req_u(&row[17]),
                ],
                g_calls: [
                    req_u(&row[18]),
                    req_u(&row[19]),
                    req_u(&row[20]),
                    req_u(&row[21]),
                ],
                resid_q: opt_f(&row[22]),
                resid_p: opt_f(&row[23]),
            });
        }
        Ok(out)
    }

    /// The summary counters must equal the last record's cumulative counters.
    pub fn check_consistency(&self) -> Result<()> {
        if let Some(last) = self.records.last() {
            if last.n_f != self.summary.n_f || last.n_g != self.summary.n_g {
                return Err(crate::error::SolverError::InvalidArgument(format!(
                    "summary counters (n_f={}, n_g={}) disagree with the last record (n_f={}, n_g={})",
                    self.summary.n_f, self.summary.n_g, last.n_f, last.n_g
                )));
            }
        }
        Ok(())
    }
}
