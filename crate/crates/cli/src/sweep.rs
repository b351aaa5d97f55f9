//! Convergence sweeps and their CSV records.

use std::io::{Read, Write};
use std::time::Instant;

use basket_pca::PricingReport;
use rayon::prelude::*;
use thiserror::Error;

use crate::format::float;
use crate::price::{price, Problem};
use crate::reference::ReferenceValues;

pub const CSV_HEADER: [&str; 8] = [
    "m",
    "N",
    "w_tilde",
    "w1",
    "err_total",
    "err_leading",
    "err_correction",
    "seconds",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error(transparent)]
    Pricing(#[from] basket_pca::Error),
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub m: usize,
    /// Number of time steps.
    pub n: usize,
    pub w_tilde: f64,
    pub w1: f64,
    /// `|w~(m) - w~_ref|`.
    pub err_total: f64,
    /// `w1(m) - w1_ref`, signed.
    pub err_leading: f64,
    /// `sum_l (e_1l(m) - e_1(m))`, signed.
    pub err_correction: f64,
    pub seconds: f64,
}

impl SweepRecord {
    pub fn new(report: &PricingReport, reference: &ReferenceValues, seconds: f64) -> Self {
        Self {
            m: report.m,
            n: report.steps,
            w_tilde: report.w_tilde,
            w1: report.w1,
            err_total: (report.w_tilde - reference.w_tilde).abs(),
            err_leading: report.w1 - reference.w1,
            err_correction: report.correction() - reference.correction(),
            seconds,
        }
    }

    /// `w~(m) - w~_ref` with its sign.
    pub fn signed_total(&self, reference: &ReferenceValues) -> f64 {
        self.w_tilde - reference.w_tilde
    }
}

/// Prices every `m` in `min..=max`; rows come back in ascending `m`.
pub fn run_sweep(
    problem: &Problem,
    min: usize,
    max: usize,
    kappa1: f64,
    reference: &ReferenceValues,
) -> Result<Vec<SweepRecord>, SweepError> {
    (min..=max)
        .into_par_iter()
        .map(|m| {
            let start = Instant::now();
            let report = price(problem, m, kappa1)?;
            Ok(SweepRecord::new(&report, reference, start.elapsed().as_secs_f64()))
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), SweepError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.write_record([
            r.m.to_string(),
            r.n.to_string(),
            float(r.w_tilde),
            float(r.w1),
            float(r.err_total),
            float(r.err_leading),
            float(r.err_correction),
            float(r.seconds),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>, SweepError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(CSV_HEADER) {
        return Err(SweepError::Malformed {
            row: 1,
            reason: "unexpected header".to_string(),
        });
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |k: usize| SweepError::Malformed {
            row: idx + 2,
            reason: format!("cannot parse `{}`", CSV_HEADER[k]),
        };
        let int = |k: usize| record[k].parse::<usize>().map_err(|_| bad(k));
        let num = |k: usize| record[k].parse::<f64>().map_err(|_| bad(k));
        out.push(SweepRecord {
            m: int(0)?,
            n: int(1)?,
            w_tilde: num(2)?,
            w1: num(3)?,
            err_total: num(4)?,
            err_leading: num(5)?,
            err_correction: num(6)?,
            seconds: num(7)?,
        });
    }
    Ok(out)
}
