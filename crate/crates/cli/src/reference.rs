//! High-resolution reference values, cached in a CSV file keyed by
//! (label, style, kappa1).

use std::fs;
use std::io;
use std::path::Path;

use basket_pca::PricingReport;
use thiserror::Error;

use crate::config::{Style, REFERENCE_M};
use crate::format::float;
use crate::price::{price, Problem};

const HEADER: [&str; 7] = ["label", "style", "kappa1", "m", "w_tilde", "w1", "w1l"];

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("reference file: {0}")]
    Io(#[from] io::Error),
    #[error("reference file: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference file row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error(transparent)]
    Pricing(#[from] basket_pca::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceKey {
    pub label: String,
    pub style: Style,
    pub kappa1: f64,
}

/// Term values of one reference solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    pub m: usize,
    pub w_tilde: f64,
    pub w1: f64,
    pub w1l: Vec<f64>,
}

impl ReferenceValues {
    pub fn from_report(report: &PricingReport) -> Self {
        Self {
            m: report.m,
            w_tilde: report.w_tilde,
            w1: report.w1,
            w1l: report.w1l.clone(),
        }
    }

    /// `sum_l (w1l - w1)` in increasing `l`.
    pub fn correction(&self) -> f64 {
        self.w1l.iter().fold(0.0, |acc, v| acc + (v - self.w1))
    }
}

/// All stored references, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceStore {
    entries: Vec<(ReferenceKey, ReferenceValues)>,
}

impl ReferenceStore {
    /// Loads `path`, or returns an empty store if it does not exist.
    pub fn load(path: &Path) -> Result<Self, ReferenceError> {
        match fs::read(path) {
            Ok(bytes) => Self::parse(&bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, ReferenceError> {
        let mut reader = csv::Reader::from_reader(bytes);
        let mut entries = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let row = idx + 2;
            let bad = |reason: &str| ReferenceError::Malformed {
                row,
                reason: reason.to_string(),
            };
            if record.len() != HEADER.len() {
                return Err(bad("wrong number of fields"));
            }
            let num = |k: usize| record[k].parse::<f64>().map_err(|_| bad(HEADER[k]));
            let key = ReferenceKey {
                label: record[0].to_string(),
                style: Style::parse(&record[1]).ok_or_else(|| bad("style"))?,
                kappa1: num(2)?,
            };
            let w1l = if record[6].is_empty() {
                Vec::new()
            } else {
                record[6]
                    .split(';')
                    .map(|v| v.parse::<f64>().map_err(|_| bad("w1l")))
                    .collect::<Result<_, _>>()?
            };
            let values = ReferenceValues {
                m: record[3].parse().map_err(|_| bad("m"))?,
                w_tilde: num(4)?,
                w1: num(5)?,
                w1l,
            };
            entries.push((key, values));
        }
        Ok(Self { entries })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ReferenceError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(HEADER)?;
        for (key, values) in &self.entries {
            let w1l: Vec<String> = values.w1l.iter().map(|v| float(*v)).collect();
            writer.write_record([
                key.label.clone(),
                key.style.name().to_string(),
                float(key.kappa1),
                values.m.to_string(),
                float(values.w_tilde),
                float(values.w1),
                w1l.join(";"),
            ])?;
        }
        writer
            .into_inner()
            .map_err(|e| ReferenceError::Io(e.into_error()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ReferenceError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn get(&self, key: &ReferenceKey) -> Option<&ReferenceValues> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Inserts or replaces the entry for `key`.
    pub fn insert(&mut self, key: ReferenceKey, values: ReferenceValues) {
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = values,
            None => self.entries.push((key, values)),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Solves `problem` at the reference resolution.
pub fn compute_reference(problem: &Problem, kappa1: f64) -> Result<ReferenceValues, ReferenceError> {
    compute_reference_at(problem, REFERENCE_M, kappa1)
}

/// Same as [`compute_reference`] at a caller-chosen resolution.
pub fn compute_reference_at(
    problem: &Problem,
    m: usize,
    kappa1: f64,
) -> Result<ReferenceValues, ReferenceError> {
    Ok(ReferenceValues::from_report(&price(problem, m, kappa1)?))
}

/// Stored reference for `key`, computed and stored first when missing or
/// when `recompute` is set.
pub fn ensure_reference(
    store: &mut ReferenceStore,
    key: &ReferenceKey,
    problem: &Problem,
    recompute: bool,
) -> Result<ReferenceValues, ReferenceError> {
    if !recompute {
        if let Some(v) = store.get(key) {
            return Ok(v.clone());
        }
    }
    let values = compute_reference(problem, key.kappa1)?;
    store.insert(key.clone(), values.clone());
    Ok(values)
}
