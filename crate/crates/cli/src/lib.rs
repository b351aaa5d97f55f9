//! Command-line front end for the basket-pca engine: built-in parameter
//! sets, config files, single prices, convergence sweeps and cached
//! high-resolution references.

pub mod config;
pub mod format;
pub mod price;
pub mod reference;
pub mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};

use config::{Mode, RunConfig};
use price::{bound_warning, format_report, price, Problem};
use reference::{ensure_reference, ReferenceKey, ReferenceStore, ReferenceValues};
use sweep::{run_sweep, write_csv};

/// Executes a validated configuration. Results go to `out` unless the
/// config names an output file; warnings go to `err`.
pub fn run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let problem = Problem::new(&config.source, config.style)?;
    let label = config.source.label();
    let key = ReferenceKey {
        label: label.clone(),
        style: config.style,
        kappa1: config.kappa1,
    };
    let mut store = match &config.ref_file {
        Some(path) => ReferenceStore::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ReferenceStore::default(),
    };

    match config.mode {
        Mode::Price { m } => {
            let report = price(&problem, m, config.kappa1)?;
            if let Some(w) = bound_warning(&report, problem.strike()) {
                writeln!(err, "{w}")?;
            }
            let mut text = format_report(&label, config.style, &report);
            if let Some(r) = store.get(&key) {
                text += &format!(
                    "err_total = {:.3e}\nerr_leading = {:+.3e}\nerr_correction = {:+.3e}\n",
                    (report.w_tilde - r.w_tilde).abs(),
                    report.w1 - r.w1,
                    report.correction() - r.correction()
                );
            }
            emit(config, out, text.as_bytes())?;
        }
        Mode::Sweep { min, max } => {
            let reference = reference_for(config, &mut store, &key, &problem, err)?;
            let records = run_sweep(&problem, min, max, config.kappa1, &reference)?;
            let mut csv = Vec::new();
            write_csv(&mut csv, &records)?;
            emit(config, out, &csv)?;
        }
        Mode::Reference => {
            let reference = reference_for(config, &mut store, &key, &problem, err)?;
            let text = format!(
                "{label} {} reference m={}\nw_tilde = {:.10}\nw1 = {:.10}\n",
                config.style.name(),
                reference.m,
                reference.w_tilde,
                reference.w1
            );
            emit(config, out, text.as_bytes())?;
        }
    }
    Ok(())
}

fn reference_for(
    config: &RunConfig,
    store: &mut ReferenceStore,
    key: &ReferenceKey,
    problem: &Problem,
    err: &mut dyn Write,
) -> Result<ReferenceValues> {
    let cached = store.get(key).is_some() && !config.recompute_reference;
    if !cached {
        writeln!(
            err,
            "computing reference for {} {} at m = {}",
            key.label,
            key.style.name(),
            config::REFERENCE_M
        )?;
    }
    let values = ensure_reference(store, key, problem, config.recompute_reference)?;
    if let (false, Some(path)) = (cached, &config.ref_file) {
        store
            .save(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(values)
}

fn emit(config: &RunConfig, out: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match &config.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => out.write_all(bytes)?,
    }
    Ok(())
}
