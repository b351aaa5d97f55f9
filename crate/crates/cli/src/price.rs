//! Pricing runs over all PCA terms, one task per term.

use std::time::Instant;

use basket_pca::{
    BasketContract, MarketModel, PcaPricer, PricerConfig, PricingReport, SpectralModel,
};
use rayon::prelude::*;

use crate::config::{ConfigError, Source, Style};

/// Market, contract and spectral data of one (source, style) case.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: MarketModel,
    pub contract: BasketContract,
    pub spectral: SpectralModel,
    pub spot: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(source: &Source, style: Style) -> Result<Self, ConfigError> {
        let params = source.parameters();
        let model = params.model()?;
        let contract = params.contract(style)?;
        let spectral = SpectralModel::new(&model)?;
        Ok(Self {
            model,
            contract,
            spectral,
            spot: params.spot,
        })
    }

    pub fn pricer(&self, m: usize, kappa1: f64) -> basket_pca::Result<PcaPricer> {
        let config = PricerConfig {
            m,
            kappa1,
            spot: self.spot.clone(),
        };
        PcaPricer::new(&self.model, &self.contract, &self.spectral, &config)
    }

    pub fn strike(&self) -> f64 {
        self.contract.strike()
    }
}

/// Prices all terms in parallel and combines them in term order.
pub fn price(problem: &Problem, m: usize, kappa1: f64) -> basket_pca::Result<PricingReport> {
    let pricer = problem.pricer(m, kappa1)?;
    let solved = pricer
        .terms()
        .par_iter()
        .map(|term| {
            let start = Instant::now();
            let value = pricer.solve(*term)?;
            Ok((value, start.elapsed().as_secs_f64()))
        })
        .collect::<basket_pca::Result<Vec<_>>>()?;
    let (values, seconds): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    Ok(pricer.report(&values, seconds))
}

/// Same as [`price`] on the calling thread.
pub fn price_serial(problem: &Problem, m: usize, kappa1: f64) -> basket_pca::Result<PricingReport> {
    let origin = Instant::now();
    problem
        .pricer(m, kappa1)?
        .price_with_clock(|| origin.elapsed().as_secs_f64())
}

/// Human-readable summary of a report.
pub fn format_report(label: &str, style: Style, report: &PricingReport) -> String {
    let mut out = format!(
        "{label} {} m={} N={}\nw_tilde = {:.10}\nw1 = {:.10}\n",
        style.name(),
        report.m,
        report.steps,
        report.w_tilde,
        report.w1
    );
    for (k, v) in report.w1l.iter().enumerate() {
        out += &format!(
            "w1,{} = {:.10}  (correction {:+.3e})\n",
            k + 2,
            v,
            v - report.w1
        );
    }
    let total: f64 = report.seconds.iter().sum();
    out += &format!("seconds = {total:.3}\n");
    out
}

/// Warning text when the terminal grid leaves `[0, K]` by more than 1% of `K`.
pub fn bound_warning(report: &PricingReport, strike: f64) -> Option<String> {
    (report.bound_violation > 0.01 * strike).then(|| {
        format!(
            "warning: grid values leave [0, K] by {:.3e} (more than 1% of K = {strike})",
            report.bound_violation
        )
    })
}
