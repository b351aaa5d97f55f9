use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use basket_pca_cli::config::{parse_range, ParameterSet, Parameters, RunConfig, RunRequest, Style};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    European,
    Bermudan,
}

/// PCA-based PDE pricer for European and Bermudan basket puts.
#[derive(Debug, Parser)]
#[command(name = "basket-pca", version)]
struct Args {
    /// Built-in parameter set.
    #[arg(long, value_enum)]
    set: Option<SetArg>,
    /// Flat key=value parameter file (keys d, K, T, r, E, sigma, omega, rho, S0).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "european")]
    style: StyleArg,
    /// Interior mesh points per direction.
    #[arg(long)]
    m: Option<usize>,
    /// Convergence sweep over mesh sizes, e.g. 10:100.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    sweep: Option<(usize, usize)>,
    /// Recompute the m = 1000 reference even if one is stored.
    #[arg(long)]
    reference: bool,
    /// Reference cache file.
    #[arg(long, value_name = "PATH")]
    ref_file: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Mesh stretching parameter.
    #[arg(long, default_value_t = basket_pca::DEFAULT_KAPPA1)]
    kappa1: f64,
}

fn request(args: Args) -> anyhow::Result<RunRequest> {
    let inline = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(Parameters::parse(&text).with_context(|| format!("in {}", path.display()))?)
        }
        None => None,
    };
    Ok(RunRequest {
        set: args.set.map(|s| match s {
            SetArg::A => ParameterSet::A,
            SetArg::B => ParameterSet::B,
            SetArg::C => ParameterSet::C,
        }),
        inline,
        style: Some(match args.style {
            StyleArg::European => Style::European,
            StyleArg::Bermudan => Style::Bermudan,
        }),
        m: args.m,
        sweep: args.sweep,
        reference: args.reference,
        ref_file: args.ref_file,
        out: args.out,
        kappa1: Some(args.kappa1),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = request(args)
        .and_then(|req| Ok(RunConfig::new(req)?))
        .and_then(|config| basket_pca_cli::run(&config, &mut io::stdout(), &mut io::stderr()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
