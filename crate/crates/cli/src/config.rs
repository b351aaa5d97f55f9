//! Run configuration: built-in parameter sets, flat key=value files and
//! the validated [`RunConfig`].

use std::fmt;
use std::path::PathBuf;

use basket_pca::{BasketContract, DenseMatrix, ExerciseStyle, MarketModel, DEFAULT_KAPPA1};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Smallest and largest mesh sizes accepted for sweeps.
pub const SWEEP_LIMITS: (usize, usize) = (10, 1000);

/// Mesh size of the stored references.
pub const REFERENCE_M: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    DuplicateKey(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("key `{key}`: expected {expected} entries, found {found}")]
    Length {
        key: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("give exactly one of a parameter set or a config file")]
    Source,
    #[error("give either a mesh size or a sweep range, or only the reference flag")]
    Mode,
    #[error("sweep range must satisfy 10 <= min <= max <= 1000, got {0}:{1}")]
    Range(usize, usize),
    #[error("mesh size must be at least 10, got {0}")]
    MeshSize(usize),
    #[error("a Bermudan run needs the number of exercise dates `E`")]
    MissingExercises,
    #[error("kappa1 must be positive and finite, got {0}")]
    Kappa(f64),
    #[error("invalid market or contract data: {0}")]
    Model(#[from] basket_pca::Error),
}

/// Built-in parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParameterSet {
    /// Five assets with distinct volatilities and weights.
    A,
    /// Ten equicorrelated assets.
    B,
    /// Fifteen equicorrelated assets.
    C,
}

impl ParameterSet {
    pub const ALL: [ParameterSet; 3] = [ParameterSet::A, ParameterSet::B, ParameterSet::C];

    pub fn parameters(self) -> Parameters {
        match self {
            ParameterSet::A => Parameters {
                d: 5,
                strike: 1.0,
                maturity: 1.0,
                rate: 0.05,
                exercises: Some(10),
                sigma: vec![0.518, 0.648, 0.623, 0.570, 0.530],
                omega: vec![0.381, 0.065, 0.057, 0.270, 0.227],
                rho: vec![
                    1.00, 0.79, 0.82, 0.91, 0.84, //
                    0.79, 1.00, 0.73, 0.80, 0.76, //
                    0.82, 0.73, 1.00, 0.77, 0.72, //
                    0.91, 0.80, 0.77, 1.00, 0.90, //
                    0.84, 0.76, 0.72, 0.90, 1.00,
                ],
                spot: None,
            },
            ParameterSet::B => equicorrelated(10),
            ParameterSet::C => equicorrelated(15),
        }
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ParameterSet::A => "A",
            ParameterSet::B => "B",
            ParameterSet::C => "C",
        };
        f.write_str(name)
    }
}

fn equicorrelated(d: usize) -> Parameters {
    let rho = (0..d * d)
        .map(|k| if k / d == k % d { 1.0 } else { 0.25 })
        .collect();
    Parameters {
        d,
        strike: 40.0,
        maturity: 1.0,
        rate: 0.06,
        exercises: Some(10),
        sigma: vec![0.2; d],
        omega: vec![1.0 / d as f64; d],
        rho,
        spot: None,
    }
}

/// Exercise style selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Style {
    European,
    Bermudan,
}

impl Style {
    pub fn name(self) -> &'static str {
        match self {
            Style::European => "european",
            Style::Bermudan => "bermudan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "european" => Some(Style::European),
            "bermudan" => Some(Style::Bermudan),
            _ => None,
        }
    }
}

/// Market and contract data of one basket put.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub d: usize,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    /// Number of exercise dates for Bermudan runs.
    pub exercises: Option<usize>,
    pub sigma: Vec<f64>,
    pub omega: Vec<f64>,
    /// Correlation matrix, row-major.
    pub rho: Vec<f64>,
    pub spot: Option<Vec<f64>>,
}

const KEYS: [&str; 9] = ["d", "K", "T", "r", "E", "sigma", "omega", "rho", "S0"];

impl Parameters {
    /// Parses flat `key = value` text. Lists are separated by commas or
    /// whitespace and may continue on indented lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: [Option<String>; 9] = Default::default();
        let mut last: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if raw.starts_with(char::is_whitespace) && !line.contains('=') {
                if let Some(value) = last.and_then(|k| values[k].as_mut()) {
                    value.push(' ');
                    value.push_str(line);
                    continue;
                }
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let key = key.trim();
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            if values[slot].is_some() {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            values[slot] = Some(value.trim().to_string());
            last = Some(slot);
        }
        let get = |k: usize| values[k].as_deref();
        let required = |k: usize| get(k).ok_or(ConfigError::MissingKey(KEYS[k]));

        let d: usize = scalar("d", required(0)?)?;
        let strike = scalar("K", required(1)?)?;
        let maturity = scalar("T", required(2)?)?;
        let rate = scalar("r", required(3)?)?;
        let exercises = get(4).map(|v| scalar("E", v)).transpose()?;
        let sigma = list("sigma", required(5)?, d)?;
        let omega = list("omega", required(6)?, d)?;
        let rho = list("rho", required(7)?, d * d)?;
        let spot = get(8).map(|v| list("S0", v, d)).transpose()?;
        let params = Parameters {
            d,
            strike,
            maturity,
            rate,
            exercises,
            sigma,
            omega,
            rho,
            spot,
        };
        // validate eagerly so that no solve starts on bad data
        params.model()?;
        params.contract(Style::European)?;
        Ok(params)
    }

    /// Canonical text form; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = format!(
            "d = {}\nK = {:?}\nT = {:?}\nr = {:?}\n",
            self.d, self.strike, self.maturity, self.rate
        );
        if let Some(e) = self.exercises {
            out += &format!("E = {e}\n");
        }
        out += &format!("sigma = {}\nomega = {}\nrho = {}\n", join(&self.sigma), join(&self.omega), join(&self.rho));
        if let Some(s) = &self.spot {
            out += &format!("S0 = {}\n", join(s));
        }
        out
    }

    /// Short stable fingerprint of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<MarketModel, ConfigError> {
        let rho = DenseMatrix::from_row_major(self.d, self.rho.clone())?;
        Ok(MarketModel::new(self.rate, self.sigma.clone(), rho)?)
    }

    pub fn contract(&self, style: Style) -> Result<BasketContract, ConfigError> {
        let style = match style {
            Style::European => ExerciseStyle::European,
            Style::Bermudan => ExerciseStyle::Bermudan {
                exercises: self.exercises.ok_or(ConfigError::MissingExercises)?,
            },
        };
        Ok(BasketContract::new(
            self.strike,
            self.maturity,
            self.omega.clone(),
            style,
        )?)
    }
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn list(key: &'static str, value: &str, expected: usize) -> Result<Vec<f64>, ConfigError> {
    let items = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<Result<Vec<f64>, _>>()?;
    if items.len() != expected {
        return Err(ConfigError::Length {
            key,
            expected,
            found: items.len(),
        });
    }
    Ok(items)
}

/// Where the market and contract data come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Set(ParameterSet),
    Inline(Parameters),
}

impl Source {
    pub fn parameters(&self) -> Parameters {
        match self {
            Source::Set(set) => set.parameters(),
            Source::Inline(p) => p.clone(),
        }
    }

    /// Name used to key stored references.
    pub fn label(&self) -> String {
        match self {
            Source::Set(set) => set.to_string(),
            Source::Inline(p) => format!("config-{}", p.fingerprint()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One price at mesh size `m`.
    Price { m: usize },
    /// One price per `m` in `min..=max`.
    Sweep { min: usize, max: usize },
    /// Only compute and store the reference values.
    Reference,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub style: Style,
    pub mode: Mode,
    /// Recompute references even if a stored value exists.
    pub recompute_reference: bool,
    pub ref_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kappa1: f64,
}

/// Unvalidated inputs, as they come from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    pub set: Option<ParameterSet>,
    pub inline: Option<Parameters>,
    pub style: Option<Style>,
    pub m: Option<usize>,
    pub sweep: Option<(usize, usize)>,
    pub reference: bool,
    pub ref_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kappa1: Option<f64>,
}

impl RunConfig {
    pub fn new(req: RunRequest) -> Result<Self, ConfigError> {
        let source = match (req.set, req.inline) {
            (Some(set), None) => Source::Set(set),
            (None, Some(p)) => Source::Inline(p),
            _ => return Err(ConfigError::Source),
        };
        let mode = match (req.m, req.sweep) {
            (Some(m), None) if m < SWEEP_LIMITS.0 => return Err(ConfigError::MeshSize(m)),
            (Some(m), None) => Mode::Price { m },
            (None, Some((min, max))) => {
                if min < SWEEP_LIMITS.0 || min > max || max > SWEEP_LIMITS.1 {
                    return Err(ConfigError::Range(min, max));
                }
                Mode::Sweep { min, max }
            }
            (None, None) if req.reference => Mode::Reference,
            _ => return Err(ConfigError::Mode),
        };
        let kappa1 = req.kappa1.unwrap_or(DEFAULT_KAPPA1);
        if !(kappa1.is_finite() && kappa1 > 0.0) {
            return Err(ConfigError::Kappa(kappa1));
        }
        let style = req.style.unwrap_or(Style::European);
        let params = source.parameters();
        params.model()?;
        params.contract(style)?;
        Ok(Self {
            source,
            style,
            mode,
            recompute_reference: req.reference,
            ref_file: req.ref_file,
            out: req.out,
            kappa1,
        })
    }
}

/// Parses `min:max`.
pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected <min>:<max>, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("not a mesh size: `{v}`"))
    };
    Ok((parse(a)?, parse(b)?))
}
