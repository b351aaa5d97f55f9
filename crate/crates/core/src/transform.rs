//! Coordinate maps `s -> x -> y`, the transformed payoff `psi` and the
//! Dirichlet data on the unit cube.
//!
//! ```text
//! x(s, t) = Q^T (ln(s / K) - b(t)),   b_i(t) = (sigma_i^2 / 2 - r) t
//! y(x)    = arctan(x) / pi + 1/2
//! psi(y, t) = phi(K exp(Q x + b(t))),  x = tan(pi (y - 1/2))
//! ```

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{BasketContract, ColumnClass, MarketModel, SpectralModel};

/// Exponents are clamped to this magnitude before `exp`.
const EXP_CLAMP: f64 = 700.0;

/// `b(t)`.
pub fn drift(t: f64, model: &MarketModel) -> Vec<f64> {
    model
        .sigma()
        .iter()
        .map(|s| (0.5 * s * s - model.rate()) * t)
        .collect()
}

/// Compresses one coordinate of `R` onto `(0, 1)`.
pub fn x_to_y(x: f64) -> f64 {
    libm::atan(x) / PI + 0.5
}

/// Inverse of [`x_to_y`].
pub fn y_to_x(y: f64) -> f64 {
    libm::tan(PI * (y - 0.5))
}

/// Rotated log-moneyness `x(s, t)`.
pub fn s_to_x(
    s: &[f64],
    t: f64,
    spectral: &SpectralModel,
    model: &MarketModel,
    contract: &BasketContract,
) -> Result<Vec<f64>> {
    if s.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: s.len(),
        });
    }
    if s.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: "prices must be positive",
        });
    }
    let b = drift(t, model);
    let z: Vec<f64> = s
        .iter()
        .zip(&b)
        .map(|(si, bi)| libm::log(si / contract.strike()) - bi)
        .collect();
    Ok(spectral.eigenvectors().tr_mul_vec(&z))
}

/// `y(x(s, t))`.
pub fn s_to_y(
    s: &[f64],
    t: f64,
    spectral: &SpectralModel,
    model: &MarketModel,
    contract: &BasketContract,
) -> Result<Vec<f64>> {
    Ok(s_to_x(s, t, spectral, model, contract)?
        .into_iter()
        .map(x_to_y)
        .collect())
}

/// Inverse of [`s_to_x`]: `K exp(Q x + b(t))`.
pub fn x_to_s(
    x: &[f64],
    t: f64,
    spectral: &SpectralModel,
    model: &MarketModel,
    contract: &BasketContract,
) -> Vec<f64> {
    let qx = spectral.eigenvectors().mul_vec(x);
    let b = drift(t, model);
    qx.iter()
        .zip(&b)
        .map(|(a, bi)| contract.strike() * libm::exp((a + bi).clamp(-EXP_CLAMP, EXP_CLAMP)))
        .collect()
}

/// Basket put payoff `max(K - sum_i w_i s_i, 0)`.
pub fn payoff(s: &[f64], contract: &BasketContract) -> f64 {
    let basket: f64 = contract.weights().iter().zip(s).map(|(w, v)| w * v).sum();
    (contract.strike() - basket).max(0.0)
}

/// Transformed payoff `psi(y, t)` at an interior point of the unit cube.
pub fn psi(
    y: &[f64],
    t: f64,
    spectral: &SpectralModel,
    model: &MarketModel,
    contract: &BasketContract,
) -> f64 {
    let x: Vec<f64> = y.iter().map(|v| y_to_x(*v)).collect();
    payoff(&x_to_s(&x, t, spectral, model, contract), contract)
}

/// Point `Y0 = y(x(S0, T))` at which the option value is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPoint {
    y0: Vec<f64>,
    s0: Vec<f64>,
}

impl EvaluationPoint {
    pub fn new(
        s0: Vec<f64>,
        spectral: &SpectralModel,
        model: &MarketModel,
        contract: &BasketContract,
    ) -> Result<Self> {
        let y0 = s_to_y(&s0, contract.maturity(), spectral, model, contract)?;
        if y0.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidParameter {
                name: "S0",
                reason: "evaluation point falls on the boundary of the unit cube",
            });
        }
        Ok(Self { y0, s0 })
    }

    /// At-the-money spot `S0 = (K, ..., K)`.
    pub fn at_the_money(
        spectral: &SpectralModel,
        model: &MarketModel,
        contract: &BasketContract,
    ) -> Result<Self> {
        Self::new(
            alloc::vec![contract.strike(); model.dim()],
            spectral,
            model,
            contract,
        )
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }
}

/// Which face of the unit interval in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

/// Dirichlet value on the face `y_k = 0` (`Low`) or `y_k = 1` (`High`) at
/// time `t` inside the exercise interval starting at `interval_start`.
pub fn boundary_value(
    class: ColumnClass,
    side: Side,
    t: f64,
    interval_start: f64,
    rate: f64,
    strike: f64,
) -> f64 {
    match (side, class) {
        (Side::Low, ColumnClass::AllPositive) => strike * libm::exp(-rate * (t - interval_start)),
        _ => 0.0,
    }
}

/// Line `L_1` or plane `P_l` through `Y0` on which one PCA term is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    /// Varies `y_1` only.
    Line,
    /// Varies `y_1` and `y_l` (`l` is the zero-based direction index, `l >= 1`).
    Plane(usize),
}

impl Segment {
    pub fn second_direction(&self) -> Option<usize> {
        match self {
            Segment::Line => None,
            Segment::Plane(l) => Some(*l),
        }
    }
}

/// `psi(., t)` restricted to a segment through `Y0`.
///
/// The frozen off-segment coordinates are folded into one exponent offset per
/// asset, so each evaluation costs `d` exponentials.
#[derive(Debug, Clone)]
pub struct PayoffField {
    strike: f64,
    weights: Vec<f64>,
    offset: Vec<f64>,
    first: Vec<f64>,
    second: Option<Vec<f64>>,
}

impl PayoffField {
    pub fn new(
        segment: Segment,
        point: &EvaluationPoint,
        t: f64,
        spectral: &SpectralModel,
        model: &MarketModel,
        contract: &BasketContract,
    ) -> Self {
        let d = model.dim();
        let q = spectral.eigenvectors();
        let second_dir = segment.second_direction();
        let frozen: Vec<f64> = (0..d)
            .map(|k| {
                if k == 0 || Some(k) == second_dir {
                    0.0
                } else {
                    y_to_x(point.y0()[k])
                }
            })
            .collect();
        let b = drift(t, model);
        let qx = q.mul_vec(&frozen);
        let offset = qx.iter().zip(&b).map(|(a, bi)| a + bi).collect();
        Self {
            strike: contract.strike(),
            weights: contract.weights().to_vec(),
            offset,
            first: q.column(0),
            second: second_dir.map(|l| q.column(l)),
        }
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    /// Signed moneyness `K - sum_i w_i s_i` at `(y_1, y_l)`; `y_l` is ignored on a line.
    pub fn excess(&self, y_first: f64, y_second: f64) -> f64 {
        let x2 = if self.second.is_some() {
            y_to_x(y_second)
        } else {
            0.0
        };
        self.excess_at_x(y_to_x(y_first), x2)
    }

    /// [`excess`](Self::excess) in rotated log coordinates.
    pub fn excess_at_x(&self, x1: f64, x2: f64) -> f64 {
        let mut basket = 0.0;
        for i in 0..self.weights.len() {
            let mut e = self.offset[i] + self.first[i] * x1;
            if let Some(col) = &self.second {
                e += col[i] * x2;
            }
            basket += self.weights[i] * libm::exp(e.clamp(-EXP_CLAMP, EXP_CLAMP));
        }
        self.strike - self.strike * basket
    }

    /// [`excess_at_x`](Self::excess_at_x) on the tensor grid `x1 x x2`,
    /// row-major with `x1` as the row index. On a line `x2` is ignored and
    /// one row per `x1` entry is returned.
    ///
    /// Each exponential factors into a row and a column part, so the grid
    /// costs `d` multiplications per point.
    pub fn excess_grid(&self, x1: &[f64], x2: &[f64]) -> Vec<f64> {
        let d = self.weights.len();
        let x2: &[f64] = if self.second.is_some() { x2 } else { &[0.0] };
        let zeros = alloc::vec![0.0; d];
        let second = self.second.as_deref().unwrap_or(&zeros);
        let row_exp = |x: f64, k: usize| self.offset[k] + self.first[k] * x;
        let max_row = x1
            .iter()
            .flat_map(|x| (0..d).map(move |k| row_exp(*x, k).abs()))
            .fold(0.0, f64::max);
        let max_col = x2
            .iter()
            .flat_map(|x| second.iter().map(move |q| (q * x).abs()))
            .fold(0.0, f64::max);
        let mut out = Vec::with_capacity(x1.len() * x2.len());
        if max_row + max_col > EXP_CLAMP {
            for a in x1 {
                for b in x2 {
                    out.push(self.excess_at_x(*a, *b));
                }
            }
            return out;
        }
        let rows: Vec<f64> = x1
            .iter()
            .flat_map(|x| (0..d).map(move |k| self.weights[k] * libm::exp(row_exp(*x, k))))
            .collect();
        let cols: Vec<f64> = x2
            .iter()
            .flat_map(|x| second.iter().map(move |q| libm::exp(q * x)))
            .collect();
        for r in rows.chunks_exact(d) {
            for c in cols.chunks_exact(d) {
                let basket: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum();
                out.push(self.strike - self.strike * basket);
            }
        }
        out
    }

    /// `psi` at `(y_1, y_l)`.
    pub fn value(&self, y_first: f64, y_second: f64) -> f64 {
        self.excess(y_first, y_second).max(0.0)
    }
}
