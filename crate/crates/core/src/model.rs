//! Market and contract data, covariance construction and its ordered
//! spectral decomposition.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Jacobi iteration stops once `off(A) <= JACOBI_TOL * ||Sigma||_F`.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero.
const PSD_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from `n * n` row-major entries.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (0..n).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self[(i, k)] * x[k]).sum())
            .collect()
    }

    /// `y = A^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|k| self[(k, j)] * x[k]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum::<f64>())
    }

    fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Financial inputs of the multivariate Black–Scholes model.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    rate: f64,
    sigma: Vec<f64>,
    rho: DenseMatrix,
}

impl MarketModel {
    /// Validates and stores rate, volatilities and correlations.
    ///
    /// Positive semidefiniteness of `rho` is checked later, when the
    /// covariance matrix is decomposed.
    pub fn new(rate: f64, sigma: Vec<f64>, rho: DenseMatrix) -> Result<Self> {
        let d = sigma.len();
        if d < 2 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "at least two assets are required",
            });
        }
        if rho.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.dim(),
            });
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: "must be finite and nonnegative",
            });
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "volatilities must be finite and positive",
            });
        }
        check_correlation(&rho)?;
        Ok(Self { rate, sigma, rho })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rho(&self) -> &DenseMatrix {
        &self.rho
    }
}

fn check_correlation(rho: &DenseMatrix) -> Result<()> {
    let d = rho.dim();
    for i in 0..d {
        if rho[(i, i)] != 1.0 {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: "diagonal entries must equal one",
            });
        }
        for j in 0..d {
            let v = rho[(i, j)];
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(Error::InvalidParameter {
                    name: "rho",
                    reason: "entries must lie in [-1, 1]",
                });
            }
        }
    }
    if !rho.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: "matrix must be symmetric",
        });
    }
    Ok(())
}

/// Exercise style of the basket put.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseStyle {
    European,
    /// `exercises` equidistant exercise times `tau_e = e T / E`, the last at maturity.
    Bermudan { exercises: usize },
}

/// Basket put contract: strike, maturity, weights and exercise style.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketContract {
    strike: f64,
    maturity: f64,
    weights: Vec<f64>,
    style: ExerciseStyle,
}

impl BasketContract {
    pub fn new(strike: f64, maturity: f64, weights: Vec<f64>, style: ExerciseStyle) -> Result<Self> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: "strike must be positive",
            });
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::InvalidParameter {
                name: "T",
                reason: "maturity must be positive",
            });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "weights must be positive",
            });
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "weights must sum to one",
            });
        }
        if let ExerciseStyle::Bermudan { exercises: 0 } = style {
            return Err(Error::InvalidParameter {
                name: "E",
                reason: "a Bermudan contract needs at least one exercise time",
            });
        }
        Ok(Self {
            strike,
            maturity,
            weights,
            style,
        })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn style(&self) -> ExerciseStyle {
        self.style
    }

    /// Same contract with a different exercise style.
    pub fn with_style(&self, style: ExerciseStyle) -> Result<Self> {
        Self::new(self.strike, self.maturity, self.weights.clone(), style)
    }

    /// Exercise times `tau_1 < ... < tau_E = T` in calendar time.
    pub fn exercise_times(&self) -> Vec<f64> {
        match self.style {
            ExerciseStyle::European => vec![self.maturity],
            ExerciseStyle::Bermudan { exercises } => (1..=exercises)
                .map(|e| e as f64 * self.maturity / exercises as f64)
                .collect(),
        }
    }
}

/// Interior exercise instants in time-to-maturity, `alpha_e = T - tau_{E-e}`
/// for `e = 1, ..., E-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseSchedule {
    alphas: Vec<f64>,
    horizon: f64,
}

impl ExerciseSchedule {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Start of exercise interval `e` (1-based), i.e. `alpha_{e-1}` with `alpha_0 = 0`.
    pub fn interval_start(&self, e: usize) -> f64 {
        if e <= 1 {
            0.0
        } else {
            self.alphas[e - 2]
        }
    }
}

/// Reversed-time exercise schedule of a contract.
///
/// European contracts (and Bermudan with `E = 1`) have an empty schedule.
pub fn reversed_schedule(contract: &BasketContract) -> Result<ExerciseSchedule> {
    let horizon = contract.maturity();
    let taus = contract.exercise_times();
    let count = taus.len();
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "E",
            reason: "a Bermudan contract needs at least one exercise time",
        });
    }
    let alphas = (1..count).map(|e| horizon - taus[count - 1 - e]).collect();
    Ok(ExerciseSchedule { alphas, horizon })
}

/// `Sigma_ij = sigma_i rho_ij sigma_j`.
pub fn build_covariance(sigma: &[f64], rho: &DenseMatrix) -> Result<DenseMatrix> {
    if rho.dim() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: sigma.len(),
            found: rho.dim(),
        });
    }
    if (0..rho.dim()).any(|i| rho[(i, i)] != 1.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: "diagonal entries must equal one",
        });
    }
    Ok(DenseMatrix::from_fn(sigma.len(), |i, j| {
        sigma[i] * rho[(i, j)] * sigma[j]
    }))
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    libm::sqrt(s)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(Q, lambda)` with `Sigma = Q diag(lambda) Q^T`, eigenvalues sorted
/// descending (stable with respect to Jacobi output order) and every column
/// sign-normalised so that its largest-magnitude entry is positive.
pub fn spectral_decompose(sigma: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = sigma.dim();
    if !sigma.is_symmetric(SYMMETRY_TOL * sigma.frobenius_norm().max(1.0)) {
        return Err(Error::InvalidParameter {
            name: "Sigma",
            reason: "matrix must be symmetric",
        });
    }
    let mut a = sigma.clone();
    let mut v = DenseMatrix::identity(n);
    let threshold = JACOBI_TOL * sigma.frobenius_norm();

    let mut converged = off_diagonal_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep Jacobi output order
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(core::cmp::Ordering::Equal));

    let mut lambda = Vec::with_capacity(n);
    for &k in &order {
        let l = a[(k, k)];
        if l < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite(l));
        }
        lambda.push(l.max(0.0));
    }
    let mut q = DenseMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    normalize_signs(&mut q);
    Ok((q, lambda))
}

/// One Jacobi rotation annihilating `a[p][q]`, accumulated into `v`.
fn jacobi_rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let n = a.dim();
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    // negligible next to both diagonal entries: drop it
    if app.abs() + 100.0 * apq.abs() == app.abs() && aqq.abs() + 100.0 * apq.abs() == aqq.abs() {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;

    for k in 0..n {
        if k != p && k != q {
            let akp = a[(k, p)];
            let akq = a[(k, q)];
            let new_kp = c * akp - s * akq;
            let new_kq = s * akp + c * akq;
            a[(k, p)] = new_kp;
            a[(p, k)] = new_kp;
            a[(k, q)] = new_kq;
            a[(q, k)] = new_kq;
        }
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips each column so that its largest-magnitude entry (lowest index on
/// ties) is positive.
pub fn normalize_signs(q: &mut DenseMatrix) {
    let n = q.dim();
    for j in 0..n {
        let mut pivot = 0;
        for i in 1..n {
            if q[(i, j)].abs() > q[(pivot, j)].abs() {
                pivot = i;
            }
        }
        if q[(pivot, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
}

/// Sign pattern of an eigenvector column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnClass {
    /// Every entry strictly positive.
    AllPositive,
    /// At least one strictly positive and one strictly negative entry.
    Mixed,
}

/// Tags every column of a sign-normalised `Q`.
///
/// A column that is nonnegative with a zero entry fits neither class and is
/// rejected.
pub fn classify_columns(q: &DenseMatrix) -> Result<Vec<ColumnClass>> {
    (0..q.dim())
        .map(|j| {
            let col = q.column(j);
            let has_pos = col.iter().any(|v| *v > 0.0);
            let has_neg = col.iter().any(|v| *v < 0.0);
            if has_pos && has_neg {
                Ok(ColumnClass::Mixed)
            } else if col.iter().all(|v| *v > 0.0) {
                Ok(ColumnClass::AllPositive)
            } else if col.iter().all(|v| *v < 0.0) {
                // only reachable without sign normalisation
                Ok(ColumnClass::Mixed)
            } else {
                Err(Error::DegenerateColumn(j))
            }
        })
        .collect()
}

/// Covariance matrix together with its ordered eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    covariance: DenseMatrix,
    q: DenseMatrix,
    lambda: Vec<f64>,
    column_class: Vec<ColumnClass>,
}

impl SpectralModel {
    pub fn new(model: &MarketModel) -> Result<Self> {
        let covariance = build_covariance(model.sigma(), model.rho())?;
        Self::from_covariance(covariance)
    }

    pub fn from_covariance(covariance: DenseMatrix) -> Result<Self> {
        let (q, lambda) = spectral_decompose(&covariance)?;
        let column_class = classify_columns(&q)?;
        Ok(Self {
            covariance,
            q,
            lambda,
            column_class,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn covariance(&self) -> &DenseMatrix {
        &self.covariance
    }

    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn column_class(&self, k: usize) -> ColumnClass {
        self.column_class[k]
    }

    pub fn column_classes(&self) -> &[ColumnClass] {
        &self.column_class
    }
}
