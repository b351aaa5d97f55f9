//! PCA decomposition of the basket price into one leading 1D term and
//! `d - 1` two-dimensional correction terms.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{build_mesh, Mesh1D};
use crate::model::{
    reversed_schedule, BasketContract, ExerciseSchedule, ExerciseStyle, MarketModel, SpectralModel,
};
use crate::solver::{solve_term, ExerciseObserver, GridFunction, TermSetup};
use crate::transform::{EvaluationPoint, PayoffField, Segment};

/// Discretisation settings for one pricing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PricerConfig {
    /// Interior mesh points per direction.
    pub m: usize,
    pub kappa1: f64,
    /// Spot prices; `None` means at the money, `S0 = (K, ..., K)`.
    pub spot: Option<Vec<f64>>,
}

impl PricerConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            kappa1: crate::grid::DEFAULT_KAPPA1,
            spot: None,
        }
    }
}

/// One term of the PCA expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// `w^(1)` on the line `L_1`.
    Leading,
    /// `w^(1,l)` on the plane `P_l`; `l` is the zero-based direction, `1 <= l < d`.
    Correction(usize),
}

impl Term {
    pub fn segment(&self) -> Segment {
        match self {
            Term::Leading => Segment::Line,
            Term::Correction(l) => Segment::Plane(*l),
        }
    }
}

/// Solved value of one term at `Y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    pub value: f64,
    /// Largest excursion of the terminal grid function outside `[0, K]`.
    pub bound_violation: f64,
}

/// Result of a full PCA pricing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingReport {
    pub w1: f64,
    /// `w^(1,l)(Y0, T)` for `l = 2, ..., d`.
    pub w1l: Vec<f64>,
    pub w_tilde: f64,
    /// Wall-clock seconds per term, leading term first.
    pub seconds: Vec<f64>,
    pub m: usize,
    pub steps: usize,
    pub bound_violation: f64,
}

impl PricingReport {
    /// Sum of the corrections `sum_l (w1l - w1)`, accumulated in increasing `l`.
    pub fn correction(&self) -> f64 {
        self.w1l.iter().fold(0.0, |acc, v| acc + (v - self.w1))
    }
}

/// `w1 + sum_l (w1l - w1)` accumulated left to right in increasing `l`.
pub fn combine(w1: f64, w1l: &[f64]) -> f64 {
    w1l.iter().fold(w1, |acc, v| acc + (v - w1))
}

/// Number of time steps: `N = m` (European) or `N = 2E ceil(m / E)` (Bermudan).
pub fn time_steps(style: ExerciseStyle, m: usize) -> usize {
    match style {
        ExerciseStyle::European => m,
        ExerciseStyle::Bermudan { exercises } => 2 * exercises * m.div_ceil(exercises),
    }
}

/// Prices a basket put through its PCA terms.
#[derive(Debug, Clone)]
pub struct PcaPricer {
    model: MarketModel,
    contract: BasketContract,
    spectral: SpectralModel,
    mesh: Mesh1D,
    schedule: ExerciseSchedule,
    point: EvaluationPoint,
    steps: usize,
}

impl PcaPricer {
    pub fn new(
        model: &MarketModel,
        contract: &BasketContract,
        spectral: &SpectralModel,
        config: &PricerConfig,
    ) -> Result<Self> {
        if config.m < 10 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "at least ten mesh points are required",
            });
        }
        if contract.weights().len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: contract.weights().len(),
            });
        }
        if spectral.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: spectral.dim(),
            });
        }
        if !(spectral.eigenvalues()[0] > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "leading eigenvalue must be positive",
            });
        }
        let mesh = build_mesh(config.m, config.kappa1)?;
        let schedule = reversed_schedule(contract)?;
        let point = match &config.spot {
            Some(s0) => EvaluationPoint::new(s0.clone(), spectral, model, contract)?,
            None => EvaluationPoint::at_the_money(spectral, model, contract)?,
        };
        let steps = time_steps(contract.style(), config.m);
        let pricer = Self {
            model: model.clone(),
            contract: contract.clone(),
            spectral: spectral.clone(),
            mesh,
            schedule,
            point,
            steps,
        };
        // evaluation point must be interpolable in every solved direction
        let ys = pricer.mesh.interior_points();
        for k in 0..model.dim() {
            let y = pricer.point.y0()[k];
            if y < ys[0] || y > ys[ys.len() - 1] {
                return Err(Error::OutOfRange(y));
            }
        }
        Ok(pricer)
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn schedule(&self) -> &ExerciseSchedule {
        &self.schedule
    }

    pub fn point(&self) -> &EvaluationPoint {
        &self.point
    }

    pub fn contract(&self) -> &BasketContract {
        &self.contract
    }

    /// All terms in combination order: leading, then `l = 2, ..., d`.
    pub fn terms(&self) -> Vec<Term> {
        let mut terms = vec![Term::Leading];
        terms.extend((1..self.model.dim()).map(Term::Correction));
        terms
    }

    fn setup(&self, term: Term) -> TermSetup<'_> {
        TermSetup {
            segment: term.segment(),
            mesh: &self.mesh,
            steps: self.steps,
            schedule: &self.schedule,
            point: &self.point,
            spectral: &self.spectral,
            model: &self.model,
            contract: &self.contract,
        }
    }

    /// Coordinates of `Y0` in the directions solved by `term`.
    fn target(&self, term: Term) -> (f64, f64) {
        let y0 = self.point.y0();
        match term {
            Term::Leading => (y0[0], 0.0),
            Term::Correction(l) => (y0[0], y0[l]),
        }
    }

    /// Terminal grid function of one term.
    pub fn solve_grid<O: ExerciseObserver + ?Sized>(
        &self,
        term: Term,
        observer: &mut O,
    ) -> Result<GridFunction> {
        solve_term(&self.setup(term), observer)
    }

    /// Value of one term at `(Y0, T)`.
    pub fn solve(&self, term: Term) -> Result<TermValue> {
        let grid = self.solve_grid(term, &mut ())?;
        let value = self.read_off(term, grid.values())?;
        Ok(TermValue {
            value,
            bound_violation: grid.bound_violation(self.contract.strike()),
        })
    }

    fn read_off(&self, term: Term, values: &[f64]) -> Result<f64> {
        let (a, b) = self.target(term);
        match term {
            Term::Leading => interpolate_line(values, &self.mesh, a),
            Term::Correction(_) => interpolate_plane(values, &self.mesh, a, b),
        }
    }

    /// Combines per-term values (in [`terms`](Self::terms) order) into a report.
    pub fn report(&self, values: &[TermValue], seconds: Vec<f64>) -> PricingReport {
        let w1 = values[0].value;
        let w1l: Vec<f64> = values[1..].iter().map(|v| v.value).collect();
        let w_tilde = combine(w1, &w1l);
        PricingReport {
            w1,
            w1l,
            w_tilde,
            seconds,
            m: self.mesh.interior(),
            steps: self.steps,
            bound_violation: values.iter().fold(0.0, |a, v| a.max(v.bound_violation)),
        }
    }

    /// Solves every term serially; `clock` returns monotonic seconds.
    pub fn price_with_clock(&self, mut clock: impl FnMut() -> f64) -> Result<PricingReport> {
        let mut values = Vec::with_capacity(self.model.dim());
        let mut seconds = Vec::with_capacity(self.model.dim());
        for term in self.terms() {
            let start = clock();
            values.push(self.solve(term)?);
            seconds.push(clock() - start);
        }
        Ok(self.report(&values, seconds))
    }

    /// Solves every term serially without timing.
    pub fn price(&self) -> Result<PricingReport> {
        self.price_with_clock(|| 0.0)
    }

    /// `w^(1)(Y0, T)` alone.
    pub fn leading_term(&self) -> Result<f64> {
        Ok(self.solve(Term::Leading)?.value)
    }

    /// Mismatch of the combined approximation with the optimal exercise
    /// condition at `alpha_e`, for points `(y_1, Y0_2, ..., Y0_d)` on `L_1`:
    ///
    /// ```text
    /// delta(y) = w~(y, alpha_e) - max(psi_e(y), w~(y, alpha_e-))
    /// ```
    ///
    /// European contracts have no projection and return zeros.
    pub fn exercise_consistency(&self, exercise: usize, probes: &[f64]) -> Result<Vec<f64>> {
        if self.schedule.is_empty() {
            if matches!(self.contract.style(), ExerciseStyle::European) {
                return Ok(vec![0.0; probes.len()]);
            }
            return Err(Error::InvalidParameter {
                name: "e",
                reason: "contract has no interior exercise date",
            });
        }
        if exercise == 0 || exercise > self.schedule.len() {
            return Err(Error::InvalidParameter {
                name: "e",
                reason: "exercise index out of range",
            });
        }
        let ys = self.mesh.interior_points();
        if let Some(p) = probes.iter().find(|p| **p < ys[0] || **p > ys[ys.len() - 1]) {
            return Err(Error::OutOfRange(*p));
        }

        let mut before_sum = vec![0.0; probes.len()];
        let mut after_sum = vec![0.0; probes.len()];
        let mut lead_before = vec![0.0; probes.len()];
        let mut lead_after = vec![0.0; probes.len()];
        for term in self.terms() {
            let mut recorder = ProbeRecorder {
                exercise,
                mesh: &self.mesh,
                probes,
                second: match term {
                    Term::Leading => None,
                    Term::Correction(l) => Some(self.point.y0()[l]),
                },
                before: Vec::new(),
                after: Vec::new(),
                error: None,
            };
            self.solve_grid(term, &mut recorder)?;
            if let Some(err) = recorder.error {
                return Err(err);
            }
            match term {
                Term::Leading => {
                    lead_before = recorder.before;
                    lead_after = recorder.after;
                }
                Term::Correction(_) => {
                    for k in 0..probes.len() {
                        before_sum[k] += recorder.before[k];
                        after_sum[k] += recorder.after[k];
                    }
                }
            }
        }
        let corrections = (self.model.dim() - 1) as f64;
        let alpha = self.schedule.alphas()[exercise - 1];
        let field = PayoffField::new(
            Segment::Line,
            &self.point,
            alpha,
            &self.spectral,
            &self.model,
            &self.contract,
        );
        Ok(probes
            .iter()
            .enumerate()
            .map(|(k, y)| {
                let pre = before_sum[k] - (corrections - 1.0) * lead_before[k];
                let post = after_sum[k] - (corrections - 1.0) * lead_after[k];
                post - field.value(*y, 0.0).max(pre)
            })
            .collect())
    }
}

struct ProbeRecorder<'a> {
    exercise: usize,
    mesh: &'a Mesh1D,
    probes: &'a [f64],
    second: Option<f64>,
    before: Vec<f64>,
    after: Vec<f64>,
    error: Option<Error>,
}

impl ProbeRecorder<'_> {
    fn sample(&mut self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.probes.len());
        for &p in self.probes {
            let v = match self.second {
                None => interpolate_line(values, self.mesh, p),
                Some(y2) => interpolate_plane(values, self.mesh, p, y2),
            };
            match v {
                Ok(v) => out.push(v),
                Err(e) => {
                    self.error = Some(e);
                    out.push(f64::NAN);
                }
            }
        }
        out
    }
}

impl ExerciseObserver for ProbeRecorder<'_> {
    fn observe(&mut self, exercise: usize, before: &[f64], after: &[f64]) {
        if exercise == self.exercise {
            self.before = self.sample(before);
            self.after = self.sample(after);
        }
    }
}

/// Start of the four-node stencil around `target` and the Lagrange weights.
fn cubic_stencil(nodes: &[f64], target: f64) -> Result<(usize, [f64; 4])> {
    let n = nodes.len();
    if n < 4 || !(target >= nodes[0] && target <= nodes[n - 1]) {
        return Err(Error::OutOfRange(target));
    }
    // last node not above the target
    let k = nodes.partition_point(|y| *y <= target).saturating_sub(1);
    let start = k.saturating_sub(1).min(n - 4);
    let xs = &nodes[start..start + 4];
    let mut w = [0.0; 4];
    for j in 0..4 {
        let mut l = 1.0;
        for i in 0..4 {
            if i != j {
                l *= (target - xs[i]) / (xs[j] - xs[i]);
            }
        }
        w[j] = l;
    }
    Ok((start, w))
}

/// Cubic Lagrange interpolation of line values at `target`.
pub fn interpolate_line(values: &[f64], mesh: &Mesh1D, target: f64) -> Result<f64> {
    if values.len() != mesh.interior() {
        return Err(Error::DimensionMismatch {
            expected: mesh.interior(),
            found: values.len(),
        });
    }
    let (start, w) = cubic_stencil(mesh.interior_points(), target)?;
    Ok((0..4).map(|j| w[j] * values[start + j]).sum())
}

/// Tensor-product cubic Lagrange interpolation of plane values at `(y_1, y_l)`.
pub fn interpolate_plane(values: &[f64], mesh: &Mesh1D, first: f64, second: f64) -> Result<f64> {
    let m = mesh.interior();
    if values.len() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            found: values.len(),
        });
    }
    let (s1, w1) = cubic_stencil(mesh.interior_points(), first)?;
    let (s2, w2) = cubic_stencil(mesh.interior_points(), second)?;
    let mut total = 0.0;
    for a in 0..4 {
        let row = &values[(s1 + a) * m..(s1 + a + 1) * m];
        let inner: f64 = (0..4).map(|b| w2[b] * row[s2 + b]).sum();
        total += w1[a] * inner;
    }
    Ok(total)
}
