//! Semidiscrete operators and time stepping for the 1D and 2D PCA terms.
//!
//! Each direction contributes a tridiagonal operator `A_j` and an affine
//! boundary vector `g_j(t)`, so that `W' = sum_j (A_j W + g_j(t))`. The 1D
//! system is advanced with Crank–Nicolson, the 2D system with the Douglas
//! ADI scheme (`theta = 1/2`); both start with two backward-Euler half steps
//! after `t = 0` and after every exercise date.
//!
//! Plane grid functions are stored row-major with the first direction as
//! the row index: entry `(i, j)` lives at `i * m + j`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{cell_average_initial, nodal_values, pq_coefficients, Mesh1D};
use crate::model::{BasketContract, ColumnClass, ExerciseSchedule, MarketModel, SpectralModel};
use crate::transform::{EvaluationPoint, PayoffField, Segment, Side};

/// Tridiagonal operator along one direction with its couplings to the two
/// Dirichlet nodes split off.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    low_coupling: f64,
    high_coupling: f64,
}

impl TridiagonalOperator {
    /// Builds an operator from its three bands. `lower[0]` and `upper[n - 1]`
    /// are the couplings to the low and high boundary nodes.
    pub fn from_bands(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if lower.len() != n { lower.len() } else { upper.len() },
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "operator",
                reason: "empty operator",
            });
        }
        let mut lower = lower;
        let mut upper = upper;
        let low_coupling = core::mem::replace(&mut lower[0], 0.0);
        let high_coupling = core::mem::replace(&mut upper[n - 1], 0.0);
        Ok(Self {
            lower,
            diag,
            upper,
            low_coupling,
            high_coupling,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Weight of the low boundary node in the first row.
    pub fn low_coupling(&self) -> f64 {
        self.low_coupling
    }

    /// Weight of the high boundary node in the last row.
    pub fn high_coupling(&self) -> f64 {
        self.high_coupling
    }

    /// `out = A v` (boundary contributions excluded).
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        if n == 1 {
            out[0] = self.diag[0] * v[0];
            return;
        }
        let out = &mut out[..n];
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * x;
        }
        for ((o, l), x) in out[1..].iter_mut().zip(&self.lower[1..]).zip(v) {
            *o += l * x;
        }
        for ((o, u), x) in out.iter_mut().zip(&self.upper[..n - 1]).zip(&v[1..]) {
            *o += u * x;
        }
    }

    /// LU factorisation of `I - c A`.
    pub fn factor_shifted(&self, c: f64) -> Result<TridiagonalLu> {
        let n = self.len();
        let mut mult = vec![0.0; n];
        let mut inv_diag = vec![0.0; n];
        let upper: Vec<f64> = self.upper.iter().map(|u| -c * u).collect();
        let mut pivot = 1.0 - c * self.diag[0];
        for i in 0..n {
            if i > 0 {
                mult[i] = -c * self.lower[i] / pivot;
                pivot = 1.0 - c * self.diag[i] - mult[i] * upper[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
            inv_diag[i] = 1.0 / pivot;
        }
        Ok(TridiagonalLu {
            shift: c,
            mult,
            inv_diag,
            upper,
        })
    }
}

/// Semidiscrete operator `lambda_k [p(y_i) gamma_i + q(y_i) beta_i] - r_share`
/// on the interior nodes of `mesh`.
pub fn assemble_operator(mesh: &Mesh1D, lambda: f64, r_share: f64) -> TridiagonalOperator {
    let m = mesh.interior();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for (i, (w, y)) in mesh.weights().iter().zip(mesh.interior_points()).enumerate() {
        let (p, q) = pq_coefficients(*y);
        lower[i] = lambda * (p * w.second[0] + q * w.first[0]);
        diag[i] = lambda * (p * w.second[1] + q * w.first[1]) - r_share;
        upper[i] = lambda * (p * w.second[2] + q * w.first[2]);
    }
    TridiagonalOperator::from_bands(lower, diag, upper)
        .expect("mesh has at least three interior points")
}

const ROW_BLOCK: usize = 8;

/// Prefactored `I - c A`, reused across time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLu {
    shift: f64,
    mult: Vec<f64>,
    inv_diag: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.inv_diag.len();
        for i in 1..n {
            x[i] -= self.mult[i] * x[i - 1];
        }
        x[n - 1] *= self.inv_diag[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) * self.inv_diag[i];
        }
    }

    /// Solves every contiguous length-`n` row of `x` independently.
    ///
    /// Rows are processed in interleaved groups so their recurrences overlap.
    pub fn solve_each_row_in_place(&self, x: &mut [f64]) {
        let n = self.inv_diag.len();
        let mut blocks = x.chunks_exact_mut(ROW_BLOCK * n);
        for block in &mut blocks {
            let mut rows = block.chunks_exact_mut(n);
            let mut group: [&mut [f64]; ROW_BLOCK] = core::array::from_fn(|_| rows.next().unwrap());
            self.solve_group(&mut group);
        }
        for row in blocks.into_remainder().chunks_exact_mut(n) {
            self.solve_in_place(row);
        }
    }

    fn solve_group(&self, rows: &mut [&mut [f64]; ROW_BLOCK]) {
        let n = self.inv_diag.len();
        for row in rows.iter() {
            assert_eq!(row.len(), n);
        }
        let mut prev = [0.0; ROW_BLOCK];
        for (r, row) in rows.iter().enumerate() {
            prev[r] = row[0];
        }
        for i in 1..n {
            let f = self.mult[i];
            for (p, row) in prev.iter_mut().zip(rows.iter_mut()) {
                let v = row[i] - f * *p;
                row[i] = v;
                *p = v;
            }
        }
        let inv = self.inv_diag[n - 1];
        for (p, row) in prev.iter_mut().zip(rows.iter_mut()) {
            *p = row[n - 1] * inv;
            row[n - 1] = *p;
        }
        for i in (0..n - 1).rev() {
            let (u, inv) = (self.upper[i], self.inv_diag[i]);
            for (p, row) in prev.iter_mut().zip(rows.iter_mut()) {
                let v = (row[i] - u * *p) * inv;
                row[i] = v;
                *p = v;
            }
        }
    }

    /// Solves along the row index of a row-major `n x width` block, i.e. one
    /// independent system per column, all sharing this factorisation.
    pub fn solve_rows_in_place(&self, x: &mut [f64], width: usize) {
        let n = self.inv_diag.len();
        for i in 1..n {
            let (done, rest) = x.split_at_mut(i * width);
            let prev = &done[(i - 1) * width..];
            let cur = &mut rest[..width];
            let f = self.mult[i];
            for (c, p) in cur.iter_mut().zip(prev) {
                *c -= f * p;
            }
        }
        let last = &mut x[(n - 1) * width..];
        let f = self.inv_diag[n - 1];
        last.iter_mut().for_each(|v| *v *= f);
        for i in (0..n - 1).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * width);
            let cur = &mut head[i * width..];
            let next = &tail[..width];
            let (u, inv) = (self.upper[i], self.inv_diag[i]);
            for (c, nx) in cur.iter_mut().zip(next) {
                *c = (*c - u * nx) * inv;
            }
        }
    }
}

/// Solves `(I - c A) x = rhs` with the Thomas algorithm.
pub fn thomas_solve(op: &TridiagonalOperator, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != op.len() {
        return Err(Error::DimensionMismatch {
            expected: op.len(),
            found: rhs.len(),
        });
    }
    let lu = op.factor_shifted(c)?;
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Dirichlet value on one face of a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirichletValue {
    Zero,
    /// `value * exp(-rate (t - interval_start))`.
    Discounted { value: f64, rate: f64 },
}

impl DirichletValue {
    /// Face value implied by the eigenvector column class.
    pub fn for_face(class: ColumnClass, side: Side, strike: f64, rate: f64) -> Self {
        match (class, side) {
            (ColumnClass::AllPositive, Side::Low) => DirichletValue::Discounted {
                value: strike,
                rate,
            },
            _ => DirichletValue::Zero,
        }
    }

    pub fn at(&self, t: f64, interval_start: f64) -> f64 {
        match *self {
            DirichletValue::Zero => 0.0,
            DirichletValue::Discounted { value, rate } => {
                value * libm::exp(-rate * (t - interval_start))
            }
        }
    }
}

/// `g(t)`: boundary couplings times Dirichlet values, nonzero only on the
/// first and last node of a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineBoundaryTerm {
    low_weight: f64,
    high_weight: f64,
    low: DirichletValue,
    high: DirichletValue,
}

impl AffineBoundaryTerm {
    pub fn new(op: &TridiagonalOperator, low: DirichletValue, high: DirichletValue) -> Self {
        Self {
            low_weight: op.low_coupling(),
            high_weight: op.high_coupling(),
            low,
            high,
        }
    }

    /// Contributions `(g_first, g_last)` at time `t`.
    pub fn at(&self, t: f64, interval_start: f64) -> (f64, f64) {
        (
            self.low_weight * self.low.at(t, interval_start),
            self.high_weight * self.high.at(t, interval_start),
        )
    }

    /// Dense `g(t)` of length `n`.
    pub fn vector(&self, n: usize, t: f64, interval_start: f64) -> Vec<f64> {
        let mut g = vec![0.0; n];
        let (lo, hi) = self.at(t, interval_start);
        g[0] += lo;
        g[n - 1] += hi;
        g
    }
}

/// One direction's operator, boundary term and cached factorisation.
#[derive(Debug, Clone)]
pub struct DirectionalSystem {
    op: TridiagonalOperator,
    boundary: AffineBoundaryTerm,
    lu: Option<TridiagonalLu>,
}

impl DirectionalSystem {
    pub fn new(op: TridiagonalOperator, low: DirichletValue, high: DirichletValue) -> Self {
        let boundary = AffineBoundaryTerm::new(&op, low, high);
        Self {
            op,
            boundary,
            lu: None,
        }
    }

    pub fn operator(&self) -> &TridiagonalOperator {
        &self.op
    }

    pub fn boundary(&self) -> &AffineBoundaryTerm {
        &self.boundary
    }

    fn len(&self) -> usize {
        self.op.len()
    }

    /// Factorisation of `I - c A`, recomputed only when `c` changes.
    fn lu(&mut self, c: f64) -> Result<&TridiagonalLu> {
        let stale = self.lu.as_ref().is_none_or(|lu| lu.shift() != c);
        if stale {
            self.lu = Some(self.op.factor_shifted(c)?);
        }
        Ok(self.lu.as_ref().expect("factorisation present"))
    }

    fn factored(&mut self, c: f64) -> Result<(&TridiagonalOperator, &TridiagonalLu)> {
        self.lu(c)?;
        Ok((&self.op, self.lu.as_ref().expect("factorisation present")))
    }
}

/// Values of a term's solution on its interior nodes at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    m: usize,
    plane: bool,
    time: f64,
    interval: usize,
}

impl GridFunction {
    pub fn line(values: Vec<f64>) -> Self {
        let m = values.len();
        Self {
            values,
            m,
            plane: false,
            time: 0.0,
            interval: 1,
        }
    }

    pub fn plane(values: Vec<f64>, m: usize) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            m,
            plane: true,
            time: 0.0,
            interval: 1,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nodes per direction.
    pub fn side_len(&self) -> usize {
        self.m
    }

    pub fn is_plane(&self) -> bool {
        self.plane
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Current exercise interval (1-based).
    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Largest distance of any entry outside `[0, strike]`.
    pub fn bound_violation(&self, strike: f64) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| {
            acc.max(-v).max(v - strike)
        })
    }
}

/// Componentwise `max(W, Psi_e)`; advances the exercise interval.
pub fn exercise_project(w: &mut GridFunction, psi_e: &[f64]) -> Result<()> {
    if psi_e.len() != w.values.len() {
        return Err(Error::DimensionMismatch {
            expected: w.values.len(),
            found: psi_e.len(),
        });
    }
    for (v, p) in w.values.iter_mut().zip(psi_e) {
        *v = v.max(*p);
    }
    w.interval += 1;
    Ok(())
}

/// A semidiscrete system that can be advanced by one time step.
pub trait TimeStepper {
    /// Regular second-order step from `t` to `t + dt`.
    fn step(&mut self, w: &mut [f64], t: f64, dt: f64, interval_start: f64) -> Result<()>;

    /// Two backward-Euler half steps from `t` to `t + dt`.
    fn damped_substeps(
        &mut self,
        w: &mut [f64],
        t: f64,
        dt: f64,
        interval_start: f64,
    ) -> Result<()>;
}

/// 1D system `W' = A W + g(t)` on the line segment.
#[derive(Debug, Clone)]
pub struct LineSystem {
    dir: DirectionalSystem,
    work: Vec<f64>,
}

impl LineSystem {
    pub fn new(dir: DirectionalSystem) -> Self {
        let n = dir.len();
        Self {
            dir,
            work: vec![0.0; n],
        }
    }

    /// Crank–Nicolson:
    /// `(I - dt/2 A) W_new = (I + dt/2 A) W + dt/2 (g(t) + g(t + dt))`.
    pub fn cn_step(&mut self, w: &mut [f64], t: f64, dt: f64, interval_start: f64) -> Result<()> {
        let n = self.dir.len();
        let half = 0.5 * dt;
        self.dir.op.apply(w, &mut self.work);
        let (g0l, g0h) = self.dir.boundary.at(t, interval_start);
        let (g1l, g1h) = self.dir.boundary.at(t + dt, interval_start);
        for (v, aw) in w.iter_mut().zip(&self.work) {
            *v += half * aw;
        }
        w[0] += half * (g0l + g1l);
        w[n - 1] += half * (g0h + g1h);
        self.dir.lu(half)?.solve_in_place(w);
        Ok(())
    }

    /// Backward Euler: `(I - h A) W_new = W + h g(t + h)`.
    pub fn backward_euler(
        &mut self,
        w: &mut [f64],
        t: f64,
        h: f64,
        interval_start: f64,
    ) -> Result<()> {
        let n = self.dir.len();
        let (gl, gh) = self.dir.boundary.at(t + h, interval_start);
        w[0] += h * gl;
        w[n - 1] += h * gh;
        self.dir.lu(h)?.solve_in_place(w);
        Ok(())
    }
}

impl TimeStepper for LineSystem {
    fn step(&mut self, w: &mut [f64], t: f64, dt: f64, interval_start: f64) -> Result<()> {
        self.cn_step(w, t, dt, interval_start)
    }

    fn damped_substeps(
        &mut self,
        w: &mut [f64],
        t: f64,
        dt: f64,
        interval_start: f64,
    ) -> Result<()> {
        let h = 0.5 * dt;
        self.backward_euler(w, t, h, interval_start)?;
        self.backward_euler(w, t + h, h, interval_start)
    }
}

/// 2D system `W' = (A_1 W + g_1) + (A_2 W + g_2)` on an `m x m` plane segment.
#[derive(Debug, Clone)]
pub struct PlaneSystem {
    first: DirectionalSystem,
    second: DirectionalSystem,
    m: usize,
    work: Vec<f64>,
    row_scratch: Vec<f64>,
}

impl PlaneSystem {
    pub fn new(first: DirectionalSystem, second: DirectionalSystem) -> Result<Self> {
        let m = first.len();
        if second.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: second.len(),
            });
        }
        Ok(Self {
            first,
            second,
            m,
            work: vec![0.0; m * m],
            row_scratch: vec![0.0; m],
        })
    }

    pub fn side_len(&self) -> usize {
        self.m
    }

    /// `out = A_1 W + A_2 W + g_1(t) + g_2(t)`.
    pub fn apply(&self, w: &[f64], t: f64, interval_start: f64, out: &mut [f64]) {
        let m = self.m;
        let mut tmp = vec![0.0; m * m];
        apply_rows(&self.first.op, w, out, m);
        apply_within_rows(&self.second.op, w, &mut tmp, m);
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += v;
        }
        self.add_first_boundary(out, 1.0, t, interval_start);
        self.add_second_boundary(out, 1.0, t, interval_start);
    }

    fn add_first_boundary(&self, x: &mut [f64], scale: f64, t: f64, interval_start: f64) {
        let m = self.m;
        let (lo, hi) = self.first.boundary.at(t, interval_start);
        if lo != 0.0 {
            x[..m].iter_mut().for_each(|v| *v += scale * lo);
        }
        if hi != 0.0 {
            x[(m - 1) * m..].iter_mut().for_each(|v| *v += scale * hi);
        }
    }

    fn add_second_boundary(&self, x: &mut [f64], scale: f64, t: f64, interval_start: f64) {
        let m = self.m;
        let (lo, hi) = self.second.boundary.at(t, interval_start);
        if lo != 0.0 || hi != 0.0 {
            for row in x.chunks_exact_mut(m) {
                row[0] += scale * lo;
                row[m - 1] += scale * hi;
            }
        }
    }

    /// Douglas ADI step with `theta = 1/2`:
    ///
    /// ```text
    /// Z0 = W + dt F(t, W)
    /// Z1 = Z0 + dt/2 (F_1(t + dt, Z1) - F_1(t, W))
    /// Z2 = Z1 + dt/2 (F_2(t + dt, Z2) - F_2(t, W))
    /// ```
    pub fn douglas_step(
        &mut self,
        w: &mut [f64],
        t: f64,
        dt: f64,
        interval_start: f64,
    ) -> Result<()> {
        let m = self.m;
        let half = 0.5 * dt;
        let t1 = t + dt;
        let (lo1, hi1) = self.first.boundary.at(t, interval_start);
        let (lo1_next, hi1_next) = self.first.boundary.at(t1, interval_start);
        let (lo2, hi2) = self.second.boundary.at(t, interval_start);
        let (lo2_next, hi2_next) = self.second.boundary.at(t1, interval_start);
        let Self {
            first,
            second,
            work,
            row_scratch,
            ..
        } = self;
        let (a1, lu1) = first.factored(half)?;
        let (a2_op, lu2) = second.factored(half)?;

        // Explicit stage row by row, followed directly by forward elimination
        // of the first-direction solve:
        // Z0 = W + dt (A_1 W / 2 + A_2 W) + dt/2 (g_1(t) + g_1(t + dt)) + dt g_2(t)
        for i in 0..m {
            let cur = &w[i * m..(i + 1) * m];
            let a2 = &mut row_scratch[..];
            a2_op.apply(cur, a2);
            let (done, rest) = work.split_at_mut(i * m);
            let row = &mut rest[..m];
            let d = a1.diag[i];
            for (z, c) in row.iter_mut().zip(cur) {
                *z = d * c;
            }
            if i > 0 {
                let l = a1.lower[i];
                for (z, p) in row.iter_mut().zip(&w[(i - 1) * m..i * m]) {
                    *z += l * p;
                }
            }
            if i + 1 < m {
                let u = a1.upper[i];
                for (z, nx) in row.iter_mut().zip(&w[(i + 1) * m..(i + 2) * m]) {
                    *z += u * nx;
                }
            }
            for ((z, c), a) in row.iter_mut().zip(cur).zip(a2.iter()) {
                *z = c + dt * (0.5 * *z + a);
            }
            if i == 0 {
                row.iter_mut().for_each(|v| *v += half * lo1 + half * lo1_next);
            }
            if i == m - 1 {
                row.iter_mut().for_each(|v| *v += half * hi1 + half * hi1_next);
            }
            row[0] += dt * lo2;
            row[m - 1] += dt * hi2;
            if i > 0 {
                let f = lu1.mult[i];
                for (z, p) in row.iter_mut().zip(&done[(i - 1) * m..]) {
                    *z -= f * p;
                }
            }
        }

        // Back substitution in reverse row order. Each finished block of rows
        // becomes Z1 - dt/2 A_2 W + dt/2 (g_2(t + dt) - g_2(t)) and is solved
        // along its rows while still in cache.
        for i in (0..m).rev() {
            let (head, tail) = work.split_at_mut((i + 1) * m);
            let row = &mut head[i * m..];
            let inv = lu1.inv_diag[i];
            if i + 1 == m {
                row.iter_mut().for_each(|v| *v *= inv);
            } else {
                let u = lu1.upper[i];
                for (z, nx) in row.iter_mut().zip(&tail[..m]) {
                    *z = (*z - u * nx) * inv;
                }
            }
            let dst = &mut w[i * m..(i + 1) * m];
            a2_op.apply(dst, row_scratch);
            for ((o, z), a) in dst.iter_mut().zip(row.iter()).zip(row_scratch.iter()) {
                *o = z - half * a;
            }
            dst[0] += half * lo2_next - half * lo2;
            dst[m - 1] += half * hi2_next - half * hi2;
            if i % ROW_BLOCK == 0 {
                let end = ((i + ROW_BLOCK) * m).min(m * m);
                lu2.solve_each_row_in_place(&mut w[i * m..end]);
            }
        }
        Ok(())
    }

    /// Directional backward-Euler half step:
    /// `(I - h A_1) Z1 = W + h g_1(t + h)`, `(I - h A_2) W_new = Z1 + h g_2(t + h)`.
    pub fn split_backward_euler(
        &mut self,
        w: &mut [f64],
        t: f64,
        h: f64,
        interval_start: f64,
    ) -> Result<()> {
        let m = self.m;
        self.add_first_boundary(w, h, t + h, interval_start);
        self.first.lu(h)?.solve_rows_in_place(w, m);
        self.add_second_boundary(w, h, t + h, interval_start);
        self.second.lu(h)?.solve_each_row_in_place(w);
        Ok(())
    }
}

impl TimeStepper for PlaneSystem {
    fn step(&mut self, w: &mut [f64], t: f64, dt: f64, interval_start: f64) -> Result<()> {
        self.douglas_step(w, t, dt, interval_start)
    }

    fn damped_substeps(
        &mut self,
        w: &mut [f64],
        t: f64,
        dt: f64,
        interval_start: f64,
    ) -> Result<()> {
        let h = 0.5 * dt;
        self.split_backward_euler(w, t, h, interval_start)?;
        self.split_backward_euler(w, t + h, h, interval_start)
    }
}

/// `out[i, :] = lower_i w[i-1, :] + diag_i w[i, :] + upper_i w[i+1, :]`.
fn apply_rows(op: &TridiagonalOperator, w: &[f64], out: &mut [f64], m: usize) {
    for i in 0..m {
        let row = &mut out[i * m..(i + 1) * m];
        let cur = &w[i * m..(i + 1) * m];
        let d = op.diag[i];
        for (o, c) in row.iter_mut().zip(cur) {
            *o = d * c;
        }
        if i > 0 {
            let l = op.lower[i];
            for (o, p) in row.iter_mut().zip(&w[(i - 1) * m..i * m]) {
                *o += l * p;
            }
        }
        if i + 1 < m {
            let u = op.upper[i];
            for (o, n) in row.iter_mut().zip(&w[(i + 1) * m..(i + 2) * m]) {
                *o += u * n;
            }
        }
    }
}

/// Applies `op` along the contiguous index of every row.
fn apply_within_rows(op: &TridiagonalOperator, w: &[f64], out: &mut [f64], m: usize) {
    for (src, dst) in w.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
        op.apply(src, dst);
    }
}

/// Receives term values on both sides of every exercise projection.
pub trait ExerciseObserver {
    fn observe(&mut self, exercise: usize, before: &[f64], after: &[f64]);
}

impl ExerciseObserver for () {
    fn observe(&mut self, _: usize, _: &[f64], _: &[f64]) {}
}

/// Time-grid indices `n_e` with `alpha_e = n_e dt`, checked for alignment.
pub fn exercise_steps(schedule: &ExerciseSchedule, steps: usize) -> Result<Vec<usize>> {
    let horizon = schedule.horizon();
    let dt = horizon / steps as f64;
    let mut out = Vec::with_capacity(schedule.len());
    let mut prev = 0;
    for (e, alpha) in schedule.alphas().iter().enumerate() {
        let n = libm::round(alpha / dt);
        if (n * dt - alpha).abs() > 1e-9 * horizon || n as usize <= prev || n as usize >= steps {
            return Err(Error::MisalignedSchedule(e + 1));
        }
        prev = n as usize;
        out.push(prev);
    }
    Ok(out)
}

/// Advances `w` from `t = 0` to the horizon with `steps` uniform steps,
/// damping the first step and the step after every exercise date.
///
/// `psi_at(e)` returns the exercise vector `Psi_e` for `e = 1, ..., E - 1`.
pub fn march<S, P, O>(
    system: &mut S,
    w: &mut GridFunction,
    steps: usize,
    schedule: &ExerciseSchedule,
    mut psi_at: P,
    observer: &mut O,
) -> Result<()>
where
    S: TimeStepper,
    P: FnMut(usize) -> Vec<f64>,
    O: ExerciseObserver + ?Sized,
{
    let dt = schedule.horizon() / steps as f64;
    let stops = exercise_steps(schedule, steps)?;
    let mut next_stop = 0;
    let mut damp = true;
    for n in 0..steps {
        let t = n as f64 * dt;
        let start = schedule.interval_start(w.interval);
        if damp {
            system.damped_substeps(&mut w.values, t, dt, start)?;
            damp = false;
        } else {
            system.step(&mut w.values, t, dt, start)?;
        }
        w.time = (n + 1) as f64 * dt;
        if next_stop < stops.len() && stops[next_stop] == n + 1 {
            let e = next_stop + 1;
            let psi_e = psi_at(e);
            let before = w.values.clone();
            exercise_project(w, &psi_e)?;
            observer.observe(e, &before, &w.values);
            next_stop += 1;
            damp = true;
        }
    }
    Ok(())
}

/// Everything needed to solve one PCA term.
#[derive(Debug, Clone, Copy)]
pub struct TermSetup<'a> {
    pub segment: Segment,
    pub mesh: &'a Mesh1D,
    pub steps: usize,
    pub schedule: &'a ExerciseSchedule,
    pub point: &'a EvaluationPoint,
    pub spectral: &'a SpectralModel,
    pub model: &'a MarketModel,
    pub contract: &'a BasketContract,
}

impl TermSetup<'_> {
    fn field(&self, t: f64) -> PayoffField {
        PayoffField::new(
            self.segment,
            self.point,
            t,
            self.spectral,
            self.model,
            self.contract,
        )
    }

    fn direction(&self, k: usize, r_share: f64) -> DirectionalSystem {
        let lambda = self.spectral.eigenvalues()[k];
        let op = assemble_operator(self.mesh, lambda, r_share);
        let class = self.spectral.column_class(k);
        let (strike, rate) = (self.contract.strike(), self.model.rate());
        DirectionalSystem::new(
            op,
            DirichletValue::for_face(class, Side::Low, strike, rate),
            DirichletValue::for_face(class, Side::High, strike, rate),
        )
    }
}

/// Solves one PCA term (line `L_1` or plane `P_l`) up to `t = T`.
pub fn solve_term<O: ExerciseObserver + ?Sized>(
    setup: &TermSetup<'_>,
    observer: &mut O,
) -> Result<GridFunction> {
    let m = setup.mesh.interior();
    let psi0 = cell_average_initial(&setup.field(0.0), setup.mesh, setup.segment);
    let schedule = setup.schedule;
    let psi_at = |e: usize| {
        let alpha = schedule.alphas()[e - 1];
        nodal_values(&setup.field(alpha), setup.mesh, setup.segment)
    };
    let r = setup.model.rate();
    match setup.segment {
        Segment::Line => {
            let mut w = GridFunction::line(psi0);
            let mut system = LineSystem::new(setup.direction(0, r));
            march(&mut system, &mut w, setup.steps, schedule, psi_at, observer)?;
            Ok(w)
        }
        Segment::Plane(l) => {
            let mut w = GridFunction::plane(psi0, m)?;
            let mut system =
                PlaneSystem::new(setup.direction(0, 0.5 * r), setup.direction(l, 0.5 * r))?;
            march(&mut system, &mut w, setup.steps, schedule, psi_at, observer)?;
            Ok(w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_operator() -> TridiagonalOperator {
        TridiagonalOperator::from_bands(
            vec![1.0, 1.0, 1.0],
            vec![-2.0, -2.0, -2.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_operator_solve_is_identity() {
        let op = TridiagonalOperator::from_bands(vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]).unwrap();
        let rhs = vec![1.0, -2.0, 3.0, 4.5];
        assert_eq!(thomas_solve(&op, 0.3, &rhs).unwrap(), rhs);
    }

    #[test]
    fn boundary_couplings_are_split_off() {
        let op = toy_operator();
        assert_eq!(op.low_coupling(), 1.0);
        assert_eq!(op.high_coupling(), 1.0);
        assert_eq!(op.lower()[0], 0.0);
        assert_eq!(op.upper()[2], 0.0);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let op = TridiagonalOperator::from_bands(vec![0.0; 2], vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(op.factor_shifted(1.0), Err(Error::ZeroPivot(0)));
    }

    #[test]
    fn projection_lattice_laws() {
        let mut w = GridFunction::line(vec![0.0, 2.0, 5.0]);
        exercise_project(&mut w, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.values(), &[1.0, 2.0, 5.0]);
        assert_eq!(w.interval(), 2);
        let once = w.values().to_vec();
        exercise_project(&mut w, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.values(), &once[..]);
        assert!(exercise_project(&mut w, &[1.0]).is_err());
    }

    #[test]
    fn scalar_cn_step() {
        let op = TridiagonalOperator::from_bands(vec![0.0], vec![-1.0], vec![0.0]).unwrap();
        let mut sys = LineSystem::new(DirectionalSystem::new(op, DirichletValue::Zero, DirichletValue::Zero));
        let mut w = vec![1.0];
        sys.cn_step(&mut w, 0.0, 0.1, 0.0).unwrap();
        assert!((w[0] - 0.95 / 1.05).abs() < 1e-15);
        assert!((w[0] - 0.904762).abs() < 1e-6);
    }

    #[test]
    fn scalar_damped_substeps() {
        let op = TridiagonalOperator::from_bands(vec![0.0], vec![-1.0], vec![0.0]).unwrap();
        let mut sys = LineSystem::new(DirectionalSystem::new(op, DirichletValue::Zero, DirichletValue::Zero));
        let mut w = vec![1.0];
        sys.damped_substeps(&mut w, 0.0, 0.2, 0.0).unwrap();
        assert!((w[0] - 1.0 / (1.1 * 1.1)).abs() < 1e-15);
        assert!((w[0] - 0.826446).abs() < 1e-6);
    }

    #[test]
    fn misaligned_schedule_is_rejected() {
        use crate::model::ExerciseStyle;
        let contract = BasketContract::new(1.0, 1.0, vec![0.5, 0.5], ExerciseStyle::Bermudan { exercises: 10 })
            .unwrap();
        let schedule = crate::model::reversed_schedule(&contract).unwrap();
        assert_eq!(exercise_steps(&schedule, 20).unwrap(), (1..10).map(|e| 2 * e).collect::<Vec<_>>());
        assert!(matches!(exercise_steps(&schedule, 15), Err(Error::MisalignedSchedule(_))));
        assert!(exercise_steps(&schedule, 5).is_err());
    }
}
