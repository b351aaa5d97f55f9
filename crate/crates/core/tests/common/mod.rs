#![allow(dead_code)]

use basket_pca::solver::{DirectionalSystem, DirichletValue, PlaneSystem};
use basket_pca::{BasketContract, DenseMatrix, ExerciseStyle, MarketModel, TridiagonalOperator};

pub fn set_a(style: ExerciseStyle) -> (MarketModel, BasketContract) {
    let rho = vec![
        1.00, 0.79, 0.82, 0.91, 0.84, //
        0.79, 1.00, 0.73, 0.80, 0.76, //
        0.82, 0.73, 1.00, 0.77, 0.72, //
        0.91, 0.80, 0.77, 1.00, 0.90, //
        0.84, 0.76, 0.72, 0.90, 1.00,
    ];
    let model = MarketModel::new(
        0.05,
        vec![0.518, 0.648, 0.623, 0.570, 0.530],
        DenseMatrix::from_row_major(5, rho).unwrap(),
    )
    .unwrap();
    let contract =
        BasketContract::new(1.0, 1.0, vec![0.381, 0.065, 0.057, 0.270, 0.227], style).unwrap();
    (model, contract)
}

/// Equicorrelated basket: `sigma = 0.2`, `rho = 0.25`, `r = 0.06`, `K = 40`.
pub fn equicorrelated(d: usize, style: ExerciseStyle) -> (MarketModel, BasketContract) {
    let rho = DenseMatrix::from_fn(d, |i, j| if i == j { 1.0 } else { 0.25 });
    let model = MarketModel::new(0.06, vec![0.2; d], rho).unwrap();
    let contract = BasketContract::new(40.0, 1.0, vec![1.0 / d as f64; d], style).unwrap();
    (model, contract)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut b = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|i, j| a[*i][k].abs().total_cmp(&a[*j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

/// `exp(a)` by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.1 {
        s += 1;
    }
    let scale = 2f64.powi(s);
    let scaled: Vec<Vec<f64>> = a
        .iter()
        .map(|r| r.iter().map(|v| v / scale).collect())
        .collect();
    let mut result: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..=20 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            row.iter_mut().for_each(|v| *v /= k as f64);
        }
        for (r, t) in result.iter_mut().zip(&term) {
            r.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

/// Dense matrix of a tridiagonal operator given by its bands.
pub fn dense_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = diag[i];
        if i > 0 {
            a[i][i - 1] = lower[i];
        }
        if i + 1 < n {
            a[i][i + 1] = upper[i];
        }
    }
    a
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense `I - c A`.
pub fn shifted_dense(op: &TridiagonalOperator, c: f64) -> Vec<Vec<f64>> {
    let mut a = dense_tridiagonal(op.lower(), op.diag(), op.upper());
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v *= -c;
        }
        row[i] += 1.0;
    }
    a
}

pub fn toy_bands(n: usize, scale: f64, skew: f64) -> TridiagonalOperator {
    TridiagonalOperator::from_bands(
        vec![scale * (1.0 + skew); n],
        (0..n).map(|i| -scale * (2.0 + 0.1 * i as f64)).collect(),
        vec![scale * (1.0 - skew); n],
    )
    .unwrap()
}

/// Dense `A_1 (x) I + I (x) A_2` in row-major plane layout.
pub fn kronecker_sum(a1: &TridiagonalOperator, a2: &TridiagonalOperator) -> Vec<Vec<f64>> {
    let m = a1.len();
    let d1 = dense_tridiagonal(a1.lower(), a1.diag(), a1.upper());
    let d2 = dense_tridiagonal(a2.lower(), a2.diag(), a2.upper());
    let mut a = vec![vec![0.0; m * m]; m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                a[i * m + j][k * m + j] += d1[i][k];
                a[i * m + j][i * m + k] += d2[j][k];
            }
        }
    }
    a
}

/// Slope of the one-step Douglas defect against `exp(dt A) W0` on a frozen
/// 4 x 4 plane with zero boundaries, over `dt` from 1e-2 down to 1e-4.
pub fn douglas_defect_slope() -> f64 {
    let m = 4;
    let a1 = toy_bands(m, 2.0, 0.3);
    let a2 = toy_bands(m, 1.5, -0.2);
    let dense = kronecker_sum(&a1, &a2);
    let w0: Vec<f64> = (0..m * m).map(|k| 1.0 + 0.3 * (k as f64).sin()).collect();
    let zero = |a| DirectionalSystem::new(a, DirichletValue::Zero, DirichletValue::Zero);
    let mut sys = PlaneSystem::new(zero(a1), zero(a2)).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for dt in [1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4] {
        let mut w = w0.clone();
        sys.douglas_step(&mut w, 0.0, dt, 0.0).unwrap();
        let scaled: Vec<Vec<f64>> = dense
            .iter()
            .map(|r| r.iter().map(|v| v * dt).collect())
            .collect();
        let exact = matvec(&expm(&scaled), &w0);
        xs.push(dt.ln());
        ys.push(max_diff(&w, &exact).ln());
    }
    slope(&xs, &ys)
}
