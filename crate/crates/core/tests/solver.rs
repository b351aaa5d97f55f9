mod common;

use basket_pca::model::reversed_schedule;
use basket_pca::solver::{
    assemble_operator, exercise_project, exercise_steps, thomas_solve, DirectionalSystem,
    DirichletValue, LineSystem, PlaneSystem, TimeStepper,
};
use basket_pca::{
    build_mesh, fd_weights, pq_coefficients, ExerciseStyle, GridFunction, TridiagonalOperator,
    DEFAULT_KAPPA1,
};
use common::{
    dense_solve, dense_tridiagonal, douglas_defect_slope, expm, matvec, max_diff, shifted_dense, slope,
};
use proptest::prelude::*;

#[test]
fn thomas_small_example() {
    let op = TridiagonalOperator::from_bands(
        vec![1.0, 1.0, 1.0],
        vec![-2.0, -2.0, -2.0],
        vec![1.0, 1.0, 1.0],
    )
    .unwrap();
    let rhs = [1.0, 2.0, 3.0];
    let x = thomas_solve(&op, 0.1, &rhs).unwrap();
    let expect = dense_solve(&shifted_dense(&op, 0.1), &rhs);
    assert!(max_diff(&x, &expect) <= 1e-12);
}

fn dominant_system() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (2usize..=500).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(-6.0f64..-2.1, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
            0.01f64..5.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thomas_matches_dense_elimination((lower, diag, upper, rhs, c) in dominant_system()) {
        let op = TridiagonalOperator::from_bands(lower, diag, upper).unwrap();
        let x = thomas_solve(&op, c, &rhs).unwrap();
        let a = shifted_dense(&op, c);
        let expect = dense_solve(&a, &rhs);
        prop_assert!(max_diff(&x, &expect) <= 1e-10);
        let residual = matvec(&a, &x);
        prop_assert!(max_diff(&residual, &rhs) <= 1e-10);
    }

    #[test]
    fn projection_is_a_lattice_join(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
    ) {
        let (w0, psi): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut w = GridFunction::line(w0.clone());
        exercise_project(&mut w, &psi).unwrap();
        for ((v, a), b) in w.values().iter().zip(&w0).zip(&psi) {
            prop_assert!(*v >= *a && *v >= *b);
            prop_assert!(*v == *a || *v == *b);
        }
        let once = w.values().to_vec();
        exercise_project(&mut w, &psi).unwrap();
        prop_assert_eq!(w.values(), &once[..]);
        prop_assert_eq!(w.interval(), 3);

        let nonneg: Vec<f64> = w0.iter().map(|v| v.abs()).collect();
        let mut w = GridFunction::line(nonneg.clone());
        exercise_project(&mut w, &vec![0.0; nonneg.len()]).unwrap();
        prop_assert_eq!(w.values(), &nonneg[..]);
        let mut w = GridFunction::line(vec![0.0; nonneg.len()]);
        exercise_project(&mut w, &nonneg).unwrap();
        prop_assert_eq!(w.values(), &nonneg[..]);
    }
}

#[test]
fn operator_rows_compose_weights_and_coefficients() {
    let m = 40;
    let (lambda, r) = (0.37, 0.05);
    let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
    let op = assemble_operator(&mesh, lambda, r);
    let y = mesh.points();
    let h = mesh.widths();
    for i in 0..m {
        let w = fd_weights(h[i], h[i + 1]).unwrap();
        let (p, q) = pq_coefficients(y[i + 1]);
        let row: Vec<f64> = (0..3)
            .map(|k| lambda * (p * w.second[k] + q * w.first[k]))
            .collect();
        let lower = if i == 0 { op.low_coupling() } else { op.lower()[i] };
        let upper = if i == m - 1 { op.high_coupling() } else { op.upper()[i] };
        let tol = 1e-12 * row.iter().map(|v| v.abs()).sum::<f64>();
        assert!((lower - row[0]).abs() <= tol);
        assert!((op.diag()[i] - (row[1] - r)).abs() <= tol);
        assert!((upper - row[2]).abs() <= tol);
        // constants are annihilated up to the discount
        assert!((lower + op.diag()[i] + upper + r).abs() <= tol);
    }
    let zero = assemble_operator(&mesh, 0.0, 0.0);
    assert!(zero.diag().iter().chain(zero.lower()).chain(zero.upper()).all(|v| *v == 0.0));
}

fn zero_plane(a1: TridiagonalOperator, a2: TridiagonalOperator) -> PlaneSystem {
    PlaneSystem::new(
        DirectionalSystem::new(a1, DirichletValue::Zero, DirichletValue::Zero),
        DirectionalSystem::new(a2, DirichletValue::Zero, DirichletValue::Zero),
    )
    .unwrap()
}

#[test]
fn douglas_local_defect_is_third_order() {
    let s = douglas_defect_slope();
    assert!((s - 3.0).abs() <= 0.2, "slope {s}");
}

#[test]
fn douglas_matches_scalar_recurrence_for_diagonal_operators() {
    let m = 3;
    let d1: Vec<f64> = vec![-1.0, -0.5, -2.0];
    let d2: Vec<f64> = vec![-0.3, -1.2, -0.7];
    let op = |d: &[f64]| {
        TridiagonalOperator::from_bands(vec![0.0; m], d.to_vec(), vec![0.0; m]).unwrap()
    };
    let mut sys = zero_plane(op(&d1), op(&d2));
    let dt = 0.1;
    let mut w: Vec<f64> = (0..m * m).map(|k| 1.0 + k as f64).collect();
    let w0 = w.clone();
    sys.douglas_step(&mut w, 0.0, dt, 0.0).unwrap();
    for i in 0..m {
        for j in 0..m {
            let (a, b, v) = (d1[i], d2[j], w0[i * m + j]);
            let y0 = v + dt * (a + b) * v;
            let y1 = (y0 - 0.5 * dt * a * v) / (1.0 - 0.5 * dt * a);
            let y2 = (y1 - 0.5 * dt * b * v) / (1.0 - 0.5 * dt * b);
            assert!((w[i * m + j] - y2).abs() <= 1e-14 * y2.abs());
        }
    }
}

#[test]
fn douglas_is_exact_for_linear_in_time_solutions() {
    // A = 0 in the interior with constant boundary forcing: W(t) = W0 + t g.
    let m = 4;
    let op = |c: f64| {
        TridiagonalOperator::from_bands(vec![c, 0.0, 0.0, 0.0], vec![0.0; m], vec![0.0, 0.0, 0.0, c])
            .unwrap()
    };
    let flat = |v: f64| DirichletValue::Discounted { value: v, rate: 0.0 };
    let mut sys = PlaneSystem::new(
        DirectionalSystem::new(op(2.0), flat(1.5), flat(-1.0)),
        DirectionalSystem::new(op(0.5), flat(3.0), DirichletValue::Zero),
    )
    .unwrap();
    let mut g = vec![0.0; m * m];
    sys.apply(&vec![0.0; m * m], 0.0, 0.0, &mut g);
    let w0: Vec<f64> = (0..m * m).map(|k| (k as f64).cos()).collect();
    let mut w = w0.clone();
    let dt = 0.05;
    for n in 0..7 {
        sys.douglas_step(&mut w, n as f64 * dt, dt, 0.0).unwrap();
    }
    let expect: Vec<f64> = w0.iter().zip(&g).map(|(a, b)| a + 7.0 * dt * b).collect();
    assert!(max_diff(&w, &expect) <= 1e-13);
}

#[test]
fn constants_are_preserved_without_discounting() {
    let m = 25;
    let c = 3.25;
    let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
    let face = DirichletValue::Discounted { value: c, rate: 0.0 };
    let dir = |lambda: f64| DirectionalSystem::new(assemble_operator(&mesh, lambda, 0.0), face, face);

    let mut line = LineSystem::new(dir(0.8));
    let mut w = vec![c; m];
    line.damped_substeps(&mut w, 0.0, 0.1, 0.0).unwrap();
    for n in 1..10 {
        line.cn_step(&mut w, n as f64 * 0.1, 0.1, 0.0).unwrap();
    }
    assert!(w.iter().all(|v| (v - c).abs() <= 1e-12));

    let mut plane = PlaneSystem::new(dir(0.8), dir(0.1)).unwrap();
    let mut w = vec![c; m * m];
    plane.damped_substeps(&mut w, 0.0, 0.1, 0.0).unwrap();
    for n in 1..10 {
        plane.douglas_step(&mut w, n as f64 * 0.1, 0.1, 0.0).unwrap();
    }
    assert!(w.iter().all(|v| (v - c).abs() <= 1e-12));
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let m = 30;
    let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
    let op = assemble_operator(&mesh, 1.0, 0.05);
    let dense = dense_tridiagonal(op.lower(), op.diag(), op.upper());
    let y = mesh.points();
    let w0: Vec<f64> = (1..=m).map(|i| (std::f64::consts::PI * y[i]).sin()).collect();
    let exact = matvec(&expm(&dense), &w0);
    let mut sys = LineSystem::new(DirectionalSystem::new(op, DirichletValue::Zero, DirichletValue::Zero));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for steps in [10usize, 20, 40, 80, 160] {
        let dt = 1.0 / steps as f64;
        let mut w = w0.clone();
        for n in 0..steps {
            sys.cn_step(&mut w, n as f64 * dt, dt, 0.0).unwrap();
        }
        xs.push(dt.ln());
        ys.push(max_diff(&w, &exact).ln());
    }
    let s = slope(&xs, &ys);
    assert!((s - 2.0).abs() <= 0.1, "slope {s}");
}

#[test]
fn damping_removes_oscillation_from_a_step() {
    let n = 50;
    let k = 10.0;
    let h = 1.0 / (n + 1) as f64;
    let scale = 1.0 / (h * h);
    let op = TridiagonalOperator::from_bands(vec![scale; n], vec![-2.0 * scale; n], vec![scale; n]).unwrap();
    let dir = DirectionalSystem::new(
        op,
        DirichletValue::Zero,
        DirichletValue::Discounted { value: k, rate: 0.0 },
    );
    let w0: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { k }).collect();
    let dt = 0.01;
    // largest downward jump of a profile that should rise monotonically
    let wiggle = |w: &[f64]| w.windows(2).map(|p| p[0] - p[1]).fold(0.0f64, f64::max);
    let violation = |w: &[f64]| w.iter().fold(0.0f64, |a, v| a.max(-v).max(v - k));

    let mut plain = LineSystem::new(dir.clone());
    let mut w = w0.clone();
    plain.cn_step(&mut w, 0.0, dt, 0.0).unwrap();
    assert!(wiggle(&w) > 1.0);

    let mut damped = LineSystem::new(dir);
    let mut w = w0;
    damped.damped_substeps(&mut w, 0.0, dt, 0.0).unwrap();
    assert!(wiggle(&w) <= 1e-12 && violation(&w) <= 1e-12);
    damped.cn_step(&mut w, dt, dt, 0.0).unwrap();
    assert!(wiggle(&w) <= 1e-8 && violation(&w) <= 1e-8);
}

#[test]
fn boundary_clock_restarts_each_interval() {
    let face = DirichletValue::Discounted { value: 40.0, rate: 0.06 };
    assert_eq!(face.at(0.3, 0.3), 40.0);
    assert!((face.at(0.4, 0.3) - 40.0 * (-0.006f64).exp()).abs() < 1e-12);
}

#[test]
fn exercise_dates_align_with_the_time_grid() {
    let (_, contract) = common::equicorrelated(10, ExerciseStyle::Bermudan { exercises: 10 });
    let schedule = reversed_schedule(&contract).unwrap();
    assert_eq!(exercise_steps(&schedule, 20).unwrap(), (1..10).map(|e| 2 * e).collect::<Vec<_>>());
    assert!(exercise_steps(&schedule, 15).is_err());
}
