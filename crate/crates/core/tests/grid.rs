mod common;

use std::f64::consts::PI;

use basket_pca::grid::{cell_average_initial, cell_average_initial_with_order, nodal_values};
use basket_pca::quadrature::GaussLegendre;
use basket_pca::{
    build_mesh, fd_weights, pq_coefficients, EvaluationPoint, ExerciseStyle, PayoffField,
    PcaPricer, PricerConfig, Segment, SpectralModel, DEFAULT_KAPPA1,
};
use proptest::prelude::*;

#[test]
fn mesh_endpoints_and_centre() {
    for m in [3usize, 10, 11, 99, 1000] {
        let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
        let y = mesh.points();
        assert_eq!(y.len(), m + 2);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[m + 1], 1.0);
        assert!(y.windows(2).all(|w| w[0] < w[1]));
        if m % 2 == 1 {
            assert!((y[(m + 1) / 2] - 0.5).abs() < 1e-15);
        }
    }
    let mesh = build_mesh(10, DEFAULT_KAPPA1).unwrap();
    let xi_max = 0.5 * mesh.xi_step() * 11.0;
    assert!((xi_max - 3.6895038).abs() < 1e-7);
}

#[test]
fn mesh_is_symmetric() {
    for m in (10..=1000).step_by(7) {
        let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
        let y = mesh.points();
        for i in 0..=m + 1 {
            assert!((y[i] + y[m + 1 - i] - 1.0).abs() <= 1e-14, "m = {m}, i = {i}");
        }
    }
}

#[test]
fn mesh_is_smooth() {
    // second differences of y_i = 1/2 + k1 sinh(xi_i) are k1 sinh(xi) dxi^2 <= dxi^2 / 2
    let mut worst: f64 = 0.0;
    for m in 10..=1000 {
        let mesh = build_mesh(m, DEFAULT_KAPPA1).unwrap();
        let dxi = mesh.xi_step();
        let h = mesh.widths();
        let c = h
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
            / (dxi * dxi);
        worst = worst.max(c);
    }
    assert!(worst <= 0.6, "smoothness constant {worst}");
}

proptest! {
    #[test]
    fn fd_weights_exact_on_quadratics(h0 in 1e-4f64..1.0, h1 in 1e-4f64..1.0, c in -2.0f64..2.0) {
        let w = fd_weights(h0, h1).unwrap();
        // nodes at c - h0, c, c + h1
        let nodes = [c - h0, c, c + h1];
        let polys: [(fn(f64) -> f64, fn(f64) -> f64, fn(f64) -> f64); 3] = [
            (|_| 1.0, |_| 0.0, |_| 0.0),
            (|x| x, |_| 1.0, |_| 0.0),
            (|x| x * x, |x| 2.0 * x, |_| 2.0),
        ];
        for (f, df, ddf) in polys {
            let first: f64 = w.first.iter().zip(nodes).map(|(b, x)| b * f(x)).sum();
            let second: f64 = w.second.iter().zip(nodes).map(|(g, x)| g * f(x)).sum();
            let scale1 = w.first.iter().zip(nodes).map(|(b, x)| (b * f(x)).abs()).sum::<f64>().max(1.0);
            let scale2 = w.second.iter().zip(nodes).map(|(g, x)| (g * f(x)).abs()).sum::<f64>().max(1.0);
            prop_assert!((first - df(c)).abs() <= 1e-12 * scale1);
            prop_assert!((second - ddf(c)).abs() <= 1e-12 * scale2);
        }
        prop_assert!(w.first.iter().sum::<f64>().abs() <= 1e-12 * (1.0 / h0 + 1.0 / h1));
        prop_assert!(w.second.iter().sum::<f64>().abs() <= 1e-12 * (1.0 / h0 + 1.0 / h1).powi(2));
    }
}

#[test]
fn fd_weights_examples() {
    let w = fd_weights(0.1, 0.1).unwrap();
    let expect_first = [-5.0, 0.0, 5.0];
    let expect_second = [100.0, -200.0, 100.0];
    for k in 0..3 {
        assert!((w.first[k] - expect_first[k]).abs() < 1e-12);
        assert!((w.second[k] - expect_second[k]).abs() < 1e-10);
    }
    // eta^2 sampled at -1, 0, 2
    let w = fd_weights(1.0, 2.0).unwrap();
    let f = [1.0, 0.0, 4.0];
    let d1: f64 = w.first.iter().zip(f).map(|(a, b)| a * b).sum();
    let d2: f64 = w.second.iter().zip(f).map(|(a, b)| a * b).sum();
    assert!(d1.abs() < 1e-15);
    assert!((d2 - 2.0).abs() < 1e-15);
    assert!(fd_weights(0.0, 1.0).is_err());
}

#[test]
fn pq_examples() {
    for eta in [0.0, 1.0] {
        let (p, q) = pq_coefficients(eta);
        assert!(p.abs() < 1e-15 && q.abs() < 1e-15);
    }
    let (p, q) = pq_coefficients(0.5);
    assert!((p - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
    assert!(q.abs() < 1e-15);
    let (p, q) = pq_coefficients(0.25);
    assert!((p - 1.0 / (8.0 * PI * PI)).abs() < 1e-15);
    assert!((q - 1.0 / (4.0 * PI)).abs() < 1e-15);
}

#[test]
fn gauss_rule_averages_linears_to_midpoint() {
    let rule = GaussLegendre::new(16);
    let (a, b) = (0.3, 0.42);
    let mean = rule.integrate(a, b, |y| 2.0 - 3.0 * y) / (b - a);
    assert!((mean - (2.0 - 3.0 * 0.5 * (a + b))).abs() < 1e-14);
}

fn equicorrelated_field(segment: Segment) -> (PayoffField, basket_pca::Mesh1D) {
    let (model, contract) = common::equicorrelated(10, ExerciseStyle::European);
    let spectral = SpectralModel::new(&model).unwrap();
    let pricer = PcaPricer::new(&model, &contract, &spectral, &PricerConfig::new(100)).unwrap();
    let point = EvaluationPoint::at_the_money(&spectral, &model, &contract).unwrap();
    let field = PayoffField::new(segment, &point, 0.0, &spectral, &model, &contract);
    (field, pricer.mesh().clone())
}

#[test]
fn cell_averages_agree_across_orders() {
    let (model, contract) = common::set_a(ExerciseStyle::European);
    let spectral = SpectralModel::new(&model).unwrap();
    let point = EvaluationPoint::at_the_money(&spectral, &model, &contract).unwrap();
    let mesh = build_mesh(60, DEFAULT_KAPPA1).unwrap();
    for segment in [Segment::Line, Segment::Plane(1), Segment::Plane(4)] {
        let field = PayoffField::new(segment, &point, 0.0, &spectral, &model, &contract);
        let lo = cell_average_initial_with_order(&field, &mesh, segment, 8);
        let hi = cell_average_initial_with_order(&field, &mesh, segment, 16);
        let diff = lo.iter().zip(&hi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-10, "{segment:?}: {diff}");
    }
}

#[test]
fn line_averages_match_brute_force() {
    let (field, mesh) = equicorrelated_field(Segment::Line);
    let psi0 = cell_average_initial(&field, &mesh, Segment::Line);
    let nodal = nodal_values(&field, &mesh, Segment::Line);
    let samples = 10_000;
    let mut flagged = 0;
    for (i, (avg, node)) in psi0.iter().zip(&nodal).enumerate() {
        let (a, b) = mesh.dual_cell(i);
        let h = (b - a) / samples as f64;
        let values: Vec<f64> = (0..samples)
            .map(|k| field.excess(a + (k as f64 + 0.5) * h, 0.5))
            .collect();
        let ends = [field.excess(a, 0.5), field.excess(b, 0.5)];
        let all = values.iter().chain(&ends);
        let crosses = all.clone().any(|v| *v > 0.0) && all.clone().any(|v| *v < 0.0);
        if crosses {
            flagged += 1;
            let mean = values.iter().map(|v| v.max(0.0)).sum::<f64>() / samples as f64;
            assert!((avg - mean).abs() <= 1e-8, "node {i}: {avg} vs {mean}");
        } else {
            assert_eq!(avg, node);
        }
    }
    assert!(flagged >= 1);
    assert_eq!(psi0[psi0.len() - 1], 0.0);
    assert!(psi0[0] > 35.0 && psi0[0] < 40.0);
    assert!(psi0.windows(2).all(|w| w[1] <= w[0]));
}
