//! Sinh-stretched spatial mesh, nonuniform finite-difference weights, the
//! coefficient functions `p`, `q` and cell-averaged initial data.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{sign_changes, GaussLegendre};
use crate::transform::{y_to_x, PayoffField, Segment};

/// Mesh concentration point; `(1/2, ..., 1/2)` is the image of `s = K` at `t = 0`.
pub const KAPPA0: f64 = 0.5;
/// Default stretching parameter.
pub const DEFAULT_KAPPA1: f64 = 1.0 / 40.0;
/// Gauss–Legendre points per direction on cells containing the payoff kink.
pub const CELL_AVERAGE_ORDER: usize = 16;

/// Nonuniform mesh `0 = y_0 < y_1 < ... < y_{m+1} = 1` with `y_i = kappa0 + kappa1 sinh(xi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    m: usize,
    kappa1: f64,
    points: Vec<f64>,
    widths: Vec<f64>,
    weights: Vec<FdWeights>,
}

/// Builds the mesh with `m` interior points.
pub fn build_mesh(m: usize, kappa1: f64) -> Result<Mesh1D> {
    if m < 3 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "at least three interior mesh points are required",
        });
    }
    if !(kappa1 > 0.0) || !kappa1.is_finite() {
        return Err(Error::InvalidParameter {
            name: "kappa1",
            reason: "must be positive",
        });
    }
    let xi_min = -libm::asinh(KAPPA0 / kappa1);
    let xi_max = libm::asinh((1.0 - KAPPA0) / kappa1);
    let dxi = (xi_max - xi_min) / (m + 1) as f64;
    let mut points: Vec<f64> = (0..=m + 1)
        .map(|i| KAPPA0 + kappa1 * libm::sinh(xi_min + i as f64 * dxi))
        .collect();
    points[0] = 0.0;
    points[m + 1] = 1.0;
    let widths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let weights = (0..m)
        .map(|i| fd_weights(widths[i], widths[i + 1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Mesh1D {
        m,
        kappa1,
        points,
        widths,
        weights,
    })
}

impl Mesh1D {
    /// Number of interior points.
    pub fn interior(&self) -> usize {
        self.m
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    /// All `m + 2` points including both endpoints.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Interior points `y_1 .. y_m`.
    pub fn interior_points(&self) -> &[f64] {
        &self.points[1..=self.m]
    }

    /// `widths()[i - 1] = y_i - y_{i-1}` for `i = 1 ..= m + 1`.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Weights for interior node `i` (zero-based over interior points).
    pub fn weights(&self) -> &[FdWeights] {
        &self.weights
    }

    /// Uniform spacing of the underlying `xi` grid.
    pub fn xi_step(&self) -> f64 {
        2.0 * libm::asinh(KAPPA0 / self.kappa1) / (self.m + 1) as f64
    }

    /// Dual cell of interior node `i` (zero-based): midpoints to both neighbours.
    pub fn dual_cell(&self, i: usize) -> (f64, f64) {
        let p = &self.points;
        (
            (0.5 * (p[i] + p[i + 1])).max(0.0),
            (0.5 * (p[i + 1] + p[i + 2])).min(1.0),
        )
    }
}

/// Three-point first- and second-derivative weights at a nonuniform node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdWeights {
    /// `(beta_{-1}, beta_0, beta_1)`.
    pub first: [f64; 3],
    /// `(gamma_{-1}, gamma_0, gamma_1)`.
    pub second: [f64; 3],
}

/// Central weights for left width `h_left = h_i` and right width `h_right = h_{i+1}`.
pub fn fd_weights(h_left: f64, h_right: f64) -> Result<FdWeights> {
    if !(h_left > 0.0) || !(h_right > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "mesh widths must be positive",
        });
    }
    let (h0, h1) = (h_left, h_right);
    let s = h0 + h1;
    Ok(FdWeights {
        first: [-h1 / (h0 * s), (h1 - h0) / (h0 * h1), h0 / (h1 * s)],
        second: [2.0 / (h0 * s), -2.0 / (h0 * h1), 2.0 / (h1 * s)],
    })
}

/// Diffusion and convection coefficients of the transformed PDE:
/// `p = sin^4(pi eta) / (2 pi^2)`, `q = sin^3(pi eta) cos(pi eta) / pi`.
pub fn pq_coefficients(eta: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(PI * eta);
    let s2 = s * s;
    (s2 * s2 / (2.0 * PI * PI), s2 * s * c / PI)
}

/// Initial vector `Psi_0` on a segment.
///
/// Nodes whose dual cell straddles the payoff kink get the cell mean of
/// `psi(., 0)`; all others get the nodal value. Plane values are row-major
/// with the first direction as the row index.
pub fn cell_average_initial(field: &PayoffField, mesh: &Mesh1D, segment: Segment) -> Vec<f64> {
    cell_average_initial_with_order(field, mesh, segment, CELL_AVERAGE_ORDER)
}

/// [`cell_average_initial`] with an explicit quadrature order.
pub fn cell_average_initial_with_order(
    field: &PayoffField,
    mesh: &Mesh1D,
    segment: Segment,
    order: usize,
) -> Vec<f64> {
    let rule = GaussLegendre::new(order);
    let m = mesh.interior();
    let ys = mesh.interior_points();
    match segment {
        Segment::Line => (0..m)
            .map(|i| {
                let (a, b) = mesh.dual_cell(i);
                let probes = [
                    field.excess(a, 0.5),
                    field.excess(b, 0.5),
                    field.excess(ys[i], 0.5),
                    field.excess(0.5 * (a + b), 0.5),
                ];
                if straddles(&probes) {
                    line_cell_mean(field, &rule, a, b)
                } else {
                    probes[2].max(0.0)
                }
            })
            .collect(),
        Segment::Plane(_) => {
            let to_x = |ys: &[f64]| ys.iter().map(|y| y_to_x(*y)).collect::<Vec<f64>>();
            let cells: Vec<(f64, f64)> = (0..m).map(|i| mesh.dual_cell(i)).collect();
            let mut edges: Vec<f64> = cells.iter().map(|c| c.0).collect();
            edges.push(cells[m - 1].1);
            let centres: Vec<f64> = cells.iter().map(|(a, b)| 0.5 * (a + b)).collect();
            let (x_node, x_edge, x_centre) = (to_x(ys), to_x(&edges), to_x(&centres));
            let node = field.excess_grid(&x_node, &x_node);
            let corner = field.excess_grid(&x_edge, &x_edge);
            let centre = field.excess_grid(&x_centre, &x_centre);
            let e = m + 1;
            let mut out = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    let k = i * m + j;
                    let probes = [
                        corner[i * e + j],
                        corner[i * e + j + 1],
                        corner[(i + 1) * e + j],
                        corner[(i + 1) * e + j + 1],
                        centre[k],
                        node[k],
                    ];
                    out[k] = if straddles(&probes) {
                        plane_cell_mean(field, &rule, cells[i], cells[j])
                    } else {
                        node[k].max(0.0)
                    };
                }
            }
            out
        }
    }
}

/// Pointwise `psi` on the segment nodes (used for `Psi_e`, `e >= 1`).
pub fn nodal_values(field: &PayoffField, mesh: &Mesh1D, segment: Segment) -> Vec<f64> {
    let ys = mesh.interior_points();
    match segment {
        Segment::Line => ys.iter().map(|y| field.value(*y, 0.5)).collect(),
        Segment::Plane(_) => {
            let xs: Vec<f64> = ys.iter().map(|y| y_to_x(*y)).collect();
            let mut out = field.excess_grid(&xs, &xs);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            out
        }
    }
}

fn straddles(values: &[f64]) -> bool {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lo < 0.0 && hi > 0.0
}

/// Target accuracy of cell means relative to the strike.
const CELL_TOL: f64 = 1e-12;

fn line_cell_mean(field: &PayoffField, rule: &GaussLegendre, a: f64, b: f64) -> f64 {
    let breaks = sign_changes(a, b, |y| field.excess(y, 0.5));
    let tol = CELL_TOL * field.strike();
    rule.integrate_adaptive(a, b, &breaks, tol, |y| field.value(y, 0.5)) / (b - a)
}

/// Iterated integral: inner direction split at the kink, outer direction
/// split where the kink crosses the inner-direction cell edges.
fn plane_cell_mean(
    field: &PayoffField,
    rule: &GaussLegendre,
    (a1, b1): (f64, f64),
    (a2, b2): (f64, f64),
) -> f64 {
    let mut breaks = sign_changes(a2, b2, |y| field.excess(a1, y));
    breaks.extend(sign_changes(a2, b2, |y| field.excess(b1, y)));
    let inner_tol = CELL_TOL * field.strike();
    // the inner integral is only accurate to about `inner_tol`, so the outer
    // refinement must not chase that noise
    let outer_tol = 10.0 * inner_tol * (b1 - a1);

    let inner = |y2: f64| {
        let kinks = sign_changes(a1, b1, |y1| field.excess(y1, y2));
        rule.integrate_adaptive(a1, b1, &kinks, inner_tol, |y1| field.value(y1, y2))
    };
    rule.integrate_adaptive(a2, b2, &breaks, outer_tol, inner) / ((b1 - a1) * (b2 - a2))
}
