//! Gauss–Legendre rules and a kink-aware integrator for piecewise-smooth
//! integrands.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Rule with half as many nodes, used to estimate panel errors.
    coarse: Option<Box<GaussLegendre>>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let coarse = (n >= 2).then(|| Box::new(Self::new(n / 2)));
        Self {
            nodes,
            weights,
            coarse,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Integral of `f` over `[a, b]`, split at the sign changes of `indicator`.
    ///
    /// `f` must be smooth on every piece where `indicator` keeps its sign.
    pub fn integrate_piecewise(
        &self,
        a: f64,
        b: f64,
        indicator: impl Fn(f64) -> f64,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        let breaks = sign_changes(a, b, &indicator);
        pieces(a, b, &breaks)
            .iter()
            .map(|(lo, hi)| self.integrate(*lo, *hi, &mut f))
            .sum()
    }

    /// Integral of `f` over `[a, b]` as a sum over the pieces delimited by
    /// `breaks` (in any order; points outside `(a, b)` are ignored).
    ///
    /// A piece is accepted once this rule and the rule with half as many
    /// nodes agree to `tol` times its length; otherwise it is halved.
    pub fn integrate_adaptive(
        &self,
        a: f64,
        b: f64,
        breaks: &[f64],
        tol: f64,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        pieces(a, b, breaks)
            .iter()
            .map(|(lo, hi)| self.refine(*lo, *hi, tol, MAX_DEPTH, &mut f))
            .sum()
    }

    fn refine(
        &self,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        f: &mut impl FnMut(f64) -> f64,
    ) -> f64 {
        let fine = self.integrate(a, b, &mut *f);
        let Some(coarse) = &self.coarse else {
            return fine;
        };
        if depth == 0 || (fine - coarse.integrate(a, b, &mut *f)).abs() <= tol * (b - a) {
            return fine;
        }
        let mid = 0.5 * (a + b);
        self.refine(a, mid, tol, depth - 1, f) + self.refine(mid, b, tol, depth - 1, f)
    }
}

const MAX_DEPTH: usize = 12;

/// Consecutive nonempty subintervals of `[a, b]` delimited by `breaks`.
fn pieces(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|c| *c > a && *c < b).collect();
    points.sort_by(f64::total_cmp);
    points.push(b);
    let mut out = Vec::with_capacity(points.len());
    let mut lo = a;
    for c in points {
        if c > lo {
            out.push((lo, c));
        }
        lo = c;
    }
    out
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const ROOT_SAMPLES: usize = 8;

/// Sorted roots of `g` inside `(a, b)`, located by sampling and bisection.
///
/// Pairs of roots closer together than `(b - a) / 8` may be missed.
pub fn sign_changes(a: f64, b: f64, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (b - a) / ROOT_SAMPLES as f64;
    let mut x0 = a;
    let mut g0 = g(a);
    for k in 1..=ROOT_SAMPLES {
        let x1 = if k == ROOT_SAMPLES { b } else { a + k as f64 * step };
        let g1 = g(x1);
        if (g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0) {
            roots.push(bisect(x0, x1, g0, &g));
        }
        x0 = x1;
        g0 = g1;
    }
    roots
}

/// Illinois variant of false position on a bracketing interval.
fn bisect(mut lo: f64, mut hi: f64, g_lo: f64, g: &impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = g_lo;
    let mut f_hi = g(hi);
    let mut side = 0i8;
    for _ in 0..100 {
        let mut c = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        let fc = g(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (f_lo < 0.0) {
            lo = c;
            f_lo = fc;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            f_hi = fc;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
