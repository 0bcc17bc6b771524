//! Quadrature: Gauss-Legendre panels with spectral cumulative integration, global
//! adaptive integration, and nested (iterated) integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::C64;

/// Default number of Gauss-Legendre nodes per panel.
pub const DEFAULT_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(z), p0 = P_{m-1}(z)
            dp = if m == 1 {
                1.0
            } else {
                m as f64 * (z * p1 - p0) / (z * z - 1.0)
            };
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// Barycentric weights for interpolation through arbitrary distinct nodes.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                w[j] /= x[j] - x[k];
            }
        }
    }
    let scale = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
    w.iter().map(|v| v / scale).collect()
}

fn lagrange_basis(nodes: &[f64], bw: &[f64], j: usize, t: f64) -> f64 {
    if let Some(k) = nodes.iter().position(|&xk| xk == t) {
        return if k == j { 1.0 } else { 0.0 };
    }
    let mut den = 0.0;
    for (xk, wk) in nodes.iter().zip(bw) {
        den += wk / (t - xk);
    }
    (bw[j] / (t - nodes[j])) / den
}

/// Reference panel data on `[-1, 1]` for one Gauss-Legendre order.
#[derive(Debug)]
pub struct PanelRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `cum[i][j] = int_{-1}^{nodes[i]} l_j(s) ds`
    cum: Vec<Vec<f64>>,
    /// Differentiation matrix on `[-1, nodes..., 1]`.
    diff: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        let bw = barycentric_weights(&nodes);
        let mut cum = vec![vec![0.0; order]; order];
        for (i, row) in cum.iter_mut().enumerate() {
            let half = (nodes[i] + 1.0) / 2.0;
            for (j, c) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for (xk, wk) in nodes.iter().zip(&weights) {
                    let t = -1.0 + half * (xk + 1.0);
                    s += wk * lagrange_basis(&nodes, &bw, j, t);
                }
                *c = half * s;
            }
        }
        let mut ext = Vec::with_capacity(order + 2);
        ext.push(-1.0);
        ext.extend_from_slice(&nodes);
        ext.push(1.0);
        let ew = barycentric_weights(&ext);
        let n = ext.len();
        let mut diff = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = (ew[j] / ew[i]) / (ext[i] - ext[j]);
                    diff[i][j] = d;
                    diag -= d;
                }
            }
            diff[i][i] = diag;
        }
        Self {
            order,
            nodes,
            weights,
            cum,
            diff,
        }
    }
}

/// A composite grid of Gauss-Legendre panels.
///
/// Nodes are stored as `[b_0, interior(panel 0)..., b_1, interior(panel 1)..., b_P]`, so
/// every panel boundary is a node. Integrands are only ever sampled at interior nodes,
/// which keeps integrable endpoint singularities out of the arithmetic.
#[derive(Debug, Clone)]
pub struct Grid {
    breaks: Vec<f64>,
    rule: Arc<PanelRule>,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn from_breaks(breaks: Vec<f64>, order: usize) -> Result<Self> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "panel breaks must be strictly increasing".into(),
            ));
        }
        let rule = Arc::new(PanelRule::new(order));
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * (order + 1) + 1);
        nodes.push(breaks[0]);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / 2.0;
            nodes.extend(rule.nodes.iter().map(|s| a + h * (s + 1.0)));
            nodes.push(b);
        }
        Ok(Self { breaks, rule, nodes })
    }

    pub fn uniform(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        let panels = panels.max(1);
        let breaks = (0..=panels)
            .map(|k| a + (b - a) * k as f64 / panels as f64)
            .collect::<Vec<_>>();
        Self::from_breaks(breaks, order)
    }

    /// Uniform panels with geometrically shrinking panels added next to the given points.
    pub fn graded(
        a: f64,
        b: f64,
        panels: usize,
        points: &[f64],
        ratio: f64,
        levels: usize,
        order: usize,
    ) -> Result<Self> {
        let mut breaks: Vec<f64> = (0..=panels.max(1))
            .map(|k| a + (b - a) * k as f64 / panels.max(1) as f64)
            .collect();
        let width = (b - a) / panels.max(1) as f64;
        for &p in points {
            if p < a || p > b {
                continue;
            }
            breaks.push(p);
            let mut d = width;
            for _ in 0..levels {
                d *= ratio;
                if d <= 64.0 * f64::EPSILON * p.abs() {
                    break;
                }
                if p - d > a {
                    breaks.push(p - d);
                }
                if p + d < b {
                    breaks.push(p + d);
                }
            }
        }
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        breaks.dedup();
        Self::from_breaks(breaks, order)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn order(&self) -> usize {
        self.rule.order
    }

    pub fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn start(&self) -> f64 {
        self.breaks[0]
    }

    pub fn end(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// True for Gauss nodes, false for panel boundaries.
    pub fn is_interior(&self, idx: usize) -> bool {
        idx % (self.rule.order + 1) != 0
    }

    /// Indices of the panel boundaries.
    pub fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.panels()).map(move |p| p * (self.rule.order + 1))
    }

    /// Quadrature weights over the whole grid (zero at panel boundaries).
    pub fn weights(&self) -> Vec<f64> {
        let m = self.rule.order;
        let mut w = vec![0.0; self.nodes.len()];
        for p in 0..self.panels() {
            let h = (self.breaks[p + 1] - self.breaks[p]) / 2.0;
            let base = p * (m + 1);
            for j in 0..m {
                w[base + 1 + j] = h * self.rule.weights[j];
            }
        }
        w
    }

    /// `out[k] = int_{start}^{nodes[k]} f`, using `f` at interior nodes only.
    pub fn cumulative_into(&self, f: &[C64], out: &mut [C64]) {
        let m = self.rule.order;
        debug_assert_eq!(f.len(), self.nodes.len());
        debug_assert_eq!(out.len(), self.nodes.len());
        out[0] = C64::new(0.0, 0.0);
        for p in 0..self.panels() {
            let h = (self.breaks[p + 1] - self.breaks[p]) / 2.0;
            let base = p * (m + 1);
            let acc = out[base];
            let fp = &f[base + 1..base + 1 + m];
            for i in 0..m {
                let row = &self.rule.cum[i];
                let mut s = C64::new(0.0, 0.0);
                for (c, v) in row.iter().zip(fp) {
                    s += v * *c;
                }
                out[base + 1 + i] = acc + s * h;
            }
            let mut tot = C64::new(0.0, 0.0);
            for (w, v) in self.rule.weights.iter().zip(fp) {
                tot += v * *w;
            }
            out[base + m + 1] = acc + tot * h;
        }
    }

    pub fn cumulative(&self, f: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        self.cumulative_into(f, &mut out);
        out
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        let m = self.rule.order;
        let mut tot = C64::new(0.0, 0.0);
        for p in 0..self.panels() {
            let h = (self.breaks[p + 1] - self.breaks[p]) / 2.0;
            let base = p * (m + 1);
            for j in 0..m {
                tot += f[base + 1 + j] * (self.rule.weights[j] * h);
            }
        }
        tot
    }

    /// Derivative of a grid function that is smooth within each panel. Panel boundary
    /// values average the one-sided estimates of the adjacent panels.
    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        let m = self.rule.order;
        let n = m + 2;
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        let mut hits = vec![0u8; f.len()];
        for p in 0..self.panels() {
            let h = (self.breaks[p + 1] - self.breaks[p]) / 2.0;
            let base = p * (m + 1);
            let fp = &f[base..base + n];
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for (d, v) in self.rule.diff[i].iter().zip(fp) {
                    s += v * *d;
                }
                out[base + i] += s / h;
                hits[base + i] += 1;
            }
        }
        for (o, &k) in out.iter_mut().zip(&hits) {
            if k > 1 {
                *o /= k as f64;
            }
        }
        out
    }

    pub fn sample<F: Fn(f64) -> C64>(&self, f: F) -> Vec<C64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: C64,
    pub error: f64,
    pub intervals: usize,
}

/// Global adaptive Gauss-Legendre integration of `f` over `[a, b]`.
///
/// Each interval is estimated with a 10-point rule and with the rule applied to both
/// halves; the interval with the largest discrepancy is split until the summed
/// discrepancy falls below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate_adaptive<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: C64::new(0.0, 0.0),
            error: 0.0,
            intervals: 0,
        });
    }
    let (xs, ws) = gauss_legendre(10);
    let rule = |lo: f64, hi: f64| -> C64 {
        let h = (hi - lo) / 2.0;
        let c = (hi + lo) / 2.0;
        let mut s = C64::new(0.0, 0.0);
        for (x, w) in xs.iter().zip(&ws) {
            s += f(c + h * x) * *w;
        }
        s * h
    };
    let make = |lo: f64, hi: f64, whole: C64| -> Segment {
        let mid = 0.5 * (lo + hi);
        let halves = rule(lo, mid) + rule(mid, hi);
        Segment {
            a: lo,
            b: hi,
            value: halves,
            error: (halves - whole).norm(),
        }
    };
    let mut heap = BinaryHeap::new();
    heap.push(make(a, b, rule(a, b)));
    let mut intervals = 1;
    loop {
        let total: C64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.error).sum();
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::QuadratureNotConverged(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(Integral {
                value: total,
                error: err,
                intervals,
            });
        }
        if intervals >= max_intervals {
            return Err(Error::QuadratureNotConverged(format!(
                "error estimate {err:e} after {intervals} intervals on [{a}, {b}]"
            )));
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNotConverged(format!(
                "interval collapsed near {mid}"
            )));
        }
        let left_whole = rule(worst.a, mid);
        let right_whole = rule(mid, worst.b);
        heap.push(make(worst.a, mid, left_whole));
        heap.push(make(mid, worst.b, right_whole));
        intervals += 1;
    }
}

/// Options for [`iterated_integral`].
#[derive(Debug, Clone)]
pub struct IteratedOptions {
    /// Points (besides the left end) where `f` may be singular or non-smooth.
    pub breakpoints: Vec<f64>,
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl Default for IteratedOptions {
    fn default() -> Self {
        Self {
            breakpoints: Vec::new(),
            rel_tol: 1e-11,
            max_refinements: 4,
        }
    }
}

fn nested_on_grid<F: Fn(f64) -> C64>(f: &F, grid: &Grid, n: usize) -> C64 {
    let fv: Vec<C64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if grid.is_interior(k) {
                f(x)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let mut level = grid.cumulative(&fv);
    let mut work = vec![C64::new(0.0, 0.0); fv.len()];
    for _ in 1..n {
        for (w, (a, b)) in work.iter_mut().zip(fv.iter().zip(&level)) {
            *w = a * b;
        }
        grid.cumulative_into(&work, &mut level);
    }
    *level.last().unwrap()
}

/// The `n`-fold nested integral
/// `int_a^x0 f(x1) int_a^x1 f(x2) ... int_a^x(n-1) f(xn) dxn ... dx1`,
/// computed by `n` passes of panel-wise cumulative integration on a grid graded towards
/// `a`, `x0` and any declared breakpoints. The grid is refined until two successive
/// resolutions agree to `rel_tol`.
pub fn iterated_integral<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    x0: f64,
    n: usize,
    opts: &IteratedOptions,
) -> Result<C64> {
    if n == 0 {
        return Err(Error::InvalidInput("nesting depth must be at least 1".into()));
    }
    if !(x0 > a) {
        return Err(Error::InvalidInput("iterated integral needs a < x0".into()));
    }
    let mut points = vec![a, x0];
    points.extend(opts.breakpoints.iter().copied().filter(|&p| p > a && p < x0));
    let mut panels = 8;
    let build = |panels: usize| Grid::graded(a, x0, panels, &points, 0.15, 60, DEFAULT_ORDER);
    let mut prev = nested_on_grid(&f, &build(panels)?, n);
    for _ in 0..opts.max_refinements {
        panels *= 2;
        let next = nested_on_grid(&f, &build(panels)?, n);
        if !(next.re.is_finite() && next.im.is_finite()) {
            return Err(Error::QuadratureNotConverged(
                "non-finite nested integral".into(),
            ));
        }
        if (next - prev).norm() <= opts.rel_tol * next.norm().max(1e-300) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged(format!(
        "nested integral of depth {n} did not settle"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for m in [1, 2, 5, 10, 16] {
            let (x, w) = gauss_legendre(m);
            for k in 0..(2 * m) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let g = Grid::uniform(0.0, PI, 8, DEFAULT_ORDER).unwrap();
        let f = g.sample(|x| C64::new(x.cos(), (3.0 * x).sin()));
        let cum = g.cumulative(&f);
        for (x, v) in g.nodes().iter().zip(&cum) {
            let exact = C64::new(x.sin(), (1.0 - (3.0 * x).cos()) / 3.0);
            assert!((v - exact).norm() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn derivative_of_smooth_function() {
        let g = Grid::uniform(0.0, PI, 6, DEFAULT_ORDER).unwrap();
        let f = g.sample(|x| C64::new((2.0 * x).sin(), x * x));
        let d = g.derivative(&f);
        for (x, v) in g.nodes().iter().zip(&d) {
            let exact = C64::new(2.0 * (2.0 * x).cos(), 2.0 * x);
            assert!((v - exact).norm() < 1e-9, "x={x} got {v}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate_adaptive(|x| c(x.powf(-0.5)), 0.0, 1.0, 1e-13, 1e-12, 2000).unwrap();
        assert!((r.value.re - 2.0).abs() < 1e-10);
        let r = integrate_adaptive(|x| c(x), 0.0, PI, 0.0, 1e-14, 100).unwrap();
        assert!((r.value.re - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let r = integrate_adaptive(|x| c(1.0 / x), 0.0, 1.0, 0.0, 1e-12, 50);
        assert!(matches!(r, Err(Error::QuadratureNotConverged(_))));
    }

    #[test]
    fn iterated_integral_examples() {
        let o = IteratedOptions::default();
        let v = iterated_integral(|_| c(1.0), 0.0, 1.0, 3, &o).unwrap();
        assert!((v.re - 1.0 / 6.0).abs() < 1e-14);
        let v = iterated_integral(|_| c(1.0), 0.0, 1.0, 1, &o).unwrap();
        assert!((v.re - 1.0).abs() < 1e-14);
        let v = iterated_integral(|x| c(x), 0.0, 2.0, 2, &o).unwrap();
        assert!((v.re - 2.0).abs() < 1e-13);
    }

    #[test]
    fn iterated_integral_brute_force_depth_two() {
        // direct double loop over a fine midpoint grid as an independent check
        let f = |x: f64| (3.0 * x).sin() + 0.5;
        let n = 4000;
        let h = 1.5 / n as f64;
        let mut inner = 0.0;
        let mut total = 0.0;
        for k in 0..n {
            let x = (k as f64 + 0.5) * h;
            let fx = f(x);
            // inner integral up to x, trapezoid-corrected half cell
            total += fx * (inner + 0.5 * fx * h) * h;
            inner += fx * h;
        }
        let v = iterated_integral(|x| c(f(x)), 0.0, 1.5, 2, &IteratedOptions::default()).unwrap();
        assert!((v.re - total).abs() < 1e-6, "{} vs {}", v.re, total);
    }
}
