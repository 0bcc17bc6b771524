//! Zeros of the characteristic determinant in a rectangle and the matching root functions.
//!
//! Zeros are counted by the argument principle with adaptive phase tracking and isolated by
//! recursive splitting. Simple zeros are polished by Newton's method; an `m`-fold zero is
//! first approached with the modified step `m Delta / Delta'` and then polished as the simple
//! zero of `Delta^{(m-1)}`. Multiplicities are the winding numbers on shrinking circles.
//!
//! Root functions follow the convention `(L - lambda) y_k = y_{k-1}` with
//! `L y = B y' + V y`; `y_0` is an eigenfunction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chardet::{self, circle_derivatives, circle_points, delta_scale, STENCIL_POINTS};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::quad::Grid;
use crate::transfer::{self, SeriesOptions};
use crate::{C64, I};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Initial samples per unit length of contour.
const SAMPLES_PER_UNIT: f64 = 2.0;
/// Values below this fraction of the determinant scale count as zeros on a contour.
const NEAR_ZERO_REL: f64 = 1e-11;
/// Rectangles holding several zeros are not split below this diameter.
const CLUSTER_DIAMETER: f64 = 0.02;
const SPLIT_FRACTIONS: [f64; 4] = [0.5173, 0.4627, 0.5541, 0.4409];
const MAX_DILATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        if !(re1 > re0 && im1 > im0) || ![re0, re1, im0, im1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle [{re0}, {re1}] x [{im0}, {im1}]"
            )));
        }
        Ok(Self { re0, re1, im0, im1 })
    }

    /// `[-r, r] x [-r, r]`.
    pub fn square(r: f64) -> Result<Self> {
        Self::new(-r, r, -r, r)
    }

    pub fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    pub fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> C64 {
        C64::new((self.re0 + self.re1) / 2.0, (self.im0 + self.im1) / 2.0)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re0 && z.re <= self.re1 && z.im >= self.im0 && z.im <= self.im1
    }

    /// Grown about its center by the factor `1 + frac` in each direction.
    pub fn dilate(&self, frac: f64) -> Self {
        let (hw, hh) = (self.width() * (1.0 + frac) / 2.0, self.height() * (1.0 + frac) / 2.0);
        let c = self.center();
        Self {
            re0: c.re - hw,
            re1: c.re + hw,
            im0: c.im - hh,
            im1: c.im + hh,
        }
    }

    /// Cut across the longer side at the given fraction.
    pub fn split(&self, frac: f64) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let x = self.re0 + frac * self.width();
            (Rect { re1: x, ..*self }, Rect { re0: x, ..*self })
        } else {
            let y = self.im0 + frac * self.height();
            (Rect { im1: y, ..*self }, Rect { im0: y, ..*self })
        }
    }

    fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    /// Counter-clockwise boundary parametrized by `t in [0, 1)`.
    fn point(&self, t: f64) -> C64 {
        let (w, h) = (self.width(), self.height());
        let s = t * self.perimeter();
        if s < w {
            C64::new(self.re0 + s, self.im0)
        } else if s < w + h {
            C64::new(self.re1, self.im0 + (s - w))
        } else if s < 2.0 * w + h {
            C64::new(self.re1 - (s - w - h), self.im1)
        } else {
            C64::new(self.re0, self.im1 - (s - 2.0 * w - h))
        }
    }

    /// Parameter values of the four corners and an even fill in between.
    fn initial_params(&self) -> Vec<f64> {
        let per = self.perimeter();
        let mut ts = Vec::new();
        let mut start = 0.0;
        for len in [self.width(), self.height(), self.width(), self.height()] {
            let n = ((len * SAMPLES_PER_UNIT).ceil() as usize).max(4);
            for j in 0..n {
                ts.push((start + len * j as f64 / n as f64) / per);
            }
            start += len;
        }
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    #[serde(with = "crate::problem::cnum")]
    pub lambda: C64,
    pub multiplicity: usize,
    /// `|Delta(lambda)|`
    pub residual: f64,
    /// `|Delta(lambda)|` divided by `delta_scale`.
    pub scaled_residual: f64,
    pub enclosure_radius: f64,
    /// Size of the last polishing step.
    pub newton_step: f64,
    /// `scaled_residual <= root_tol`.
    pub converged: bool,
}

/// One sample of the determinant with the level below which it is treated as zero.
#[derive(Debug, Clone, Copy)]
struct Value {
    f: C64,
    zero_level: f64,
    error_bound: f64,
}

enum ContourFailure {
    NearZero,
    Refinement,
    Domain(Error),
}

impl From<Error> for ContourFailure {
    fn from(e: Error) -> Self {
        ContourFailure::Domain(e)
    }
}

fn evaluate(spec: &ProblemSpec, z: C64) -> Result<Value> {
    let s = chardet::delta(spec, z)?;
    let scale = delta_scale(spec.bc(), z);
    Ok(Value {
        f: s.delta,
        zero_level: (10.0 * s.error_bound).max(NEAR_ZERO_REL * scale),
        error_bound: s.error_bound.max(1e-13 * scale),
    })
}

fn phase_step(a: C64, b: C64) -> f64 {
    (b / a).arg()
}

/// Winding number along a closed path and the first moment `(1/2 pi i) \oint z f'/f dz`,
/// which is the sum of the enclosed zeros. `guard` receives the initial samples first.
fn winding<P>(
    spec: &ProblemSpec,
    path: P,
    params: &[f64],
    guard: Option<&dyn Fn(&[Value]) -> Result<()>>,
) -> std::result::Result<(i64, C64), ContourFailure>
where
    P: Fn(f64) -> C64 + Sync,
{
    let vals: Vec<Value> = params
        .par_iter()
        .map(|&t| evaluate(spec, path(t)))
        .collect::<Result<_>>()?;
    if let Some(g) = guard {
        g(&vals)?;
    }
    if vals.iter().any(|v| v.f.norm() <= v.zero_level) {
        return Err(ContourFailure::NearZero);
    }
    let mut acc = Increment::default();
    for k in 0..params.len() {
        let (t0, v0) = (params[k], vals[k]);
        let (t1, v1) = if k + 1 < params.len() {
            (params[k + 1], vals[k + 1])
        } else {
            (params[0] + 1.0, vals[0])
        };
        acc += refine(spec, &path, t0, v0.f, t1, v1.f, 0)?;
    }
    let w = acc.log.im / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.1 {
        return Err(ContourFailure::Refinement);
    }
    Ok((n as i64, acc.moment / (2.0 * PI * I)))
}

/// Change of `log f` along a piece of contour and its `z`-weighted counterpart.
#[derive(Debug, Clone, Copy, Default)]
struct Increment {
    log: C64,
    moment: C64,
}

impl std::ops::AddAssign for Increment {
    fn add_assign(&mut self, o: Self) {
        self.log += o.log;
        self.moment += o.moment;
    }
}

/// Phase change along `[t0, t1]`. A segment is accepted when `f` is close to linear on it
/// (checked at the midpoint) and the chord stays clear of the origin; otherwise it is halved.
fn refine<P: Fn(f64) -> C64>(
    spec: &ProblemSpec,
    path: &P,
    t0: f64,
    f0: C64,
    t1: f64,
    f1: C64,
    depth: usize,
) -> std::result::Result<Increment, ContourFailure> {
    if depth > 40 {
        return Err(ContourFailure::Refinement);
    }
    let tm = 0.5 * (t0 + t1);
    let vm = evaluate(spec, path(tm.rem_euclid(1.0)))?;
    if vm.f.norm() <= vm.zero_level {
        return Err(ContourFailure::NearZero);
    }
    let fm = vm.f;
    let ratio = f1.norm() / f0.norm();
    let linear = (fm - 0.5 * (f0 + f1)).norm() <= 0.25 * f0.norm().min(f1.norm());
    if linear && phase_step(f0, f1).abs() < PI / 2.0 && (0.25..=4.0).contains(&ratio) {
        let z = |t: f64| path(t.rem_euclid(1.0));
        let (z0, zm, z1) = (z(t0), z(tm), z(t1));
        let a = C64::new((fm.norm() / f0.norm()).ln(), phase_step(f0, fm));
        let b = C64::new((f1.norm() / fm.norm()).ln(), phase_step(fm, f1));
        return Ok(Increment {
            log: a + b,
            moment: 0.5 * (z0 + zm) * a + 0.5 * (zm + z1) * b,
        });
    }
    let mut a = refine(spec, path, t0, f0, tm, fm, depth + 1)?;
    a += refine(spec, path, tm, fm, t1, f1, depth + 1)?;
    Ok(a)
}

fn rect_winding(
    spec: &ProblemSpec,
    rect: &Rect,
    guard: bool,
) -> std::result::Result<(usize, C64), ContourFailure> {
    let check = |vals: &[Value]| -> Result<()> {
        let small = vals.iter().filter(|v| v.f.norm() <= v.error_bound).count();
        let fraction = small as f64 / vals.len() as f64;
        if fraction > 0.5 {
            return Err(Error::DegenerateDeterminantSuspected {
                fraction: 100.0 * fraction,
            });
        }
        Ok(())
    };
    let (n, moment) = winding(
        spec,
        |t| rect.point(t),
        &rect.initial_params(),
        if guard { Some(&check) } else { None },
    )?;
    if n < 0 {
        return Err(ContourFailure::Refinement);
    }
    Ok((n as usize, moment))
}

/// Number of zeros (with multiplicity) inside `rect`, and the rectangle actually used
/// after any dilation away from boundary zeros.
pub fn count_zeros_in(spec: &ProblemSpec, rect: &Rect) -> Result<(usize, Rect)> {
    let (n, r, _) = count_with_moment(spec, rect)?;
    Ok((n, r))
}

fn count_with_moment(spec: &ProblemSpec, rect: &Rect) -> Result<(usize, Rect, C64)> {
    let mut r = *rect;
    for attempt in 0..=MAX_DILATIONS {
        match rect_winding(spec, &r, attempt == 0) {
            Ok((n, moment)) => return Ok((n, r, moment)),
            Err(ContourFailure::Domain(e)) => return Err(e),
            Err(_) => r = r.dilate(0.01),
        }
    }
    Err(Error::BoundaryZero {
        attempts: MAX_DILATIONS,
    })
}

pub fn count_zeros(spec: &ProblemSpec, rect: &Rect) -> Result<usize> {
    Ok(count_zeros_in(spec, rect)?.0)
}

/// Zeros inside a circle, retrying slightly smaller radii when the circle passes too close
/// to a zero.
fn circle_count(spec: &ProblemSpec, center: C64, radius: f64) -> Result<(usize, f64)> {
    let n0 = 16;
    let params: Vec<f64> = (0..n0).map(|j| j as f64 / n0 as f64).collect();
    let mut r = radius;
    for _ in 0..6 {
        let path = |t: f64| center + C64::from_polar(r, 2.0 * PI * t);
        match winding(spec, path, &params, None) {
            Ok((n, _)) if n >= 0 => return Ok((n as usize, r)),
            Err(ContourFailure::Domain(e)) => return Err(e),
            _ => r *= 0.93,
        }
    }
    Err(Error::PhaseTrackingFailed(format!(
        "no clean circle of radius about {radius:e} around {center}"
    )))
}

/// Winding numbers on circles of radius `r0, r0/2, ...` until two successive counts agree.
fn multiplicity(spec: &ProblemSpec, z: C64, r0: f64) -> Result<(usize, f64)> {
    let (mut prev, mut r) = circle_count(spec, z, r0)?;
    loop {
        let (c, r_next) = circle_count(spec, z, r / 2.0)?;
        if c == prev && c >= 1 {
            return Ok((c, r_next));
        }
        if r_next < 1e-10 {
            return Ok((c, r_next));
        }
        prev = c;
        r = r_next;
    }
}

struct Polished {
    z: C64,
    step: f64,
}

/// Newton iteration for a zero of multiplicity `m` starting at `z0`.
fn polish(spec: &ProblemSpec, z0: C64, m: usize) -> Result<Polished> {
    let order = m.clamp(1, chardet::MAX_DERIVATIVE_ORDER);
    let mut z = z0;
    let mut step = f64::INFINITY;
    // modified Newton: fast approach, limited accuracy for m > 1
    for _ in 0..60 {
        let d = chardet::delta_derivatives(spec, z, order)?;
        if d[0] == ZERO || d[1] == ZERO {
            step = 0.0;
            break;
        }
        let s = d[0] / d[1] * m as f64;
        z -= s;
        step = s.norm();
        let stop = if m == 1 { 1e-13 } else { 1e-6 };
        if step < stop * z.norm().max(1.0) {
            break;
        }
        if !z.re.is_finite() || !z.im.is_finite() || z.im.abs() > spec.im_cap() {
            return Err(Error::NonFinite("Newton iterate".into()));
        }
    }
    if m >= 2 && m <= chardet::MAX_DERIVATIVE_ORDER {
        // simple zero of Delta^{(m-1)}
        for _ in 0..30 {
            let d = chardet::delta_derivatives(spec, z, m)?;
            if d[m] == ZERO {
                break;
            }
            let s = d[m - 1] / d[m];
            z -= s;
            step = s.norm();
            if step < 1e-13 * z.norm().max(1.0) {
                break;
            }
        }
    }
    Ok(Polished { z, step })
}

fn finish(spec: &ProblemSpec, p: Polished, m: usize, enclosure: f64) -> Result<Eigenvalue> {
    let v = chardet::delta(spec, p.z)?;
    let residual = v.delta.norm();
    let scaled_residual = residual / delta_scale(spec.bc(), p.z);
    let converged = scaled_residual <= spec.tolerances().root_tol;
    if !converged {
        log::warn!("eigenvalue {} has scaled residual {scaled_residual:e}", p.z);
    }
    Ok(Eigenvalue {
        lambda: p.z,
        multiplicity: m,
        residual,
        scaled_residual,
        enclosure_radius: enclosure,
        newton_step: p.step,
        converged,
    })
}

/// Zeros of a rectangle: their number and their sum.
#[derive(Debug, Clone, Copy)]
struct Cell {
    rect: Rect,
    n: usize,
    moment: C64,
}

/// Splits a cell into two children whose counts and moments add up to the parent's.
fn split_counted(spec: &ProblemSpec, cell: &Cell) -> Result<[Cell; 2]> {
    let (rect, n) = (&cell.rect, cell.n);
    for frac in SPLIT_FRACTIONS {
        let (a, b) = rect.split(frac);
        // the smaller child is counted; the other count follows from the parent
        let (first, second) = if frac <= 0.5 { (a, b) } else { (b, a) };
        match rect_winding(spec, &first, false) {
            Ok((k, m)) if k <= n => {
                return Ok([
                    Cell { rect: first, n: k, moment: m },
                    Cell { rect: second, n: n - k, moment: cell.moment - m },
                ])
            }
            Ok(_) => continue,
            Err(ContourFailure::Domain(e)) => return Err(e),
            Err(_) => continue,
        }
    }
    Err(Error::PhaseTrackingFailed(format!(
        "could not split [{}, {}] x [{}, {}] cleanly",
        rect.re0, rect.re1, rect.im0, rect.im1
    )))
}

fn locate(spec: &ProblemSpec, cell: Cell) -> Result<Vec<Eigenvalue>> {
    let Cell { rect, n, .. } = cell;
    if n == 0 {
        return Ok(Vec::new());
    }
    let tiny = rect.diameter() < 1e-9;
    if n == 1 || rect.diameter() < CLUSTER_DIAMETER {
        match leaf(spec, &cell) {
            Ok(Some(ev)) => return Ok(vec![ev]),
            Ok(None) if tiny => {
                log::debug!("dropping unresolved {rect:?} with count {n}");
                return Ok(Vec::new());
            }
            Err(e) if tiny => return Err(e),
            _ => {}
        }
    }
    let [a, b] = split_counted(spec, &cell)?;
    let (ra, rb) = rayon::join(|| locate(spec, a), || locate(spec, b));
    let mut out = ra?;
    out.extend(rb?);
    Ok(out)
}

/// Newton from the mean of the enclosed zeros, as given by the contour moment.
/// The multiplicity found on circles wins when it exceeds `n` (a miscounted neighbour contour).
fn leaf(spec: &ProblemSpec, cell: &Cell) -> Result<Option<Eigenvalue>> {
    let (rect, n) = (&cell.rect, cell.n);
    let mean = cell.moment / n as f64;
    let start = if mean.re.is_finite() && mean.im.is_finite() {
        C64::new(mean.re.clamp(rect.re0, rect.re1), mean.im.clamp(rect.im0, rect.im1))
    } else {
        rect.center()
    };
    let p = polish(spec, start, n)?;
    // zeros closer than this to the contour would have stopped the count
    let slack = 1e-9 * p.z.norm().max(1.0);
    let near = Rect {
        re0: rect.re0 - slack,
        re1: rect.re1 + slack,
        im0: rect.im0 - slack,
        im1: rect.im1 + slack,
    };
    if !near.contains(p.z) {
        log::debug!("Newton left {rect:?} (n = {n}) for {}", p.z);
        return Ok(None);
    }
    let r0 = if n == 1 { 1e-3 } else { rect.diameter().max(1e-3) };
    let (m, r) = multiplicity(spec, p.z, r0)?;
    if m == n {
        return Ok(Some(finish(spec, p, m, r)?));
    }
    if m > n {
        let p = polish(spec, p.z, m)?;
        let (m2, r) = multiplicity(spec, p.z, r0)?;
        if m2 == m {
            return Ok(Some(finish(spec, p, m, r)?));
        }
    }
    log::debug!("multiplicity {m} at {} does not match the count {n} of {rect:?}", p.z);
    Ok(None)
}

/// Merges zeros reported twice by neighbouring rectangles.
fn dedupe(mut evs: Vec<Eigenvalue>) -> Vec<Eigenvalue> {
    let mut out: Vec<Eigenvalue> = Vec::new();
    evs.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    for e in evs {
        let close = |o: &Eigenvalue| {
            let tol = (o.enclosure_radius.max(e.enclosure_radius)).max(1e-9 * e.lambda.norm().max(1.0));
            (o.lambda - e.lambda).norm() <= tol
        };
        if let Some(o) = out.iter_mut().find(|o| close(o)) {
            o.multiplicity = o.multiplicity.max(e.multiplicity);
        } else {
            out.push(e);
        }
    }
    out
}

/// All zeros of `Delta` in `rect`, with multiplicities summing to the winding number.
pub fn find_eigenvalues(spec: &ProblemSpec, rect: &Rect, max_count: usize) -> Result<Vec<Eigenvalue>> {
    let (n, rect, moment) = count_with_moment(spec, rect)?;
    if n > max_count {
        return Err(Error::MaxCountExceeded { found: n, max: max_count });
    }
    let mut out = dedupe(locate(spec, Cell { rect, n, moment })?);
    let total: usize = out.iter().map(|e| e.multiplicity).sum();
    if total != n {
        for e in &out {
            log::debug!("located {} (m = {})", e.lambda, e.multiplicity);
        }
        return Err(Error::PhaseTrackingFailed(format!(
            "located zeros carry total multiplicity {total}, the contour counts {n}"
        )));
    }
    out.sort_by(|a, b| {
        a.lambda
            .re
            .total_cmp(&b.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// root functions

/// A vector function `(y1, y2)` on the grid of its chain.
#[derive(Debug, Clone, Serialize)]
pub struct RootFunction {
    /// 0 for an eigenfunction, `k` for the `k`-th associated function.
    pub order: usize,
    /// Index in the chain of the function this one is attached to (`order > 0`).
    pub parent: Option<usize>,
    /// `(L - lambda) y = ratio * y_parent` after both were normalized.
    #[serde(with = "crate::problem::cnum")]
    pub ratio: C64,
    #[serde(skip)]
    pub y1: Vec<C64>,
    #[serde(skip)]
    pub y2: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct RootFunctionChain {
    pub eigenvalue: Eigenvalue,
    pub grid: Grid,
    pub chain: Vec<RootFunction>,
}

/// `E` and its `lambda`-derivatives up to `order` on `grid`, as `[e11, e12, e21, e22]` blocks.
fn solution_derivatives(
    spec: &ProblemSpec,
    lambda: C64,
    grid: &Grid,
    order: usize,
) -> Result<Vec<[Vec<C64>; 4]>> {
    let opts = SeriesOptions::from_spec(spec);
    let flatten = |z: C64| -> Result<Vec<C64>> {
        let e = transfer::fundamental_solution(spec.potential(), z, grid, &opts)?;
        let mut v = e.e11;
        v.extend(e.e12);
        v.extend(e.e21);
        v.extend(e.e22);
        Ok(v)
    };
    let n = grid.len();
    let unflatten = |v: &[C64]| -> [Vec<C64>; 4] {
        [
            v[0..n].to_vec(),
            v[n..2 * n].to_vec(),
            v[2 * n..3 * n].to_vec(),
            v[3 * n..4 * n].to_vec(),
        ]
    };
    let mut out = vec![unflatten(&flatten(lambda)?)];
    if order > 0 {
        let r = chardet::STENCIL_RADIUS;
        let vals = circle_points(lambda, r, STENCIL_POINTS)
            .into_par_iter()
            .map(flatten)
            .collect::<Result<Vec<_>>>()?;
        for d in circle_derivatives(&vals, r, order).iter().skip(1) {
            out.push(unflatten(d));
        }
    }
    Ok(out)
}

/// `M_jk = U_j(E^[k])` for the boundary forms applied to the columns of a solution block.
fn boundary_matrix_of(spec: &ProblemSpec, e: &[Vec<C64>; 4], derivative: bool) -> DMatrix<C64> {
    let a = spec.bc().coefficients();
    let last = e[0].len() - 1;
    let mut m = DMatrix::zeros(2, 2);
    for j in 0..2 {
        for k in 0..2 {
            // E(0) = I, whose lambda-derivatives vanish
            let at0 = if derivative { ZERO } else { a[j][k] };
            let e1k = e[k][last];
            let e2k = e[2 + k][last];
            m[(j, k)] = at0 + a[j][2] * e1k + a[j][3] * e2k;
        }
    }
    m
}

fn combine(e: &[Vec<C64>; 4], c: &DVector<C64>) -> (Vec<C64>, Vec<C64>) {
    let n = e[0].len();
    let mut y1 = vec![ZERO; n];
    let mut y2 = vec![ZERO; n];
    for i in 0..n {
        y1[i] = e[0][i] * c[0] + e[1][i] * c[1];
        y2[i] = e[2][i] * c[0] + e[3][i] * c[1];
    }
    (y1, y2)
}

/// Discrete `L2` norm with the grid quadrature weights.
pub fn l2_norm(grid: &Grid, y1: &[C64], y2: &[C64]) -> f64 {
    let w = grid.weights();
    let mut s = 0.0;
    for k in 0..w.len() {
        s += w[k] * (y1[k].norm_sqr() + y2[k].norm_sqr());
    }
    s.sqrt()
}

/// Root functions of `ev` on the grid chosen for its `lambda`.
pub fn root_functions(spec: &ProblemSpec, ev: &Eigenvalue) -> Result<RootFunctionChain> {
    let grid = chardet::stencil_grid(spec, ev.lambda, chardet::STENCIL_RADIUS)?;
    root_functions_on_grid(spec, ev, &grid)
}

/// Root functions of `ev` sampled on `grid`.
pub fn root_functions_on_grid(
    spec: &ProblemSpec,
    ev: &Eigenvalue,
    grid: &Grid,
) -> Result<RootFunctionChain> {
    let lambda = ev.lambda;
    let m = ev.multiplicity;
    let depth = (m - 1).min(chardet::MAX_DERIVATIVE_ORDER);
    let ed = solution_derivatives(spec, lambda, grid, depth)?;
    let mats: Vec<DMatrix<C64>> = ed
        .iter()
        .enumerate()
        .map(|(j, e)| boundary_matrix_of(spec, e, j > 0))
        .collect();
    let scale = {
        let a = spec.bc().coefficients();
        let na: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        na * (1.0 + (PI * lambda.im.abs()).exp())
    };
    let svd = mats[0].clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let null: Vec<DVector<C64>> = (0..2)
        .filter(|&i| svd.singular_values[i] <= 1e-6 * scale)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if null.is_empty() {
        return Err(Error::NullSpaceEmpty(format!(
            "{lambda} (smallest singular value {:e})",
            svd.singular_values.min()
        )));
    }
    let pinv = mats[0]
        .clone()
        .pseudo_inverse(1e-6 * scale)
        .map_err(|e| Error::ChainConstructionFailed(e.to_string()))?;

    let mut chain = Vec::new();
    for c0 in null.iter().take(m) {
        let mut coeffs = vec![c0.clone()];
        let mut norms = Vec::new();
        let (y1, y2) = combine(&ed[0], c0);
        let nrm = l2_norm(grid, &y1, &y2);
        norms.push(nrm);
        let root_index = chain.len();
        chain.push(RootFunction {
            order: 0,
            parent: None,
            ratio: ZERO,
            y1: y1.iter().map(|z| z / nrm).collect(),
            y2: y2.iter().map(|z| z / nrm).collect(),
        });
        // extend while the algebraic multiplicity leaves room
        let mut k = 1;
        while chain.len() < m && k <= depth {
            let mut rhs = DVector::<C64>::zeros(2);
            let mut fact = 1.0;
            for j in 1..=k {
                fact *= j as f64;
                rhs -= &mats[j] * &coeffs[k - j] / C64::new(fact, 0.0);
            }
            let ck = &pinv * &rhs;
            let resid = (&mats[0] * &ck - &rhs).norm();
            if resid > 1e-6 * scale * coeffs[0].norm().max(1.0) {
                break;
            }
            let mut y1 = vec![ZERO; grid.len()];
            let mut y2 = vec![ZERO; grid.len()];
            let mut fact = 1.0;
            for j in 0..=k {
                if j > 0 {
                    fact *= j as f64;
                }
                let c = if j == k { &ck } else { &coeffs[k - j] };
                let (a1, a2) = combine(&ed[j], c);
                for i in 0..grid.len() {
                    y1[i] += a1[i] / fact;
                    y2[i] += a2[i] / fact;
                }
            }
            coeffs.push(ck);
            let nrm = l2_norm(grid, &y1, &y2);
            if !(nrm > 0.0) {
                break;
            }
            let parent = chain.len() - 1;
            let ratio = C64::new(norms[k - 1] / nrm, 0.0);
            norms.push(nrm);
            chain.push(RootFunction {
                order: k,
                parent: Some(parent),
                ratio,
                y1: y1.iter().map(|z| z / nrm).collect(),
                y2: y2.iter().map(|z| z / nrm).collect(),
            });
            k += 1;
        }
        let _ = root_index;
    }
    if chain.len() < m {
        return Err(Error::ChainConstructionFailed(format!(
            "built {} of {m} root functions at {lambda}",
            chain.len()
        )));
    }
    Ok(RootFunctionChain {
        eigenvalue: *ev,
        grid: grid.clone(),
        chain,
    })
}

impl RootFunctionChain {
    /// `||B y' + V y - lambda y - ratio y_parent|| / ||y||` for every member.
    pub fn ode_residuals(&self, spec: &ProblemSpec) -> Vec<f64> {
        let grid = &self.grid;
        let x = grid.nodes();
        let lambda = self.eigenvalue.lambda;
        self.chain
            .iter()
            .map(|f| {
                let d1 = grid.derivative(&f.y1);
                let d2 = grid.derivative(&f.y2);
                let mut r1 = vec![ZERO; x.len()];
                let mut r2 = vec![ZERO; x.len()];
                for k in 0..x.len() {
                    if !grid.is_interior(k) {
                        continue;
                    }
                    let p = spec.potential().p(x[k]);
                    let q = spec.potential().q(x[k]);
                    r1[k] = -I * d1[k] + p * f.y2[k] - lambda * f.y1[k];
                    r2[k] = I * d2[k] + q * f.y1[k] - lambda * f.y2[k];
                    if let Some(pi) = f.parent {
                        let g = &self.chain[pi];
                        r1[k] -= f.ratio * g.y1[k];
                        r2[k] -= f.ratio * g.y2[k];
                    }
                }
                l2_norm(grid, &r1, &r2) / l2_norm(grid, &f.y1, &f.y2)
            })
            .collect()
    }

    /// `max(|U1 y|, |U2 y|) / ||y||` for every member.
    pub fn bc_residuals(&self, spec: &ProblemSpec) -> Vec<f64> {
        let last = self.grid.len() - 1;
        self.chain
            .iter()
            .map(|f| {
                let u = spec
                    .bc()
                    .apply([f.y1[0], f.y2[0]], [f.y1[last], f.y2[last]]);
                u[0].norm().max(u[1].norm()) / l2_norm(&self.grid, &f.y1, &f.y2)
            })
            .collect()
    }
}
