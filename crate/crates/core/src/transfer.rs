//! Fundamental matrix `E(x, lambda)`, `E(0, lambda) = I`, of
//! `y' = [[i lambda, -i P], [i Q, -i lambda]] y`.
//!
//! The series engine writes
//!
//! ```text
//! e11 = e^{i l x} sum g_n    e12 = -i e^{i l x} sum p_n
//! e21 = i e^{-i l x} sum q_n e22 = e^{-i l x} sum h_n
//! ```
//!
//! with `g_0 = h_0 = 1` and the half-step recurrences
//!
//! ```text
//! p_0 = int e^{-2ilt} P,   h_{n+1} = int e^{2ilt} Q p_n,   p_{n+1} = int e^{-2ilt} P h_{n+1}
//! q_n = int e^{2ilt} Q g_n,   g_{n+1} = int e^{-2ilt} P q_n
//! ```
//!
//! Each half step is one cumulative quadrature pass over a panel grid. The oracle
//! marches the same system with a fourth order Magnus integrator.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialKind};
use crate::problem::{ProblemSpec, DEFAULT_IM_CAP};
use crate::quad::{Grid, DEFAULT_ORDER};
use crate::{C64, I};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Hard limit on the number of half-step terms.
pub const MAX_HALF_TERMS: usize = 4000;
/// Geometric refinement next to endpoints with declared `rho < 1` and rough points of closed forms.
pub const GRADE_RATIO: f64 = 0.15;
pub const GRADE_LEVELS: usize = 60;
/// Sampled potentials with at most this many samples get panel breaks at every sample.
pub const MAX_ALIGNED_SAMPLES: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Target for the tail bound relative to `e^{pi |Im lambda|}`.
    pub tol: f64,
    /// Largest admissible `|Im lambda|`.
    pub im_cap: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            im_cap: DEFAULT_IM_CAP,
        }
    }
}

impl SeriesOptions {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            tol: spec.tolerances().series_tol,
            im_cap: spec.im_cap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    P,
    Q,
    G,
    H,
}

/// One term of one of the four series, sampled on the grid.
#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub family: Family,
    pub order: usize,
    pub values: Vec<C64>,
}

impl SeriesTerm {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Power of `M` in the factorial bound: `2n+1` for `p, q`, `2n` for `g, h`.
    pub fn bound_power(&self) -> usize {
        match self.family {
            Family::P | Family::Q => 2 * self.order + 1,
            Family::G | Family::H => 2 * self.order,
        }
    }
}

/// `E(x, lambda)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub lambda: C64,
    pub grid: Grid,
    pub e11: Vec<C64>,
    pub e12: Vec<C64>,
    pub e21: Vec<C64>,
    pub e22: Vec<C64>,
    /// Uniform bound on the discarded tail of every entry.
    pub truncation_bound: f64,
    /// Number of half-step terms computed per column.
    pub terms_used: usize,
}

impl FundamentalSolution {
    pub fn x(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn len(&self) -> usize {
        self.e11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e11.is_empty()
    }

    pub fn at(&self, k: usize) -> [[C64; 2]; 2] {
        [[self.e11[k], self.e12[k]], [self.e21[k], self.e22[k]]]
    }

    pub fn at_end(&self) -> [[C64; 2]; 2] {
        self.at(self.len() - 1)
    }

    /// `e11 e22 - e12 e21` at every grid point.
    pub fn wronskian(&self) -> Vec<C64> {
        (0..self.len())
            .map(|k| self.e11[k] * self.e22[k] - self.e12[k] * self.e21[k])
            .collect()
    }

    /// CSV with columns `x`, then real and imaginary part of each entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,re_e11,im_e11,re_e12,im_e12,re_e21,im_e21,re_e22,im_e22\n");
        for k in 0..self.len() {
            let _ = write!(s, "{:.16e}", self.x()[k]);
            for z in [self.e11[k], self.e12[k], self.e21[k], self.e22[k]] {
                let _ = write!(s, ",{:.16e},{:.16e}", z.re, z.im);
            }
            s.push('\n');
        }
        s
    }
}

/// Number of panels needed to resolve `e^{2 i lambda t}` with the default panel order.
pub fn panels_for(grid_size: usize, lambda: C64) -> usize {
    grid_size.max((2.0 * lambda.norm() * PI / 3.0).ceil() as usize)
}

/// Panel grid on `[0, pi]` adapted to the potential and to `|lambda|`.
pub fn solution_grid(p: &Potential, grid_size: usize, lambda: C64) -> Result<Grid> {
    let panels = panels_for(grid_size, lambda);
    if let PotentialKind::Sampled(s) = p.kind() {
        if s.x.len() <= MAX_ALIGNED_SAMPLES {
            let mut breaks = vec![0.0];
            for w in s.x.windows(2) {
                let pieces = ((panels as f64) * (w[1] - w[0]) / PI).ceil().max(1.0) as usize;
                for j in 1..=pieces {
                    breaks.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
                }
            }
            *breaks.last_mut().unwrap() = PI;
            return Grid::from_breaks(breaks, DEFAULT_ORDER);
        }
    }
    let ed = p.endpoint_data();
    let singular = |r: Option<crate::EndpointRecord>| r.is_some_and(|r| r.rho < 1.0);
    let mut points = Vec::new();
    if singular(ed.p_at_0) || singular(ed.q_at_0) {
        points.push(0.0);
    }
    if singular(ed.p_at_pi) || singular(ed.q_at_pi) {
        points.push(PI);
    }
    points.extend_from_slice(p.rough_points());
    if points.is_empty() {
        Grid::uniform(0.0, PI, panels, DEFAULT_ORDER)
    } else {
        Grid::graded(0.0, PI, panels, &points, GRADE_RATIO, GRADE_LEVELS, DEFAULT_ORDER)
    }
}

fn check_lambda(lambda: C64, opts: &SeriesOptions) -> Result<()> {
    crate::ensure_finite(lambda, "lambda")?;
    if lambda.im.abs() > opts.im_cap {
        return Err(Error::SeriesDivergenceGuard {
            im: lambda.im.abs(),
            cap: opts.im_cap,
        });
    }
    Ok(())
}

/// `P`, `Q` at the interior grid nodes (zero at panel boundaries, which are never used).
struct Samples {
    p: Vec<C64>,
    q: Vec<C64>,
}

impl Samples {
    fn new(pot: &Potential, grid: &Grid) -> Result<Self> {
        let n = grid.len();
        let mut p = vec![ZERO; n];
        let mut q = vec![ZERO; n];
        for (k, &x) in grid.nodes().iter().enumerate() {
            if grid.is_interior(k) {
                p[k] = crate::ensure_finite(pot.p(x), "P on the grid")?;
                q[k] = crate::ensure_finite(pot.q(x), "Q on the grid")?;
            }
        }
        Ok(Self { p, q })
    }
}

/// `ln(x^k / k!)`, with `0^0 = 1`.
fn ln_power_over_factorial(x: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut s = k as f64 * x.ln();
    for j in 2..=k {
        s -= (j as f64).ln();
    }
    s
}

/// Bound on `sum_{j >= k} x^j / j!` by `x^k / k! e^x`.
fn tail(x: f64, k: usize) -> f64 {
    (ln_power_over_factorial(x, k) + x).exp()
}

/// Bound data for one lambda: plain `L1` mass and the weighted mass of the factorial bound.
#[derive(Debug, Clone, Copy)]
struct Masses {
    m: f64,
    weighted: f64,
}

impl Masses {
    fn new(grid: &Grid, s: &Samples, lambda: C64) -> Self {
        let w = grid.weights();
        let (mut m, mut weighted) = (0.0, 0.0);
        for (k, &x) in grid.nodes().iter().enumerate() {
            if w[k] == 0.0 {
                continue;
            }
            let (a, b) = (s.p[k].norm(), s.q[k].norm());
            m += w[k] * (a + b);
            let e = (2.0 * lambda.im * x).exp();
            weighted += w[k] * (e * a + b / e);
        }
        Self { m, weighted }
    }

    /// Bound on the remaining terms from half-step index `k` on, relative to `e^{pi |Im l|}`.
    ///
    /// Two majorants are valid: `|term_k| <= e^{2 (+-Im l)^+ t} m^k / k!` and
    /// `|term_k| <= M^k / k!` with the weighted mass `M`; the smaller one is used.
    fn relative_tail(&self, k: usize) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        tail(self.m, k).min(tail(self.weighted, k))
    }
}

/// Raw output of the two series chains on one grid.
struct Chains {
    /// `(sum g, sum q)` when the first column was requested.
    col1: Option<(Vec<C64>, Vec<C64>)>,
    /// `(sum p, sum h)` when the second column was requested.
    col2: Option<(Vec<C64>, Vec<C64>)>,
    relative_tail: f64,
    half_terms: usize,
}

struct Kernels {
    /// `e^{-2 i l t} P`
    fp: Vec<C64>,
    /// `e^{2 i l t} Q`
    fq: Vec<C64>,
}

impl Kernels {
    fn new(grid: &Grid, s: &Samples, lambda: C64) -> Self {
        let mut fp = vec![ZERO; grid.len()];
        let mut fq = vec![ZERO; grid.len()];
        for (k, &x) in grid.nodes().iter().enumerate() {
            if grid.is_interior(k) {
                let e = (-2.0 * I * lambda * x).exp();
                fp[k] = e * s.p[k];
                fq[k] = s.q[k] / e;
            }
        }
        Self { fp, fq }
    }
}

fn mul_into(a: &[C64], b: &[C64], out: &mut [C64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
}

/// Runs the requested chains. `sink` sees every term as it is produced.
fn run_chains(
    grid: &Grid,
    s: &Samples,
    lambda: C64,
    opts: &SeriesOptions,
    need: [bool; 2],
    mut sink: impl FnMut(Family, usize, &[C64]),
) -> Result<Chains> {
    let n = grid.len();
    let masses = Masses::new(grid, s, lambda);
    let ker = Kernels::new(grid, s, lambda);
    let mut scratch = vec![ZERO; n];

    // column 1: current g term and q term
    let mut g = vec![ONE; n];
    let mut q = vec![ZERO; n];
    let mut sum_g = g.clone();
    let mut sum_q = vec![ZERO; n];
    // column 2: current h term and p term
    let mut h = vec![ONE; n];
    let mut p = vec![ZERO; n];
    let mut sum_p = vec![ZERO; n];
    let mut sum_h = h.clone();

    if need[0] {
        sink(Family::G, 0, &g);
    }
    if need[1] {
        sink(Family::H, 0, &h);
    }

    let mut k = 0;
    loop {
        let rel = masses.relative_tail(k + 1);
        if rel < opts.tol || k >= MAX_HALF_TERMS {
            if rel >= opts.tol {
                return Err(Error::SeriesDivergenceGuard {
                    im: lambda.im.abs(),
                    cap: opts.im_cap,
                });
            }
            return Ok(Chains {
                col1: need[0].then_some((sum_g, sum_q)),
                col2: need[1].then_some((sum_p, sum_h)),
                relative_tail: rel,
                half_terms: k,
            });
        }
        k += 1;
        let order = (k - 1) / 2;
        if k % 2 == 1 {
            // odd half steps produce q_n and p_n
            if need[0] {
                mul_into(&ker.fq, &g, &mut scratch);
                grid.cumulative_into(&scratch, &mut q);
                add_assign(&mut sum_q, &q);
                sink(Family::Q, order, &q);
            }
            if need[1] {
                mul_into(&ker.fp, &h, &mut scratch);
                grid.cumulative_into(&scratch, &mut p);
                add_assign(&mut sum_p, &p);
                sink(Family::P, order, &p);
            }
        } else {
            let order = k / 2;
            if need[0] {
                mul_into(&ker.fp, &q, &mut scratch);
                grid.cumulative_into(&scratch, &mut g);
                add_assign(&mut sum_g, &g);
                sink(Family::G, order, &g);
            }
            if need[1] {
                mul_into(&ker.fq, &p, &mut scratch);
                grid.cumulative_into(&scratch, &mut h);
                add_assign(&mut sum_h, &h);
                sink(Family::H, order, &h);
            }
        }
    }
}

fn add_assign(acc: &mut [C64], v: &[C64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Terms `n = 0, 1, ...` of one series until the factorial tail bound drops below `opts.tol`.
pub fn picard_terms(
    pot: &Potential,
    lambda: C64,
    family: Family,
    grid: &Grid,
    opts: &SeriesOptions,
) -> Result<Vec<SeriesTerm>> {
    check_lambda(lambda, opts)?;
    let s = Samples::new(pot, grid)?;
    let need = match family {
        Family::G | Family::Q => [true, false],
        Family::P | Family::H => [false, true],
    };
    let mut out = Vec::new();
    run_chains(grid, &s, lambda, opts, need, |f, order, v| {
        if f == family {
            out.push(SeriesTerm {
                family,
                order,
                values: v.to_vec(),
            });
        }
    })?;
    if out.is_empty() {
        // only possible for p or q when the series stops before the first half step
        out.push(SeriesTerm {
            family,
            order: 0,
            values: vec![ZERO; grid.len()],
        });
    }
    Ok(out)
}

/// Weighted mass `M = int (|e^{-2ilt} P| + |e^{2ilt} Q|)` on the grid.
pub fn factorial_bound_mass(pot: &Potential, lambda: C64, grid: &Grid) -> Result<f64> {
    let s = Samples::new(pot, grid)?;
    Ok(Masses::new(grid, &s, lambda).weighted)
}

fn assemble(grid: &Grid, lambda: C64, chains: Chains) -> FundamentalSolution {
    let n = grid.len();
    let mut e11 = vec![ZERO; n];
    let mut e12 = vec![ZERO; n];
    let mut e21 = vec![ZERO; n];
    let mut e22 = vec![ZERO; n];
    for (k, &x) in grid.nodes().iter().enumerate() {
        let ep = (I * lambda * x).exp();
        let em = (-I * lambda * x).exp();
        if let Some((g, q)) = &chains.col1 {
            e11[k] = ep * g[k];
            e21[k] = I * em * q[k];
        }
        if let Some((p, h)) = &chains.col2 {
            e12[k] = -I * ep * p[k];
            e22[k] = em * h[k];
        }
    }
    // x = 0 exactly
    e11[0] = ONE;
    e22[0] = ONE;
    e12[0] = ZERO;
    e21[0] = ZERO;
    FundamentalSolution {
        lambda,
        grid: grid.clone(),
        e11,
        e12,
        e21,
        e22,
        truncation_bound: chains.relative_tail * (PI * lambda.im.abs()).exp(),
        terms_used: chains.half_terms,
    }
}

/// `E(x, lambda)` from the iterated-integral series on `grid`.
pub fn fundamental_solution(
    pot: &Potential,
    lambda: C64,
    grid: &Grid,
    opts: &SeriesOptions,
) -> Result<FundamentalSolution> {
    check_lambda(lambda, opts)?;
    let s = Samples::new(pot, grid)?;
    let chains = run_chains(grid, &s, lambda, opts, [true, true], |_, _, _| {})?;
    let sol = assemble(grid, lambda, chains);
    for v in [&sol.e11, &sol.e12, &sol.e21, &sol.e22] {
        for z in v.iter() {
            crate::ensure_finite(*z, "fundamental solution entry")?;
        }
    }
    Ok(sol)
}

/// `E(x, lambda)` on the grid chosen for `spec` at this `lambda`.
pub fn solve(spec: &ProblemSpec, lambda: C64) -> Result<FundamentalSolution> {
    let grid = solution_grid(spec.potential(), spec.grid_size(), lambda)?;
    fundamental_solution(spec.potential(), lambda, &grid, &SeriesOptions::from_spec(spec))
}

/// `E(pi, lambda)` and its tail bound, computing only the columns in `need`.
/// Entries of columns not requested are zero.
pub(crate) fn end_values(
    spec: &ProblemSpec,
    lambda: C64,
    need: [bool; 2],
) -> Result<([[C64; 2]; 2], f64)> {
    let opts = SeriesOptions::from_spec(spec);
    check_lambda(lambda, &opts)?;
    if !need[0] && !need[1] {
        return Ok(([[ONE, ZERO], [ZERO, ONE]], 0.0));
    }
    let grid = solution_grid(spec.potential(), spec.grid_size(), lambda)?;
    let s = Samples::new(spec.potential(), &grid)?;
    let chains = run_chains(&grid, &s, lambda, &opts, need, |_, _, _| {})?;
    let k = grid.len() - 1;
    let ep = (I * lambda * PI).exp();
    let em = (-I * lambda * PI).exp();
    let mut e = [[ZERO; 2]; 2];
    if let Some((g, q)) = &chains.col1 {
        e[0][0] = ep * g[k];
        e[1][0] = I * em * q[k];
    }
    if let Some((p, h)) = &chains.col2 {
        e[0][1] = -I * ep * p[k];
        e[1][1] = em * h[k];
    }
    for z in e.iter().flatten() {
        crate::ensure_finite(*z, "E(pi, lambda)")?;
    }
    Ok((e, chains.relative_tail * (PI * lambda.im.abs()).exp()))
}

// ---------------------------------------------------------------------------
// Magnus oracle

type M2 = [[C64; 2]; 2];

fn coeff(pot: &Potential, lambda: C64, t: f64) -> M2 {
    [[I * lambda, -I * pot.p(t)], [I * pot.q(t), -I * lambda]]
}

fn mat_mul(a: &M2, b: &M2) -> M2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// `exp` of a traceless 2x2 matrix: `cosh(s) I + sinh(s)/s W`, `s^2 = -det W`.
fn expm_traceless(w: &M2) -> M2 {
    let s2 = w[0][0] * w[0][0] + w[0][1] * w[1][0];
    let (c, sh) = if s2.norm() < 1e-8 {
        // series: cosh = 1 + s2/2 + s2^2/24, sinh(s)/s = 1 + s2/6 + s2^2/120
        (
            ONE + s2 / 2.0 + s2 * s2 / 24.0,
            ONE + s2 / 6.0 + s2 * s2 / 120.0,
        )
    } else {
        let s = s2.sqrt();
        (s.cosh(), s.sinh() / s)
    };
    [
        [c + sh * w[0][0], sh * w[0][1]],
        [sh * w[1][0], c + sh * w[1][1]],
    ]
}

/// Largest Magnus substep used by the oracle at this `lambda`.
pub fn oracle_step(lambda: C64) -> f64 {
    (1e-3f64).min(0.01 / (1.0 + lambda.norm()))
}

/// Oracle substeps near a rough point are at most this fraction of the distance to it.
pub const ORACLE_ROUGH_FRACTION: f64 = 0.02;

fn oracle_local_step(hmax: f64, rough: &[f64], a: f64, b: f64) -> f64 {
    let dist = rough
        .iter()
        .map(|&r| (a - r).abs().min((b - r).abs()))
        .fold(f64::INFINITY, f64::min);
    if dist > 0.0 {
        hmax.min(ORACLE_ROUGH_FRACTION * dist)
    } else {
        // interval touching the rough point: the innermost graded panel, negligible mass
        hmax
    }
}

/// `E(x, lambda)` by marching the system with a fourth order Magnus integrator
/// (two-point Gauss per substep), reported at the nodes of `grid`. Substeps shrink towards
/// the rough points of the potential.
pub fn oracle_solution(pot: &Potential, lambda: C64, grid: &Grid) -> Result<FundamentalSolution> {
    crate::ensure_finite(lambda, "lambda")?;
    let hmax = oracle_step(lambda);
    let rough = pot.rough_points();
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut e = [[ONE, ZERO], [ZERO, ONE]];
    let mut out = vec![e; n];
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    for k in 1..n {
        let (a, b) = (nodes[k - 1], nodes[k]);
        let steps = ((b - a) / oracle_local_step(hmax, rough, a, b)).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        if !(h > 0.0) || h < 1e-300 {
            return Err(Error::StepSizeUnderflow { x: a });
        }
        for j in 0..steps {
            let t = a + j as f64 * h;
            let a1 = coeff(pot, lambda, t + c1 * h);
            let a2 = coeff(pot, lambda, t + c2 * h);
            let comm = {
                let x = mat_mul(&a2, &a1);
                let y = mat_mul(&a1, &a2);
                [[x[0][0] - y[0][0], x[0][1] - y[0][1]], [x[1][0] - y[1][0], x[1][1] - y[1][1]]]
            };
            let mut w = [[ZERO; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    w[r][c] = (a1[r][c] + a2[r][c]) * (h / 2.0) + comm[r][c] * (r3 * h * h / 12.0);
                }
            }
            e = mat_mul(&expm_traceless(&w), &e);
        }
        for z in e.iter().flatten() {
            crate::ensure_finite(*z, "oracle solution")?;
        }
        out[k] = e;
    }
    Ok(FundamentalSolution {
        lambda,
        grid: grid.clone(),
        e11: out.iter().map(|m| m[0][0]).collect(),
        e12: out.iter().map(|m| m[0][1]).collect(),
        e21: out.iter().map(|m| m[1][0]).collect(),
        e22: out.iter().map(|m| m[1][1]).collect(),
        truncation_bound: 0.0,
        terms_used: 0,
    })
}
