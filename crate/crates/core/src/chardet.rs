//! Characteristic determinant
//!
//! ```text
//! Delta(l)  = A12 + A34 - A23 e11(pi, l) + A14 e22(pi, l) + A13 e12(pi, l) - A24 e21(pi, l)
//! Delta0(l) = A12 + A34 - A23 e^{i pi l} + A14 e^{-i pi l}
//! ```
//!
//! Derivatives in `lambda` come from the discrete Cauchy integral over a small circle.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bc::{BoundaryMatrix, Minors};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::quad::Grid;
use crate::transfer::{self, SeriesOptions};
use crate::{C64, I};

/// Radius of the derivative stencil.
pub const STENCIL_RADIUS: f64 = 0.05;
/// Number of points on the derivative stencil.
pub const STENCIL_POINTS: usize = 12;
pub const MAX_DERIVATIVE_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantSample {
    #[serde(with = "crate::problem::cnum")]
    pub lambda: C64,
    #[serde(with = "crate::problem::cnum")]
    pub delta: C64,
    #[serde(with = "crate::problem::cnum")]
    pub delta0: C64,
    pub error_bound: f64,
}

pub fn delta0(bc: &BoundaryMatrix, lambda: C64) -> C64 {
    let m = bc.minors();
    m.a12 + m.a34 - m.a23 * (I * PI * lambda).exp() + m.a14 * (-I * PI * lambda).exp()
}

/// Analytic `d^k/dl^k Delta0`.
pub fn delta0_derivative(bc: &BoundaryMatrix, lambda: C64, order: usize) -> C64 {
    if order == 0 {
        return delta0(bc, lambda);
    }
    let m = bc.minors();
    let k = order as i32;
    -m.a23 * (I * PI).powi(k) * (I * PI * lambda).exp()
        + m.a14 * (-I * PI).powi(k) * (-I * PI * lambda).exp()
}

/// Combines `E(pi, lambda)` with the minors.
pub fn delta_from_end(m: &Minors, e: &[[C64; 2]; 2]) -> C64 {
    m.a12 + m.a34 - m.a23 * e[0][0] + m.a14 * e[1][1] + m.a13 * e[0][1] - m.a24 * e[1][0]
}

/// Which columns of `E` the determinant depends on.
pub fn needed_columns(m: &Minors) -> [bool; 2] {
    let nz = |z: C64| z != C64::new(0.0, 0.0);
    [nz(m.a23) || nz(m.a24), nz(m.a14) || nz(m.a13)]
}

/// `|A12 + A34| + (|A23| + |A14| + |A13| + |A24|) e^{pi |Im l|}`, the natural size of `Delta`.
pub fn delta_scale(bc: &BoundaryMatrix, lambda: C64) -> f64 {
    let m = bc.minors();
    (m.a12 + m.a34).norm() + exp_weight(m) * (PI * lambda.im.abs()).exp()
}

fn exp_weight(m: &Minors) -> f64 {
    m.a23.norm() + m.a14.norm() + m.a13.norm() + m.a24.norm()
}

pub fn delta(spec: &ProblemSpec, lambda: C64) -> Result<DeterminantSample> {
    let m = spec.bc().minors();
    let (e, bound) = transfer::end_values(spec, lambda, needed_columns(m))?;
    let d = crate::ensure_finite(delta_from_end(m, &e), "Delta")?;
    Ok(DeterminantSample {
        lambda,
        delta: d,
        delta0: delta0(spec.bc(), lambda),
        error_bound: exp_weight(m) * bound,
    })
}

/// `Delta(lambda)` computed on a prescribed grid (all columns).
pub fn delta_on_grid(spec: &ProblemSpec, lambda: C64, grid: &Grid) -> Result<C64> {
    let e = transfer::fundamental_solution(
        spec.potential(),
        lambda,
        grid,
        &SeriesOptions::from_spec(spec),
    )?;
    Ok(delta_from_end(spec.bc().minors(), &e.at_end()))
}

/// Points `center + r w^j`, `w = e^{2 pi i / n}`.
pub fn circle_points(center: C64, radius: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|j| center + C64::from_polar(radius, 2.0 * PI * j as f64 / n as f64))
        .collect()
}

/// Derivatives of orders `0..=max_order` from samples on `circle_points(_, radius, n)`.
/// Each sample may be a vector; derivatives are taken componentwise.
pub fn circle_derivatives(values: &[Vec<C64>], radius: f64, max_order: usize) -> Vec<Vec<C64>> {
    let n = values.len();
    let len = values.first().map_or(0, |v| v.len());
    let mut out = vec![vec![C64::new(0.0, 0.0); len]; max_order + 1];
    let mut fact = 1.0;
    for (k, o) in out.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        let scale = fact / (n as f64 * radius.powi(k as i32));
        for (j, v) in values.iter().enumerate() {
            let w = C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64) * scale;
            for (acc, z) in o.iter_mut().zip(v) {
                *acc += z * w;
            }
        }
    }
    out
}

/// Grid shared by every point of a stencil around `lambda`.
pub fn stencil_grid(spec: &ProblemSpec, lambda: C64, radius: f64) -> Result<Grid> {
    let far = C64::new(lambda.re.abs() + radius, lambda.im.abs() + radius);
    transfer::solution_grid(spec.potential(), spec.grid_size(), far)
}

/// `d^k Delta / d lambda^k` for `1 <= k <= 4`.
pub fn delta_derivative(spec: &ProblemSpec, lambda: C64, order: usize) -> Result<C64> {
    Ok(delta_derivatives(spec, lambda, order)?[order])
}

/// `Delta` and its derivatives up to `max_order`, all on one grid.
pub fn delta_derivatives(spec: &ProblemSpec, lambda: C64, max_order: usize) -> Result<Vec<C64>> {
    if max_order == 0 || max_order > MAX_DERIVATIVE_ORDER {
        return Err(Error::InvalidInput(format!(
            "derivative order must be in 1..={MAX_DERIVATIVE_ORDER}"
        )));
    }
    let grid = stencil_grid(spec, lambda, STENCIL_RADIUS)?;
    let values = circle_points(lambda, STENCIL_RADIUS, STENCIL_POINTS)
        .into_iter()
        .map(|z| delta_on_grid(spec, z, &grid).map(|d| vec![d]))
        .collect::<Result<Vec<_>>>()?;
    let mut d: Vec<C64> = circle_derivatives(&values, STENCIL_RADIUS, max_order)
        .into_iter()
        .map(|v| v[0])
        .collect();
    d[0] = delta_on_grid(spec, lambda, &grid)?;
    Ok(d)
}
