//! Hypotheses of the completeness theorem and a numerical completeness probe.
//!
//! The theorem needs `A14 != 0` (cond65) or the order condition cond66 in the upper
//! half-plane, and `A32 != 0` (cond67) or cond68 in the lower one. The probe projects test functions onto the
//! span of the root functions with `|lambda| <= R` for growing `R`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{endpoint_order, EndpointOrder, OrderSource};
use crate::bc::{BcClass, Minors};
use crate::error::{Error, Result};
use crate::potential::Endpoint;
use crate::problem::ProblemSpec;
use crate::quad::Grid;
use crate::spectrum::{self, Rect, RootFunctionChain};
use crate::{transfer, C64};

/// Minors below this fraction of the largest one are zero.
pub const MINOR_ZERO_REL: f64 = 1e-12;
/// cond66 and cond68 hold when their left side exceeds this times `1 + |nu| + |nu'|`.
pub const CONDITION_REL: f64 = 1e-10;
/// Estimated orders closer than this are treated as equal.
pub const RHO_MATCH: f64 = 1e-6;
pub const ILL_CONDITIONED: f64 = 1e12;
const MAX_EIGENVALUES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Holds,
    Fails,
    MissingData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Conclusion {
    CompleteAndMinimal,
    Inconclusive,
}

/// `CompleteAndMinimal` iff `(c65 or c66 holds) and (c67 or c68 holds)`.
pub fn conclude(c65: bool, c66: ConditionStatus, c67: bool, c68: ConditionStatus) -> Conclusion {
    let upper = c65 || c66 == ConditionStatus::Holds;
    let lower = c67 || c68 == ConditionStatus::Holds;
    if upper && lower {
        Conclusion::CompleteAndMinimal
    } else {
        Conclusion::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderEvidence {
    pub which: Endpoint,
    pub order: Option<EndpointOrder>,
    /// Why the order is unavailable.
    pub missing: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremEvidence {
    pub minors: Minors,
    /// Minors divided by the largest `|A_jk|` before the tests.
    pub normalization: f64,
    #[serde(with = "crate::problem::cnum")]
    pub a32: C64,
    #[serde(with = "crate::problem::cnum")]
    pub a42: C64,
    /// Orders for `P` at `pi`, `P` at 0, `Q` at 0 and `Q` at `pi` (the indices 4, 5, 6, 7).
    pub orders: Vec<OrderEvidence>,
    /// Left side of cond66 with normalized minors.
    pub cond66_value: Option<f64>,
    pub cond68_value: Option<f64>,
}

impl TheoremEvidence {
    pub fn order(&self, which: Endpoint) -> Option<&EndpointOrder> {
        self.orders
            .iter()
            .find(|o| o.which == which)
            .and_then(|o| o.order.as_ref())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremVerdict {
    pub class: BcClass,
    pub cond65: bool,
    pub cond66: ConditionStatus,
    pub cond67: bool,
    pub cond68: ConditionStatus,
    pub conclusion: Conclusion,
    pub evidence: TheoremEvidence,
}

/// `(|A13| + |A42|) |rho - rho'| + |-A13 nu + A42 nu'|` and whether it is positive.
fn pair_condition(
    a13: C64,
    a42: C64,
    first: Option<&EndpointOrder>,
    second: Option<&EndpointOrder>,
) -> (ConditionStatus, Option<f64>) {
    let (Some(o1), Some(o2)) = (first, second) else {
        return (ConditionStatus::MissingData, None);
    };
    let mut drho = (o1.rho - o2.rho).abs();
    let estimated = o1.source == OrderSource::Estimated || o2.source == OrderSource::Estimated;
    if estimated && drho <= RHO_MATCH * o1.rho.max(o2.rho) {
        drho = 0.0;
    }
    let value = (a13.norm() + a42.norm()) * drho + (-a13 * o1.nu + a42 * o2.nu).norm();
    let threshold = CONDITION_REL * (1.0 + o1.nu.norm() + o2.nu.norm());
    let status = if value > threshold {
        ConditionStatus::Holds
    } else {
        ConditionStatus::Fails
    };
    (status, Some(value))
}

/// Evaluates the four conditions; problems with endpoint data end up in the verdict.
pub fn check_theorem(spec: &ProblemSpec) -> TheoremVerdict {
    let raw = *spec.bc().minors();
    let scale = raw.max_abs();
    let m = raw.scaled(C64::new(1.0 / scale, 0.0));
    let zero = |z: C64| z.norm() <= MINOR_ZERO_REL;
    let (a32, a42) = (-m.a23, -m.a24);
    let orders: Vec<OrderEvidence> = [Endpoint::PAtPi, Endpoint::PAt0, Endpoint::QAt0, Endpoint::QAtPi]
        .into_iter()
        .map(|which| match endpoint_order(spec.potential(), which) {
            Ok(o) => OrderEvidence {
                which,
                order: Some(o),
                missing: None,
            },
            Err(e) => OrderEvidence {
                which,
                order: None,
                missing: Some(e.to_string()),
            },
        })
        .collect();
    let mut evidence = TheoremEvidence {
        minors: raw,
        normalization: scale,
        a32: -raw.a23,
        a42: -raw.a24,
        orders,
        cond66_value: None,
        cond68_value: None,
    };
    let cond65 = !zero(m.a14);
    let cond67 = !zero(a32);
    let (cond66, v66) = pair_condition(
        m.a13,
        a42,
        evidence.order(Endpoint::PAtPi),
        evidence.order(Endpoint::QAt0),
    );
    let (cond68, v68) = pair_condition(
        m.a13,
        a42,
        evidence.order(Endpoint::PAt0),
        evidence.order(Endpoint::QAtPi),
    );
    evidence.cond66_value = v66;
    evidence.cond68_value = v68;
    TheoremVerdict {
        class: spec.bc().classify(),
        cond65,
        cond66,
        cond67,
        cond68,
        conclusion: conclude(cond65, cond66, cond67, cond68),
        evidence,
    }
}

// ---------------------------------------------------------------------------
// diagnostic

type VectorFn = dyn Fn(f64) -> (C64, C64) + Send + Sync;

/// An element `(f1, f2)` of `L2 + L2` on `[0, pi]`.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    f: Arc<VectorFn>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("id", &self.id).finish()
    }
}

impl TestFunction {
    pub fn new<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> (C64, C64) + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> (C64, C64) {
        (self.f)(x)
    }

    /// `(1, 0)`, `(0, 1)`, `(sin x, cos x)` and `(x, pi - x)`.
    pub fn defaults() -> Vec<TestFunction> {
        let re = |v: f64| C64::new(v, 0.0);
        vec![
            TestFunction::new("(1,0)", move |_| (re(1.0), re(0.0))),
            TestFunction::new("(0,1)", move |_| (re(0.0), re(1.0))),
            TestFunction::new("(sin x,cos x)", move |x| (re(x.sin()), re(x.cos()))),
            TestFunction::new("(x,pi-x)", move |x| (re(x), re(PI - x))),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletenessDiagnostic {
    pub test_function: String,
    pub radii: Vec<f64>,
    /// Number of root functions used for each radius.
    pub root_functions: Vec<usize>,
    /// `||f - P_R f|| / ||f||` with `P_R` the orthogonal projection on the span.
    pub residuals: Vec<f64>,
    /// Condition number of the Gram matrix of the normalized root functions
    /// (`None` when the span is empty).
    pub gram_condition: Vec<Option<f64>>,
    pub ill_conditioned: Vec<bool>,
}

impl CompletenessDiagnostic {
    /// `IllConditionedGram` when any Gram matrix is worse than `1e12`.
    pub fn check_conditioning(&self) -> Result<()> {
        for (r, c) in self.radii.iter().zip(&self.gram_condition) {
            if let Some(c) = c {
                if *c > ILL_CONDITIONED {
                    return Err(Error::IllConditionedGram {
                        radius: *r,
                        condition: *c,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The root functions of all eigenvalues with `|lambda| <= r_max`, on one grid.
pub struct RootSystem {
    pub grid: Grid,
    pub chains: Vec<RootFunctionChain>,
}

impl RootSystem {
    pub fn compute(spec: &ProblemSpec, r_max: f64) -> Result<Self> {
        let rect = Rect::square(r_max)?;
        let evs = spectrum::find_eigenvalues(spec, &rect, MAX_EIGENVALUES).map_err(|e| match e {
            Error::DegenerateDeterminantSuspected { .. } | Error::BoundaryZero { .. } => {
                Error::SpectrumUnavailable(e.to_string())
            }
            other => other,
        })?;
        let evs: Vec<_> = evs.into_iter().filter(|e| e.lambda.norm() <= r_max).collect();
        let top = evs.iter().fold(C64::new(r_max, 0.0), |acc, e| {
            C64::new(acc.re.max(e.lambda.re.abs()), acc.im.max(e.lambda.im.abs()))
        });
        let grid = transfer::solution_grid(spec.potential(), spec.grid_size(), top)?;
        let chains = evs
            .par_iter()
            .map(|ev| spectrum::root_functions_on_grid(spec, ev, &grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, chains })
    }

    /// Columns `sqrt(w) (y1; y2)` with the modulus of their eigenvalue.
    fn columns(&self) -> Vec<(f64, DVector<C64>)> {
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        let mut out = Vec::new();
        for c in &self.chains {
            for rf in &c.chain {
                out.push((c.eigenvalue.lambda.norm(), weighted(&sw, &rf.y1, &rf.y2)));
            }
        }
        out
    }
}

fn weighted(sw: &[f64], y1: &[C64], y2: &[C64]) -> DVector<C64> {
    let n = sw.len();
    DVector::from_fn(2 * n, |k, _| if k < n { y1[k] * sw[k] } else { y2[k - n] * sw[k - n] })
}

/// Relative projection residual of `b` on the span of the columns of `a` and the Gram condition.
fn project(a: &DMatrix<C64>, b: &DVector<C64>) -> (f64, Option<f64>) {
    let bn = b.norm();
    if a.ncols() == 0 {
        return (if bn > 0.0 { 1.0 } else { 0.0 }, None);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let tol = smax * 1e-14 * (a.nrows() as f64).sqrt();
    let mut proj = DVector::<C64>::zeros(b.len());
    for (k, &sk) in s.iter().enumerate() {
        if sk > tol {
            let uk = u.column(k);
            proj += uk * uk.dotc(b);
        }
    }
    let residual = if bn > 0.0 { (b - proj).norm() / bn } else { 0.0 };
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    (residual, Some(cond))
}

/// Residuals of the best approximations of each test function by root functions with
/// `|lambda| <= R`, for increasing `R`.
pub fn completeness_diagnostic(
    spec: &ProblemSpec,
    tests: &[TestFunction],
    radii: &[f64],
) -> Result<Vec<CompletenessDiagnostic>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and increasing".into()));
    }
    let system = RootSystem::compute(spec, *radii.last().unwrap())?;
    Ok(diagnose(&system, tests, radii))
}

/// As [`completeness_diagnostic`] on a precomputed root system.
pub fn diagnose(system: &RootSystem, tests: &[TestFunction], radii: &[f64]) -> Vec<CompletenessDiagnostic> {
    let cols = system.columns();
    let sw: Vec<f64> = system.grid.weights().iter().map(|w| w.sqrt()).collect();
    let nodes = system.grid.nodes();
    let spans: Vec<DMatrix<C64>> = radii
        .iter()
        .map(|&r| {
            let used: Vec<&DVector<C64>> = cols.iter().filter(|(m, _)| *m <= r).map(|(_, c)| c).collect();
            if used.is_empty() {
                DMatrix::zeros(2 * nodes.len(), 0)
            } else {
                DMatrix::from_columns(&used.iter().map(|c| (*c).clone()).collect::<Vec<_>>())
            }
        })
        .collect();
    tests
        .par_iter()
        .map(|t| {
            let (f1, f2): (Vec<C64>, Vec<C64>) = nodes.iter().map(|&x| t.eval(x)).unzip();
            let b = weighted(&sw, &f1, &f2);
            let mut d = CompletenessDiagnostic {
                test_function: t.id.clone(),
                radii: radii.to_vec(),
                root_functions: Vec::new(),
                residuals: Vec::new(),
                gram_condition: Vec::new(),
                ill_conditioned: Vec::new(),
            };
            for a in &spans {
                let (res, cond) = project(a, &b);
                d.root_functions.push(a.ncols());
                d.residuals.push(res);
                d.ill_conditioned.push(cond.is_some_and(|c| c > ILL_CONDITIONED));
                d.gram_condition.push(cond);
            }
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BoundaryMatrix;
    use crate::potential::Potential;
    use ConditionStatus::*;

    fn spec(p: &str, q: &str, bc: [[f64; 4]; 2]) -> ProblemSpec {
        ProblemSpec::with_defaults(
            Potential::from_exprs(p, q).unwrap(),
            BoundaryMatrix::from_real(bc).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn truth_table() {
        let statuses = [Holds, Fails, MissingData];
        for c65 in [false, true] {
            for c67 in [false, true] {
                for c66 in statuses {
                    for c68 in statuses {
                        let expect = (c65 || c66 == Holds) && (c67 || c68 == Holds);
                        let got = conclude(c65, c66, c67, c68) == Conclusion::CompleteAndMinimal;
                        assert_eq!(got, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn worked_examples() {
        let v = check_theorem(&spec("1", "1", [[1., 0., 0., 0.], [0., 1., 1., 0.]]));
        assert_eq!((v.cond65, v.cond66, v.cond67, v.cond68), (false, Holds, false, Holds));
        assert!((v.evidence.cond66_value.unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(v.conclusion, Conclusion::CompleteAndMinimal);

        let v = check_theorem(&spec("1", "1", [[1., 0., 1., 0.], [0., 1., 0., 0.]]));
        assert!(v.cond67 && !v.cond65);
        assert_eq!(v.cond66, Fails);
        assert_eq!(v.conclusion, Conclusion::Inconclusive);

        let v = check_theorem(&spec("0", "0", [[1., 0., -1., 0.], [0., 1., 0., -1.]]));
        assert!(v.cond65 && v.cond67);
        assert_eq!(v.cond66, MissingData);
        assert_eq!(v.conclusion, Conclusion::CompleteAndMinimal);
    }

    #[test]
    fn scaling_rows_keeps_verdict() {
        let s = spec("1", "x", [[1., 0., 0., 2.], [0., 1., 1., 0.]]);
        let v = check_theorem(&s);
        let t = s.with_bc(BoundaryMatrix::from_real([[3., 0., 0., 6.], [0., -0.5, -0.5, 0.]]).unwrap());
        let w = check_theorem(&t);
        assert_eq!((v.cond65, v.cond66, v.cond67, v.cond68), (w.cond65, w.cond66, w.cond67, w.cond68));
    }

    #[test]
    fn periodic_constant_is_an_eigenfunction() {
        let s = spec("0", "0", [[1., 0., -1., 0.], [0., 1., 0., -1.]]);
        let d = completeness_diagnostic(&s, &TestFunction::defaults()[..1], &[1.0, 3.0]).unwrap();
        assert!(d[0].residuals.iter().all(|r| *r < 1e-8), "{d:?}");
    }

    #[test]
    fn degenerate_zero_determinant_is_unavailable() {
        let s = spec("0", "0", [[1., 0., 0., 0.], [0., 0., 1., 0.]]);
        let e = completeness_diagnostic(&s, &TestFunction::defaults(), &[5.0]).unwrap_err();
        assert!(matches!(e, Error::SpectrumUnavailable(_)), "{e}");
    }

    #[test]
    fn radii_must_increase() {
        let s = spec("0", "0", [[1., 0., -1., 0.], [0., 1., 0., -1.]]);
        assert!(completeness_diagnostic(&s, &TestFunction::defaults(), &[3.0, 1.0]).is_err());
    }
}
