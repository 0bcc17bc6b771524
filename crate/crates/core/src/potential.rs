//! Potentials `P, Q` in `L1(0, pi)` and their declared endpoint behaviour.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::integrate_adaptive;
use crate::C64;

pub type ScalarFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Which cumulative integral an endpoint order refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// `int_0^h P`
    #[serde(rename = "P_at_0")]
    PAt0,
    /// `int_{pi-h}^pi P`
    #[serde(rename = "P_at_pi")]
    PAtPi,
    /// `int_0^h Q`
    #[serde(rename = "Q_at_0")]
    QAt0,
    /// `int_{pi-h}^pi Q`
    #[serde(rename = "Q_at_pi")]
    QAtPi,
}

impl Endpoint {
    pub const ALL: [Endpoint; 4] = [
        Endpoint::PAtPi,
        Endpoint::PAt0,
        Endpoint::QAt0,
        Endpoint::QAtPi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::PAt0 => "P_at_0",
            Endpoint::PAtPi => "P_at_pi",
            Endpoint::QAt0 => "Q_at_0",
            Endpoint::QAtPi => "Q_at_pi",
        }
    }

    pub fn at_zero(self) -> bool {
        matches!(self, Endpoint::PAt0 | Endpoint::QAt0)
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `lim_{h->0} (cumulative integral over a window of length h) / h^rho = nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointRecord {
    pub rho: f64,
    #[serde(with = "crate::problem::cnum")]
    pub nu: C64,
}

impl EndpointRecord {
    pub fn new(rho: f64, nu: C64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("endpoint order rho = {rho} must be > 0")));
        }
        if nu.norm() == 0.0 || !nu.re.is_finite() || !nu.im.is_finite() {
            return Err(Error::InvalidInput("endpoint prefactor nu must be nonzero".into()));
        }
        Ok(Self { rho, nu })
    }
}

/// Optional endpoint records; the four slots hold `(rho4, nu4)` for `P` at `pi`,
/// `(rho5, nu5)` for `P` at 0, `(rho6, nu6)` for `Q` at 0 and `(rho7, nu7)` for `Q` at `pi`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointData {
    #[serde(rename = "P_at_pi", default, skip_serializing_if = "Option::is_none")]
    pub p_at_pi: Option<EndpointRecord>,
    #[serde(rename = "P_at_0", default, skip_serializing_if = "Option::is_none")]
    pub p_at_0: Option<EndpointRecord>,
    #[serde(rename = "Q_at_0", default, skip_serializing_if = "Option::is_none")]
    pub q_at_0: Option<EndpointRecord>,
    #[serde(rename = "Q_at_pi", default, skip_serializing_if = "Option::is_none")]
    pub q_at_pi: Option<EndpointRecord>,
}

impl EndpointData {
    pub fn get(&self, which: Endpoint) -> Option<EndpointRecord> {
        match which {
            Endpoint::PAt0 => self.p_at_0,
            Endpoint::PAtPi => self.p_at_pi,
            Endpoint::QAt0 => self.q_at_0,
            Endpoint::QAtPi => self.q_at_pi,
        }
    }

    pub fn set(&mut self, which: Endpoint, rec: Option<EndpointRecord>) {
        match which {
            Endpoint::PAt0 => self.p_at_0 = rec,
            Endpoint::PAtPi => self.p_at_pi = rec,
            Endpoint::QAt0 => self.q_at_0 = rec,
            Endpoint::QAtPi => self.q_at_pi = rec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in Endpoint::ALL {
            if let Some(r) = self.get(w) {
                EndpointRecord::new(r.rho, r.nu)?;
            }
        }
        Ok(())
    }
}

/// Piecewise-linear potential through samples on `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    pub x: Vec<f64>,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
}

impl SampledPotential {
    pub fn new(x: Vec<f64>, p: Vec<C64>, q: Vec<C64>) -> Result<Self> {
        if x.len() < 2 || x.len() != p.len() || x.len() != q.len() {
            return Err(Error::InvalidInput(
                "sampled potential needs equally long x, P, Q with at least two points".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sample grid must be strictly increasing".into()));
        }
        let tol = 1e-12;
        if x[0].abs() > tol || (x[x.len() - 1] - PI).abs() > tol {
            return Err(Error::InvalidInput("sample grid must start at 0 and end at pi".into()));
        }
        for z in p.iter().chain(&q) {
            crate::ensure_finite(*z, "potential sample")?;
        }
        Ok(Self { x, p, q })
    }

    fn interp(&self, v: &[C64], t: f64) -> C64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return v[0];
        }
        if t >= self.x[n - 1] {
            return v[n - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= t) - 1;
        let s = (t - self.x[k]) / (self.x[k + 1] - self.x[k]);
        v[k] * (1.0 - s) + v[k + 1] * s
    }
}

#[derive(Clone)]
pub enum PotentialKind {
    Expr { p: Expr, q: Expr },
    Sampled(SampledPotential),
    /// Arbitrary Rust closures; cannot be written to a problem file.
    Function { p: ScalarFn, q: ScalarFn },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Expr { p, q } => write!(f, "Expr {{ P: {:?}, Q: {:?} }}", p.source(), q.source()),
            PotentialKind::Sampled(s) => write!(f, "Sampled({} points)", s.x.len()),
            PotentialKind::Function { .. } => f.write_str("Function"),
        }
    }
}

/// The off-diagonal entries `P, Q` of the potential matrix.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    endpoint_data: EndpointData,
    /// Points of `[0, pi]` where a closed form may be non-smooth or singular.
    rough: Vec<f64>,
}

impl Potential {
    pub fn zero() -> Self {
        Self::from_exprs("0", "0").expect("constant expression")
    }

    pub fn from_exprs(p: &str, q: &str) -> Result<Self> {
        let (p, q) = (Expr::parse(p)?, Expr::parse(q)?);
        let mut rough = p.rough_points(0.0, PI);
        rough.extend(q.rough_points(0.0, PI));
        rough.sort_by(f64::total_cmp);
        rough.dedup();
        Ok(Self {
            kind: PotentialKind::Expr { p, q },
            endpoint_data: EndpointData::default(),
            rough,
        })
    }

    pub fn from_samples(x: Vec<f64>, p: Vec<C64>, q: Vec<C64>) -> Result<Self> {
        Ok(Self {
            kind: PotentialKind::Sampled(SampledPotential::new(x, p, q)?),
            endpoint_data: EndpointData::default(),
            rough: Vec::new(),
        })
    }

    pub fn from_fns<F, G>(p: F, q: G) -> Self
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
        G: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Function {
                p: Arc::new(p),
                q: Arc::new(q),
            },
            endpoint_data: EndpointData::default(),
            rough: Vec::new(),
        }
    }

    pub fn with_endpoint_data(mut self, data: EndpointData) -> Result<Self> {
        data.validate()?;
        self.endpoint_data = data;
        Ok(self)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn endpoint_data(&self) -> &EndpointData {
        &self.endpoint_data
    }

    pub fn p(&self, x: f64) -> C64 {
        match &self.kind {
            PotentialKind::Expr { p, .. } => p.eval(x),
            PotentialKind::Sampled(s) => s.interp(&s.p, x),
            PotentialKind::Function { p, .. } => p(x),
        }
    }

    pub fn q(&self, x: f64) -> C64 {
        match &self.kind {
            PotentialKind::Expr { q, .. } => q.eval(x),
            PotentialKind::Sampled(s) => s.interp(&s.q, x),
            PotentialKind::Function { q, .. } => q(x),
        }
    }

    /// The same potential with `P` and `Q` exchanged (endpoint records follow along).
    pub fn swapped(&self) -> Self {
        let kind = match &self.kind {
            PotentialKind::Expr { p, q } => PotentialKind::Expr {
                p: q.clone(),
                q: p.clone(),
            },
            PotentialKind::Sampled(s) => PotentialKind::Sampled(SampledPotential {
                x: s.x.clone(),
                p: s.q.clone(),
                q: s.p.clone(),
            }),
            PotentialKind::Function { p, q } => PotentialKind::Function {
                p: q.clone(),
                q: p.clone(),
            },
        };
        let e = &self.endpoint_data;
        Self {
            kind,
            endpoint_data: EndpointData {
                p_at_pi: e.q_at_pi,
                p_at_0: e.q_at_0,
                q_at_0: e.p_at_0,
                q_at_pi: e.p_at_pi,
            },
            rough: self.rough.clone(),
        }
    }

    /// Interior points where the potential may have kinks (sample locations, or rough points
    /// of a closed form).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::Sampled(s) => s.x[1..s.x.len() - 1].to_vec(),
            _ => self.rough.iter().copied().filter(|&x| x > 0.0 && x < PI).collect(),
        }
    }

    /// Points of `[0, pi]`, ends included, where a closed-form potential is not smooth.
    pub fn rough_points(&self) -> &[f64] {
        &self.rough
    }

    /// `int_a^b f` for `f = P` or `f = Q`, split at breakpoints.
    pub fn integrate_component(&self, use_p: bool, a: f64, b: f64, limit: usize) -> Result<C64> {
        self.integrate_with(|x| if use_p { self.p(x) } else { self.q(x) }, a, b, limit)
    }

    pub(crate) fn integrate_with<F: Fn(f64) -> C64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        limit: usize,
    ) -> Result<C64> {
        self.integrate_with_tol(f, a, b, 1e-15, 1e-11, limit)
    }

    pub(crate) fn integrate_with_tol<F: Fn(f64) -> C64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        abs_tol: f64,
        rel_tol: f64,
        limit: usize,
    ) -> Result<C64> {
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        cuts.push(b);
        let mut total = C64::new(0.0, 0.0);
        for w in cuts.windows(2) {
            total += integrate_adaptive(&f, w[0], w[1], abs_tol, rel_tol, limit)?.value;
        }
        Ok(total)
    }
}

/// `(int_0^pi |P|, int_0^pi |Q|)` by adaptive quadrature.
pub fn integral_l1_norms(p: &Potential, limit: usize) -> Result<(f64, f64)> {
    let a = p.integrate_with(|x| C64::new(p.p(x).norm(), 0.0), 0.0, PI, limit)?;
    let b = p.integrate_with(|x| C64::new(p.q(x).norm(), 0.0), 0.0, PI, limit)?;
    Ok((a.re, b.re))
}
