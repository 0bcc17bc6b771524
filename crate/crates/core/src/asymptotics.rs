//! Endpoint orders of the potential, the kernel integrals
//!
//! ```text
//! int_0^inf x^rho e^{ 2 i l x} dx   (Im l > 0)
//! int_0^inf x^rho e^{-2 i l x} dx   (Im l < 0)
//! ```
//!
//! and trend checks of the sector asymptotics of `E(pi, lambda)` and of the lower bound
//! on `|Delta|`. Limits are tested as decay along finite rays.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::chardet;
use crate::completeness::{self, ConditionStatus};
use crate::error::{Error, Result};
use crate::potential::{Endpoint, Potential};
use crate::problem::ProblemSpec;
use crate::transfer::{self, Family, SeriesOptions};
use crate::{C64, I};

pub const DEFAULT_EPSILON: f64 = PI / 20.0;
/// Window exponents `k` in `h = 2^-k` for the power-law fit.
pub const FIT_LEVELS: std::ops::RangeInclusive<i32> = 4..=12;
pub const MIN_FIT_QUALITY: f64 = 0.99;
pub const ZERO_MASS: f64 = 1e-14;
const FIT_QUAD_LIMIT: usize = 4000;
/// Relative size below which `|actual - leading|` is indistinguishable from rounding.
const NOISE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfPlane {
    Upper,
    Lower,
}

impl HalfPlane {
    pub fn of(lambda: C64) -> Option<Self> {
        if lambda.im > 0.0 {
            Some(HalfPlane::Upper)
        } else if lambda.im < 0.0 {
            Some(HalfPlane::Lower)
        } else {
            None
        }
    }
}

/// `int_0^inf x^rho e^{2 i l x} dx` in the upper half-plane, `int_0^inf x^rho e^{-2 i l x} dx`
/// in the lower one. Both equal `Gamma(rho+1) / (2|l|)^{rho+1} e^{i (rho+1) atan(Re l / Im l)}`.
pub fn kernel_integral(rho: f64, lambda: C64, half: HalfPlane) -> Result<C64> {
    if !(rho > -1.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("kernel exponent {rho} must exceed -1")));
    }
    if HalfPlane::of(lambda) != Some(half) {
        return Err(Error::WrongHalfPlane {
            lambda: lambda.to_string(),
        });
    }
    let e = rho + 1.0;
    let modulus = gamma(e) / (2.0 * lambda.norm()).powf(e);
    let phase = e * (lambda.re / lambda.im).atan();
    crate::ensure_finite(C64::from_polar(modulus, phase), "kernel integral")
}

/// `max_{0 <= x <= pi} x^rho e^{-l x} = (rho / l)^rho e^{-rho}` for `0 < rho <= pi l`.
pub fn power_exp_max(rho: f64, lam: f64) -> Result<f64> {
    if !(rho > 0.0 && lam > 0.0 && rho <= PI * lam) {
        return Err(Error::InvalidInput(format!(
            "need 0 < rho <= pi lambda, got rho = {rho}, lambda = {lam}"
        )));
    }
    Ok((rho / lam).powf(rho) * (-rho).exp())
}

// ---------------------------------------------------------------------------
// endpoint orders

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSource {
    Declared,
    Estimated,
}

/// `int over a window of length h at the endpoint ~ nu h^rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointOrder {
    pub which: Endpoint,
    pub rho: f64,
    #[serde(with = "crate::problem::cnum")]
    pub nu: C64,
    /// `R^2` of the log-log fit (1 for declared data).
    pub fit_quality: f64,
    pub source: OrderSource,
}

fn window_integral(p: &Potential, which: Endpoint, h: f64) -> Result<C64> {
    let use_p = matches!(which, Endpoint::PAt0 | Endpoint::PAtPi);
    let (a, b) = if which.at_zero() { (0.0, h) } else { (PI - h, PI) };
    let f = |x: f64| if use_p { p.p(x) } else { p.q(x) };
    p.integrate_with_tol(f, a, b, 1e-30, 1e-12, FIT_QUAD_LIMIT)
}

/// Least-squares fit of `log |int_window| = log |nu| + rho log h`.
pub fn estimate_endpoint_order(p: &Potential, which: Endpoint) -> Result<EndpointOrder> {
    let mut hs = Vec::new();
    let mut vals = Vec::new();
    for k in FIT_LEVELS {
        let h = 2f64.powi(-k);
        hs.push(h);
        vals.push(window_integral(p, which, h)?);
    }
    if vals.iter().all(|v| v.norm() < ZERO_MASS) {
        return Err(Error::ZeroMass {
            which: which.name().into(),
        });
    }
    let no_fit = |quality: f64| Error::NoPowerLaw {
        which: which.name().into(),
        quality,
    };
    if vals.iter().any(|v| v.norm() == 0.0) {
        return Err(no_fit(0.0));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.norm().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let rho = sxy / sxx;
    let intercept = my - rho * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - rho * x).powi(2))
        .sum();
    let quality = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    if quality < MIN_FIT_QUALITY || !(rho > 0.0) {
        return Err(no_fit(quality));
    }
    // geometric mean of int / h^rho, phases unwrapped along the sequence
    let mut phase = vals[0].arg();
    let mut phase_sum = phase;
    for w in vals.windows(2) {
        phase += (w[1] / w[0]).arg();
        phase_sum += phase;
    }
    let nu = C64::from_polar(intercept.exp(), phase_sum / n);
    Ok(EndpointOrder {
        which,
        rho,
        nu,
        fit_quality: quality,
        source: OrderSource::Estimated,
    })
}

/// Declared data wins; otherwise the order is estimated. A declared `rho` that differs from
/// the estimate by more than 10% is logged.
pub fn endpoint_order(p: &Potential, which: Endpoint) -> Result<EndpointOrder> {
    let estimate = estimate_endpoint_order(p, which);
    if let Some(rec) = p.endpoint_data().get(which) {
        if let Ok(e) = &estimate {
            if (e.rho - rec.rho).abs() > 0.1 * rec.rho {
                log::warn!(
                    "{}: declared rho = {} but the data suggest {:.4}",
                    which.name(),
                    rec.rho,
                    e.rho
                );
            }
        }
        return Ok(EndpointOrder {
            which,
            rho: rec.rho,
            nu: rec.nu,
            fit_quality: 1.0,
            source: OrderSource::Declared,
        });
    }
    estimate.map_err(|e| match e {
        Error::ZeroMass { which } => {
            Error::MissingEndpointData(format!("{which}: no declared order and no mass near the endpoint"))
        }
        other => other,
    })
}

// ---------------------------------------------------------------------------
// sectors

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sector {
    pub half: HalfPlane,
    pub epsilon: f64,
}

impl Sector {
    pub fn new(half: HalfPlane, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < PI / 10.0) {
            return Err(Error::InvalidInput(format!(
                "sector epsilon {epsilon} must lie in (0, pi/10)"
            )));
        }
        Ok(Self { half, epsilon })
    }

    pub fn upper() -> Self {
        Self {
            half: HalfPlane::Upper,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn lower() -> Self {
        Self {
            half: HalfPlane::Lower,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// `eps <= arg l <= pi - eps` (upper) or `-pi + eps <= arg l <= -eps` (lower).
    pub fn contains(&self, lambda: C64) -> bool {
        if lambda.norm() == 0.0 {
            return false;
        }
        let a = lambda.arg();
        match self.half {
            HalfPlane::Upper => a >= self.epsilon && a <= PI - self.epsilon,
            HalfPlane::Lower => a <= -self.epsilon && a >= -PI + self.epsilon,
        }
    }
}

/// Points `r e^{i arg}`.
pub fn ray(arg: f64, radii: &[f64]) -> Vec<C64> {
    radii.iter().map(|&r| C64::from_polar(r, arg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma {
    /// `P` at `pi`, upper sector.
    Four,
    /// `P` at 0, lower sector.
    Five,
    /// `Q` at 0, upper sector.
    Six,
    /// `Q` at `pi`, lower sector.
    Seven,
}

impl Lemma {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Lemma::Four),
            5 => Ok(Lemma::Five),
            6 => Ok(Lemma::Six),
            7 => Ok(Lemma::Seven),
            _ => Err(Error::InvalidInput(format!("no sector lemma {n}; expected 4..=7"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Lemma::Four => 4,
            Lemma::Five => 5,
            Lemma::Six => 6,
            Lemma::Seven => 7,
        }
    }

    pub fn endpoint(self) -> Endpoint {
        match self {
            Lemma::Four => Endpoint::PAtPi,
            Lemma::Five => Endpoint::PAt0,
            Lemma::Six => Endpoint::QAt0,
            Lemma::Seven => Endpoint::QAtPi,
        }
    }

    pub fn sector(self) -> Sector {
        match self {
            Lemma::Four | Lemma::Six => Sector::upper(),
            Lemma::Five | Lemma::Seven => Sector::lower(),
        }
    }

    /// Entries with an explicit leading term, then entries that are remainder only.
    fn entries(self) -> (&'static [Entry], &'static [Entry]) {
        match self {
            Lemma::Four => (&[Entry::P0Tilde, Entry::E12], &[Entry::E11]),
            Lemma::Five => (&[Entry::P0Tilde, Entry::E12], &[]),
            Lemma::Six => (&[Entry::Q0Tilde, Entry::E21], &[]),
            Lemma::Seven => (&[Entry::Q0Tilde, Entry::E21], &[Entry::E22]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    E11,
    E12,
    E21,
    E22,
    P0Tilde,
    Q0Tilde,
}

impl Entry {
    pub fn name(self) -> &'static str {
        match self {
            Entry::E11 => "e11",
            Entry::E12 => "e12",
            Entry::E21 => "e21",
            Entry::E22 => "e22",
            Entry::P0Tilde => "p0_tilde",
            Entry::Q0Tilde => "q0_tilde",
        }
    }
}

/// Leading behaviour of one entry at `x = pi` in a sector, with a remainder of order
/// `e^{pi |Im l|} o(1) / |Im l|^rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorPrediction {
    pub lemma: Option<Lemma>,
    pub entry: Entry,
    pub sector: Sector,
    /// The `rho` of the remainder.
    pub error_order: f64,
    /// `None` when only the remainder bound is claimed.
    #[serde(with = "opt_cnum")]
    pub nu: Option<C64>,
}

mod opt_cnum {
    use super::C64;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        match z {
            Some(z) => s.serialize_some(&[z.re, z.im]),
            None => s.serialize_none(),
        }
    }
}

impl SectorPrediction {
    /// A prediction that the entry itself is of remainder size.
    pub fn remainder_only(entry: Entry, sector: Sector, rho: f64) -> Self {
        Self {
            lemma: None,
            entry,
            sector,
            error_order: rho,
            nu: None,
        }
    }

    /// Same prediction with a different `nu` in the leading term.
    pub fn with_nu(mut self, nu: C64) -> Self {
        if self.nu.is_some() {
            self.nu = Some(nu);
        }
        self
    }

    /// The explicit leading term (zero for remainder-only predictions).
    pub fn leading(&self, lambda: C64) -> Result<C64> {
        let (Some(nu), Some(lemma)) = (self.nu, self.lemma) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let rho = self.error_order;
        // nu lambda e^{-+i pi l} Gamma(rho+1) / (2^rho |l|^{rho+1}) e^{i (rho+1) atan(Re l / Im l)}
        let k = 2.0 * kernel_integral(rho, lambda, self.sector.half)?;
        let (sign, exp) = match lemma {
            Lemma::Four => (-1.0, (-I * PI * lambda).exp()),
            Lemma::Five => (1.0, (I * PI * lambda).exp()),
            Lemma::Six => (1.0, (-I * PI * lambda).exp()),
            Lemma::Seven => (-1.0, (I * PI * lambda).exp()),
        };
        Ok(sign * nu * lambda * exp * k)
    }
}

/// Predictions of one sector lemma for `spec`.
pub fn predict_sector(spec: &ProblemSpec, lemma: Lemma) -> Result<Vec<SectorPrediction>> {
    let order = endpoint_order(spec.potential(), lemma.endpoint())?;
    let sector = lemma.sector();
    let (explicit, bounded) = lemma.entries();
    let mut out: Vec<SectorPrediction> = explicit
        .iter()
        .map(|&entry| SectorPrediction {
            lemma: Some(lemma),
            entry,
            sector,
            error_order: order.rho,
            nu: Some(order.nu),
        })
        .collect();
    out.extend(bounded.iter().map(|&entry| SectorPrediction {
        lemma: Some(lemma),
        ..SectorPrediction::remainder_only(entry, sector, order.rho)
    }));
    Ok(out)
}

/// The computed value of an entry at `x = pi`.
pub fn entry_value(spec: &ProblemSpec, entry: Entry, lambda: C64) -> Result<C64> {
    let grid = transfer::solution_grid(spec.potential(), spec.grid_size(), lambda)?;
    let opts = SeriesOptions::from_spec(spec);
    let first_term = |family| -> Result<C64> {
        let terms = transfer::picard_terms(spec.potential(), lambda, family, &grid, &opts)?;
        Ok(*terms[0].values.last().expect("grid is nonempty"))
    };
    match entry {
        Entry::P0Tilde => Ok(-I * (I * lambda * PI).exp() * first_term(Family::P)?),
        Entry::Q0Tilde => Ok(I * (-I * lambda * PI).exp() * first_term(Family::Q)?),
        _ => {
            let e = transfer::fundamental_solution(spec.potential(), lambda, &grid, &opts)?.at_end();
            Ok(match entry {
                Entry::E11 => e[0][0],
                Entry::E12 => e[0][1],
                Entry::E21 => e[1][0],
                _ => e[1][1],
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrendPoint {
    #[serde(with = "crate::problem::cnum")]
    pub lambda: C64,
    pub modulus: f64,
    #[serde(with = "crate::problem::cnum")]
    pub actual: C64,
    #[serde(with = "crate::problem::cnum")]
    pub predicted: C64,
    pub scaled_remainder: f64,
}

/// Decay of a scaled remainder along a ray.
#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub label: String,
    pub points: Vec<TrendPoint>,
    pub first: f64,
    pub last: f64,
    pub pass: bool,
}

impl TrendReport {
    /// Passes when the last value is at most half the first (a decrease of at least 20%
    /// follows), or when every value vanishes.
    fn new(label: String, points: Vec<TrendPoint>) -> Result<Self> {
        let (Some(first), Some(last)) = (points.first(), points.last()) else {
            return Err(Error::InvalidInput("empty ray".into()));
        };
        let (first, last) = (first.scaled_remainder, last.scaled_remainder);
        let all_zero = points.iter().all(|p| p.scaled_remainder == 0.0);
        let pass = all_zero || (last <= 0.8 * first && last < 0.5 * first);
        Ok(Self {
            label,
            points,
            first,
            last,
            pass,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# modulus,actual_re,actual_im,predicted_re,predicted_im,scaled_remainder\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                p.modulus, p.actual.re, p.actual.im, p.predicted.re, p.predicted.im, p.scaled_remainder
            ));
        }
        s
    }
}

fn check_ray(sector: &Sector, ray: &[C64]) -> Result<()> {
    if ray.is_empty() {
        return Err(Error::InvalidInput("empty ray".into()));
    }
    if let Some(z) = ray.iter().find(|z| !sector.contains(**z)) {
        return Err(Error::InvalidInput(format!("ray point {z} lies outside the sector")));
    }
    if ray.windows(2).any(|w| w[1].norm() <= w[0].norm()) {
        return Err(Error::InvalidInput("ray moduli must increase".into()));
    }
    Ok(())
}

/// `r(l) = |actual - leading| |Im l|^rho e^{-pi |Im l|}` along the ray.
/// Differences below the working accuracy of the entry count as zero.
pub fn verify_sector_prediction(
    spec: &ProblemSpec,
    pred: &SectorPrediction,
    ray: &[C64],
) -> Result<TrendReport> {
    check_ray(&pred.sector, ray)?;
    let points = ray
        .par_iter()
        .map(|&l| -> Result<TrendPoint> {
            let actual = entry_value(spec, pred.entry, l)?;
            let predicted = pred.leading(l)?;
            let weight = l.im.abs().powf(pred.error_order) * (-PI * l.im.abs()).exp();
            let diff = (actual - predicted).norm();
            let noise = NOISE_REL * (actual.norm() + predicted.norm());
            let r = if diff <= noise { 0.0 } else { diff * weight };
            Ok(TrendPoint {
                lambda: l,
                modulus: l.norm(),
                actual,
                predicted,
                scaled_remainder: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let label = match pred.lemma {
        Some(l) => format!("lemma {} {}", l.number(), pred.entry.name()),
        None => format!("{} remainder", pred.entry.name()),
    };
    TrendReport::new(label, points)
}

/// Both displays of the Riemann-type lemma for `f` on `[a, b]` along a ray in one half-plane:
/// `e^{Im l a} int_a^b e^{i l x} f`, `e^{-Im l b} int_a^b e^{-i l x} f` (upper) and
/// `e^{-|Im l| b} int_a^b e^{i l x} f`, `e^{|Im l| a} int_a^b e^{-i l x} f` (lower).
pub fn riemann_decay_check<F>(f: F, a: f64, b: f64, half: HalfPlane, ray: &[C64]) -> Result<[TrendReport; 2]>
where
    F: Fn(f64) -> C64 + Sync,
{
    if !(0.0 <= a && a < b && b <= PI) {
        return Err(Error::InvalidInput(format!("need 0 <= a < b <= pi, got [{a}, {b}]")));
    }
    if ray.is_empty() || ray.iter().any(|z| HalfPlane::of(*z) != Some(half)) {
        return Err(Error::WrongHalfPlane {
            lambda: format!("{:?}", ray.iter().find(|z| HalfPlane::of(**z) != Some(half))),
        });
    }
    let scaled = |l: C64, sign: f64| -> Result<C64> {
        // shift so the largest modulus of e^{+-i l x} on [a, b] is 1
        let s = l.im.abs();
        let shift = match (half, sign > 0.0) {
            (HalfPlane::Upper, true) => s * a,
            (HalfPlane::Upper, false) => -s * b,
            (HalfPlane::Lower, true) => -s * b,
            (HalfPlane::Lower, false) => s * a,
        };
        let g = |x: f64| (sign * I * l * x + shift).exp() * f(x);
        let limit = 200 + (4.0 * l.norm() * (b - a)) as usize;
        Ok(crate::quad::integrate_adaptive(g, a, b, 1e-14, 1e-10, limit)?.value)
    };
    let run = |sign: f64, label: &str| -> Result<TrendReport> {
        let points = ray
            .par_iter()
            .map(|&l| -> Result<TrendPoint> {
                let v = scaled(l, sign)?;
                Ok(TrendPoint {
                    lambda: l,
                    modulus: l.norm(),
                    actual: v,
                    predicted: C64::new(0.0, 0.0),
                    scaled_remainder: v.norm(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TrendReport::new(label.into(), points)
    };
    Ok([run(1.0, "exp(+i lambda x)")?, run(-1.0, "exp(-i lambda x)")?])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundPoint {
    #[serde(with = "crate::problem::cnum")]
    pub lambda: C64,
    pub delta_abs: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub sector: Sector,
    /// Power of `|Im l|` in `b(l) = |Delta| |Im l|^p e^{-pi |Im l|}`.
    pub exponent: f64,
    /// Whether the condition pair of the Theorem for this sector holds.
    pub hypotheses_hold: bool,
    pub points: Vec<BoundPoint>,
    pub median: f64,
    /// Smallest `b` over the second half of the ray.
    pub tail_min: f64,
    pub pass: bool,
}

/// `b(l)` along the ray; passes when `b` stays above half its median on the tail.
pub fn delta_lower_bound_check(spec: &ProblemSpec, sector: &Sector, ray: &[C64]) -> Result<LowerBoundReport> {
    check_ray(sector, ray)?;
    let verdict = completeness::check_theorem(spec);
    let ev = &verdict.evidence;
    let rho = |e: Endpoint| ev.order(e).map_or(0.0, |o| o.rho);
    let (direct, pair, orders) = match sector.half {
        HalfPlane::Upper => (verdict.cond65, verdict.cond66, [Endpoint::PAtPi, Endpoint::QAt0]),
        HalfPlane::Lower => (verdict.cond67, verdict.cond68, [Endpoint::PAt0, Endpoint::QAtPi]),
    };
    let exponent = if direct { 0.0 } else { rho(orders[0]).max(rho(orders[1])) };
    let hypotheses_hold = direct || pair == ConditionStatus::Holds;
    let points = ray
        .par_iter()
        .map(|&l| -> Result<BoundPoint> {
            let d = chardet::delta(spec, l)?.delta.norm();
            let b = d * l.im.abs().powf(exponent) * (-PI * l.im.abs()).exp();
            Ok(BoundPoint {
                lambda: l,
                delta_abs: d,
                b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<f64> = points.iter().map(|p| p.b).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let tail_min = points[n / 2..].iter().map(|p| p.b).fold(f64::INFINITY, f64::min);
    Ok(LowerBoundReport {
        sector: *sector,
        exponent,
        hypotheses_hold,
        points,
        median,
        tail_min,
        pass: median > 0.0 && tail_min >= 0.5 * median,
    })
}
