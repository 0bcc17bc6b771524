//! Problem specification: potential, boundary forms, grid and tolerances, with JSON I/O.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bc::BoundaryMatrix;
use crate::error::{Error, Result};
use crate::potential::{integral_l1_norms, EndpointData, Potential, PotentialKind};
use crate::C64;

pub const MIN_GRID_SIZE: usize = 16;
pub const DEFAULT_GRID_SIZE: usize = 32;
/// Default bound on `|Im lambda|` accepted by the series engine.
pub const DEFAULT_IM_CAP: f64 = 60.0;

/// Complex numbers in problem files: either a bare real number or `[re, im]`.
pub mod cnum {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    impl From<Repr> for C64 {
        fn from(r: Repr) -> C64 {
            match r {
                Repr::Real(x) => C64::new(x, 0.0),
                Repr::Pair([a, b]) => C64::new(a, b),
            }
        }
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(Repr::deserialize(d)?.into())
    }

    pub mod vec {
        use super::{Repr, C64};
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|z| [z.re, z.im]))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
            Ok(Vec::<Repr>::deserialize(d)?.into_iter().map(C64::from).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Stop the series once the tail bound, relative to `e^{pi |Im lambda|}`, is below this.
    pub series_tol: f64,
    /// Residual tolerance for eigenvalues, relative to the determinant scale.
    pub root_tol: f64,
    /// Subinterval limit for adaptive quadrature.
    pub quad_refine_limit: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            series_tol: 1e-14,
            root_tol: 1e-9,
            quad_refine_limit: 400,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(self.series_tol) || !ok(self.root_tol) || self.quad_refine_limit == 0 {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to pose one boundary value problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    potential: Potential,
    bc: BoundaryMatrix,
    grid_size: usize,
    tolerances: Tolerances,
    im_cap: f64,
    l1: (f64, f64),
}

impl ProblemSpec {
    pub fn new(
        potential: Potential,
        bc: BoundaryMatrix,
        grid_size: usize,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if grid_size < MIN_GRID_SIZE {
            return Err(Error::InvalidInput(format!(
                "grid_size {grid_size} is below the minimum {MIN_GRID_SIZE}"
            )));
        }
        tolerances.validate()?;
        potential.endpoint_data().validate()?;
        let l1 = integral_l1_norms(&potential, tolerances.quad_refine_limit)?;
        Ok(Self {
            potential,
            bc,
            grid_size,
            tolerances,
            im_cap: DEFAULT_IM_CAP,
            l1,
        })
    }

    pub fn with_defaults(potential: Potential, bc: BoundaryMatrix) -> Result<Self> {
        Self::new(potential, bc, DEFAULT_GRID_SIZE, Tolerances::default())
    }

    pub fn with_im_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::InvalidInput("im_cap must be positive".into()));
        }
        self.im_cap = cap;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Result<Self> {
        tolerances.validate()?;
        self.tolerances = tolerances;
        Ok(self)
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Result<Self> {
        if grid_size < MIN_GRID_SIZE {
            return Err(Error::InvalidInput(format!(
                "grid_size {grid_size} is below the minimum {MIN_GRID_SIZE}"
            )));
        }
        self.grid_size = grid_size;
        Ok(self)
    }

    /// Same problem with other boundary forms.
    pub fn with_bc(&self, bc: BoundaryMatrix) -> Self {
        Self { bc, ..self.clone() }
    }

    /// Same problem with other (validated) endpoint records.
    pub fn with_endpoint_data(&self, data: EndpointData) -> Result<Self> {
        Ok(Self {
            potential: self.potential.clone().with_endpoint_data(data)?,
            ..self.clone()
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn bc(&self) -> &BoundaryMatrix {
        &self.bc
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn im_cap(&self) -> f64 {
        self.im_cap
    }

    /// `(int |P|, int |Q|)` computed at construction.
    pub fn l1_norms(&self) -> (f64, f64) {
        self.l1
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| {
            Error::InvalidInput(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        file.into_spec()
    }

    /// Serializes to the problem-file format. Closure potentials have no representation.
    pub fn to_json(&self) -> Result<String> {
        let potential = match self.potential.kind() {
            PotentialKind::Expr { p, q } => PotentialFile::Expr {
                p: p.source().to_string(),
                q: q.source().to_string(),
            },
            PotentialKind::Sampled(s) => PotentialFile::Samples {
                x: s.x.clone(),
                p: s.p.clone(),
                q: s.q.clone(),
            },
            PotentialKind::Function { .. } => {
                return Err(Error::InvalidInput(
                    "closure potentials cannot be serialized".into(),
                ))
            }
        };
        let ed = *self.potential.endpoint_data();
        let file = ProblemFile {
            bc: *self.bc.coefficients(),
            potential,
            endpoint_data: (ed != EndpointData::default()).then_some(ed),
            grid_size: Some(self.grid_size),
            tolerances: Some(self.tolerances),
            im_cap: Some(self.im_cap),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Hex SHA-256 of the canonical serialization (or of the debug form for closures).
    pub fn spec_hash(&self) -> String {
        let text = self.to_json().unwrap_or_else(|_| format!("{self:?}"));
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

impl PartialEq for ProblemSpec {
    fn eq(&self, other: &Self) -> bool {
        let same_potential = match (self.potential.kind(), other.potential.kind()) {
            (PotentialKind::Expr { p: a, q: b }, PotentialKind::Expr { p: c, q: d }) => {
                a.source() == c.source() && b.source() == d.source()
            }
            (PotentialKind::Sampled(a), PotentialKind::Sampled(b)) => a == b,
            (PotentialKind::Function { p: a, q: b }, PotentialKind::Function { p: c, q: d }) => {
                std::sync::Arc::ptr_eq(a, c) && std::sync::Arc::ptr_eq(b, d)
            }
            _ => false,
        };
        same_potential
            && self.potential.endpoint_data() == other.potential.endpoint_data()
            && self.bc == other.bc
            && self.grid_size == other.grid_size
            && self.tolerances == other.tolerances
            && self.im_cap == other.im_cap
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(with = "bc_serde")]
    bc: [[C64; 4]; 2],
    potential: PotentialFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    endpoint_data: Option<EndpointData>,
    #[serde(default)]
    grid_size: Option<usize>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im_cap: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PotentialFile {
    Expr {
        #[serde(rename = "P")]
        p: String,
        #[serde(rename = "Q")]
        q: String,
    },
    Samples {
        x: Vec<f64>,
        #[serde(rename = "P", with = "cnum::vec")]
        p: Vec<C64>,
        #[serde(rename = "Q", with = "cnum::vec")]
        q: Vec<C64>,
    },
}

mod bc_serde {
    use super::cnum::Repr;
    use super::C64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &[[C64; 4]; 2], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(a.iter().map(|row| row.map(|z| [z.re, z.im])))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[[C64; 4]; 2], D::Error> {
        let rows = <[[Repr; 4]; 2]>::deserialize(d)?;
        Ok(rows.map(|r| r.map(C64::from)))
    }
}

impl ProblemFile {
    fn into_spec(self) -> Result<ProblemSpec> {
        let bc = BoundaryMatrix::new(self.bc)?;
        let mut potential = match self.potential {
            PotentialFile::Expr { p, q } => Potential::from_exprs(&p, &q)?,
            PotentialFile::Samples { x, p, q } => Potential::from_samples(x, p, q)?,
        };
        if let Some(ed) = self.endpoint_data {
            potential = potential.with_endpoint_data(ed)?;
        }
        let spec = ProblemSpec::new(
            potential,
            bc,
            self.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
            self.tolerances.unwrap_or_default(),
        )?;
        match self.im_cap {
            Some(cap) => spec.with_im_cap(cap),
            None => Ok(spec),
        }
    }
}
