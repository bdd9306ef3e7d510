//! Singular-curve data model: base curve, glued points S with a partition,
//! modulus multiplicities, and the numerical invariants δ_Q, δ, π, k, p.

use crate::error::{Error, Result};
use crate::lattice::{Lattice, TorusPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Positive multiplicities 𝔪(P) indexed by point identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulusSpec {
    entries: BTreeMap<String, u32>,
}

impl ModulusSpec {
    pub fn new(entries: BTreeMap<String, u32>) -> Result<Self> {
        if entries.values().any(|&m| m == 0) {
            return Err(Error::Domain("every multiplicity must be >= 1".into()));
        }
        let deg: u32 = entries.values().sum();
        if deg < 2 {
            return Err(Error::Domain(format!(
                "modulus degree must be >= 2, got {deg}"
            )));
        }
        Ok(ModulusSpec { entries })
    }

    pub fn multiplicity(&self, id: &str) -> Option<u32> {
        self.entries.get(id).copied()
    }

    pub fn degree(&self) -> u32 {
        self.entries.values().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }
}

/// Base-curve data: an explicit torus for g = 1, or externally supplied
/// periods and Abel-map values for general genus.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseData {
    /// Genus-1 base ℂ/Λ_τ; all abelian integrals are computed in-house.
    ExplicitTorus { tau: Complex64 },
    /// General genus: τ in the Siegel upper half space and the values
    /// h[i][j] = h_j(P_i) of the normalized abelian integrals at the
    /// points of S, in spec point order.
    SuppliedPeriods {
        tau: Vec<Vec<Complex64>>,
        h: Vec<Vec<Complex64>>,
    },
}

/// A labelled point of S. `position` is the torus representative and is
/// required when the base is an explicit torus.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub id: String,
    pub position: Option<Complex64>,
}

/// The data (X, S, R, 𝔪) defining a singular curve X_𝔪.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularCurveSpec {
    base_genus: u32,
    base: BaseData,
    points: Vec<CurvePoint>,
    classes: Vec<Vec<String>>,
    modulus: ModulusSpec,
}

/// Numerical invariants of X_𝔪.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenusData {
    /// δ_Q per partition class, in class order.
    pub delta_per_class: Vec<u32>,
    pub delta: u32,
    pub pi: u32,
    /// Number of residue-pair (simple-pole) basis differentials.
    pub k: u32,
    /// Number of higher-order (residue-free) basis differentials.
    pub p: u32,
    /// #S.
    pub s: u32,
}

impl SingularCurveSpec {
    pub fn new(
        base_genus: u32,
        base: BaseData,
        points: Vec<CurvePoint>,
        classes: Vec<Vec<String>>,
        modulus: ModulusSpec,
    ) -> Result<Self> {
        let spec = SingularCurveSpec {
            base_genus,
            base,
            points,
            classes,
            modulus,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor for the genus-1 nodal curve glued at two
    /// torus points with multiplicities (1, 1).
    pub fn node(tau: Complex64, z1: Complex64, z2: Complex64) -> Result<Self> {
        let mut entries = BTreeMap::new();
        entries.insert("P1".to_string(), 1);
        entries.insert("P2".to_string(), 1);
        SingularCurveSpec::new(
            1,
            BaseData::ExplicitTorus { tau },
            vec![
                CurvePoint { id: "P1".into(), position: Some(z1) },
                CurvePoint { id: "P2".into(), position: Some(z2) },
            ],
            vec![vec!["P1".into(), "P2".into()]],
            ModulusSpec::new(entries)?,
        )
    }

    /// Convenience constructor for the genus-1 cuspidal curve with a
    /// single point of multiplicity 2.
    pub fn cusp(tau: Complex64, z0: Complex64) -> Result<Self> {
        let mut entries = BTreeMap::new();
        entries.insert("P".to_string(), 2);
        SingularCurveSpec::new(
            1,
            BaseData::ExplicitTorus { tau },
            vec![CurvePoint { id: "P".into(), position: Some(z0) }],
            vec![vec!["P".into()]],
            ModulusSpec::new(entries)?,
        )
    }

    /// Check every structural invariant; returns `&self` so call sites can
    /// chain. All other operations assume a validated spec.
    pub fn validate(&self) -> Result<&Self> {
        // identifiers unique
        let mut seen = BTreeSet::new();
        for p in &self.points {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Structure(format!("duplicate point id {:?}", p.id)));
            }
        }
        // modulus support equals S
        let support: BTreeSet<&str> = self.modulus.support().collect();
        if support != seen {
            return Err(Error::Structure(
                "modulus support must equal the point set S".into(),
            ));
        }
        // partition: nonempty disjoint classes covering S
        let mut covered = BTreeSet::new();
        for class in &self.classes {
            if class.is_empty() {
                return Err(Error::Structure("empty partition class".into()));
            }
            for id in class {
                if !seen.contains(id.as_str()) {
                    return Err(Error::Structure(format!(
                        "class member {id:?} is not a point of S"
                    )));
                }
                if !covered.insert(id.as_str()) {
                    return Err(Error::Structure(format!(
                        "point {id:?} appears in more than one class"
                    )));
                }
            }
        }
        if covered != seen {
            return Err(Error::Structure(
                "partition classes must cover all of S".into(),
            ));
        }
        match &self.base {
            BaseData::ExplicitTorus { tau } => {
                if self.base_genus != 1 {
                    return Err(Error::Structure(
                        "explicit torus base requires base_genus = 1".into(),
                    ));
                }
                let lat = Lattice::new(*tau)?;
                // positions present and pairwise distinct on the torus
                let mut reps: Vec<Complex64> = Vec::new();
                for p in &self.points {
                    let z = p.position.ok_or_else(|| {
                        Error::Structure(format!("point {:?} is missing a position", p.id))
                    })?;
                    let rep = lat.canonicalize(z);
                    if reps.iter().any(|r| (r - rep).norm() < 1e-10) {
                        return Err(Error::Structure(format!(
                            "point {:?} coincides with another point on the torus",
                            p.id
                        )));
                    }
                    reps.push(rep);
                }
            }
            BaseData::SuppliedPeriods { tau, h } => {
                let g = self.base_genus as usize;
                if tau.len() != g || tau.iter().any(|r| r.len() != g) {
                    return Err(Error::Structure(format!(
                        "Siegel matrix must be {g}x{g}"
                    )));
                }
                for i in 0..g {
                    for j in 0..g {
                        if (tau[i][j] - tau[j][i]).norm() > 1e-10 {
                            return Err(Error::Structure("Siegel matrix must be symmetric".into()));
                        }
                    }
                }
                // positive-definite imaginary part via leading principal minors
                let im: Vec<Vec<f64>> =
                    tau.iter().map(|r| r.iter().map(|z| z.im).collect()).collect();
                for k in 1..=g {
                    let sub: Vec<Vec<f64>> =
                        (0..k).map(|i| (0..k).map(|j| im[i][j]).collect()).collect();
                    if real_det(&sub) <= 0.0 {
                        return Err(Error::Structure(
                            "Im(tau) must be positive definite".into(),
                        ));
                    }
                }
                if h.len() != self.points.len() || h.iter().any(|r| r.len() != g) {
                    return Err(Error::Structure(format!(
                        "supplied h must be {}x{g} (one row per point of S)",
                        self.points.len()
                    )));
                }
            }
        }
        Ok(self)
    }

    pub fn base_genus(&self) -> u32 {
        self.base_genus
    }

    pub fn base(&self) -> &BaseData {
        &self.base
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn classes(&self) -> &[Vec<String>] {
        &self.classes
    }

    pub fn modulus(&self) -> &ModulusSpec {
        &self.modulus
    }

    pub fn point(&self, id: &str) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.id == id)
    }

    /// Index of a point id in spec order.
    pub fn point_index(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }

    /// Torus lattice of the base when it is an explicit torus.
    pub fn torus_lattice(&self) -> Option<Lattice> {
        match &self.base {
            BaseData::ExplicitTorus { tau } => Lattice::new(*tau).ok(),
            BaseData::SuppliedPeriods { .. } => None,
        }
    }

    /// Canonical torus representative of a point of S (g = 1 only).
    pub fn torus_point(&self, id: &str) -> Option<TorusPoint> {
        let lat = self.torus_lattice()?;
        let p = self.point(id)?;
        Some(TorusPoint::new(p.position?, lat))
    }
}

use crate::linalg::real_det;

/// Genus and structure counts of X_𝔪: δ_Q = deg(𝔪|_Q) − 1 per class,
/// δ = Σδ_Q = deg 𝔪 − #S̄, π = g + δ, k = s − #S̄, p = deg 𝔪 − s.
pub fn genus(spec: &SingularCurveSpec) -> GenusData {
    let mut delta_per_class = Vec::with_capacity(spec.classes.len());
    for class in &spec.classes {
        let total: u32 = class
            .iter()
            .map(|id| spec.modulus.multiplicity(id).unwrap_or(0))
            .sum();
        delta_per_class.push(total - 1);
    }
    let delta: u32 = delta_per_class.iter().sum();
    let s = spec.points.len() as u32;
    let classes = spec.classes.len() as u32;
    GenusData {
        delta,
        pi: spec.base_genus + delta,
        k: s - classes,
        p: spec.modulus.degree() - s,
        s,
        delta_per_class,
    }
}

/// Ordered point pairs indexing the simple-pole basis differentials:
/// within each class {P_1, ..., P_m} (spec order) the star pairs
/// (P_1, P_j) for j = 2..m. Total count equals `GenusData::k`.
pub fn residue_pairing(spec: &SingularCurveSpec) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for class in &spec.classes {
        for other in class.iter().skip(1) {
            pairs.push((class[0].clone(), other.clone()));
        }
    }
    pairs
}

// ---------------------------------------------------------------------------
// JSON descriptor format

/// `tau` field of the descriptor: `[re, im]` for g = 1 or a full Siegel
/// matrix of `[re, im]` pairs for higher genus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauField {
    Scalar([f64; 2]),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointEntry {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    pub multiplicity: u32,
}

/// On-disk curve descriptor. Field names are part of the CLI contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveDescriptor {
    pub base_genus: u32,
    pub tau: TauField,
    pub points: Vec<PointEntry>,
    pub classes: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supplied_h: Option<Vec<Vec<[f64; 2]>>>,
}

impl CurveDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Structure(format!("descriptor parse error: {e}")))
    }

    pub fn to_spec(&self) -> Result<SingularCurveSpec> {
        let points: Vec<CurvePoint> = self
            .points
            .iter()
            .map(|p| CurvePoint {
                id: p.id.clone(),
                position: p.position.map(|[re, im]| Complex64::new(re, im)),
            })
            .collect();
        let mut entries = BTreeMap::new();
        for p in &self.points {
            if entries.insert(p.id.clone(), p.multiplicity).is_some() {
                return Err(Error::Structure(format!("duplicate point id {:?}", p.id)));
            }
        }
        let modulus = ModulusSpec::new(entries)?;
        let base = match (&self.tau, &self.supplied_h) {
            (TauField::Scalar([re, im]), None) => {
                if self.base_genus != 1 {
                    return Err(Error::Structure(
                        "scalar tau requires base_genus = 1".into(),
                    ));
                }
                BaseData::ExplicitTorus { tau: Complex64::new(*re, *im) }
            }
            (TauField::Scalar([re, im]), Some(_)) => {
                if self.base_genus != 1 {
                    return Err(Error::Structure(
                        "scalar tau requires base_genus = 1".into(),
                    ));
                }
                // supplied h with a genus-1 scalar tau: treat as supplied periods
                BaseData::SuppliedPeriods {
                    tau: vec![vec![Complex64::new(*re, *im)]],
                    h: self.h_matrix()?,
                }
            }
            (TauField::Matrix(rows), Some(_)) => BaseData::SuppliedPeriods {
                tau: rows
                    .iter()
                    .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                    .collect(),
                h: self.h_matrix()?,
            },
            (TauField::Matrix(_), None) => {
                return Err(Error::Capability(
                    "base_genus >= 2 requires supplied_h (abelian integrals are not computed in-house)".into(),
                ));
            }
        };
        SingularCurveSpec::new(self.base_genus, base, points, self.classes.clone(), modulus)
    }

    fn h_matrix(&self) -> Result<Vec<Vec<Complex64>>> {
        Ok(self
            .supplied_h
            .as_ref()
            .ok_or_else(|| Error::Structure("missing supplied_h".into()))?
            .iter()
            .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            .collect())
    }
}
