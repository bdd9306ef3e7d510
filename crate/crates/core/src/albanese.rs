//! Period matrices of analytic Albanese varieties, bounded discreteness
//! and toroidality certificates, and the Remmert-Morimoto decomposition
//! into ℂ^p × (ℂ*)^q × (quasi-abelian toroidal block).

use crate::curve::{genus, residue_pairing, BaseData, SingularCurveSpec};
use crate::elliptic::{
    make_context, second_kind_differential, third_kind_differential, Cycle, Differential,
    Truncation,
};
use crate::error::{Error, Result};
use crate::lattice::TorusPoint;
use crate::linalg::{
    cmat_conj_transpose, cmat_identity, cmat_inverse, cmat_mul, cmat_nullspace, cmat_rank,
    real_det, real_rank, CMat,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Numeric,
}

/// Period matrix of Alb^an(X_𝔪): π rows, one column per homology cycle,
/// columns labelled α_1..α_g, β_1..β_g, γ_1..γ_{s−1} in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMatrix {
    entries: CMat,
    labels: Vec<String>,
    provenance: Provenance,
}

impl PeriodMatrix {
    pub fn new(entries: CMat, labels: Vec<String>, provenance: Provenance) -> Result<Self> {
        let cols = entries.first().map_or(0, |r| r.len());
        if entries.iter().any(|r| r.len() != cols) {
            return Err(Error::Structure("ragged period matrix".into()));
        }
        if !labels.is_empty() && labels.len() != cols {
            return Err(Error::Structure(format!(
                "expected {cols} column labels, got {}",
                labels.len()
            )));
        }
        Ok(PeriodMatrix { entries, labels, provenance })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i][j]
    }

    pub fn max_abs_diff(&self, other: &PeriodMatrix) -> f64 {
        crate::linalg::cmat_max_abs_diff(&self.entries, &other.entries)
    }

    /// Columns reordered as (γ..., α..., β...) — the order used for the
    /// 2-row nodal displays and the toroidal-coordinate normal form.
    pub fn gamma_first_order(&self) -> Result<PeriodMatrix> {
        if self.labels.is_empty() {
            return Err(Error::Structure(
                "column labels required to reorder".into(),
            ));
        }
        let mut perm: Vec<usize> = Vec::with_capacity(self.cols());
        for prefix in ["gamma", "alpha", "beta"] {
            for (j, l) in self.labels.iter().enumerate() {
                if l.starts_with(prefix) {
                    perm.push(j);
                }
            }
        }
        if perm.len() != self.cols() {
            return Err(Error::Structure("unrecognized column labels".into()));
        }
        let entries: CMat = self
            .entries
            .iter()
            .map(|row| perm.iter().map(|&j| row[j]).collect())
            .collect();
        let labels = perm.iter().map(|&j| self.labels[j].clone()).collect();
        PeriodMatrix::new(entries, labels, self.provenance)
    }

    /// Interpret a 2×3 matrix in (γ, α, β) order as the nodal shape
    /// [[0, 1, τ], [1, s, t]]; returns (τ, s, t).
    pub fn nodal_parameters(&self, tol: f64) -> Option<(Complex64, Complex64, Complex64)> {
        if self.rows() != 2 || self.cols() != 3 {
            return None;
        }
        let e = &self.entries;
        let shape_ok = e[0][0].norm() < tol
            && (e[0][1] - c64(1.0, 0.0)).norm() < tol
            && (e[1][0] - c64(1.0, 0.0)).norm() < tol;
        if !shape_ok {
            return None;
        }
        Some((e[0][2], e[1][1], e[1][2]))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rows": self.rows(),
            "cols": self.cols(),
            "entries": self
                .entries
                .iter()
                .flat_map(|row| row.iter().map(|z| [z.re, z.im]))
                .collect::<Vec<_>>(),
            "labels": self.labels,
            "provenance": match self.provenance {
                Provenance::ClosedForm => "closed_form",
                Provenance::Numeric => "numeric",
            },
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<PeriodMatrix> {
        let bad = |what: &str| Error::Structure(format!("period matrix JSON: {what}"));
        let rows = v["rows"].as_u64().ok_or_else(|| bad("missing rows"))? as usize;
        let cols = v["cols"].as_u64().ok_or_else(|| bad("missing cols"))? as usize;
        let flat = v["entries"].as_array().ok_or_else(|| bad("missing entries"))?;
        if flat.len() != rows * cols {
            return Err(bad("entry count mismatch"));
        }
        let mut entries = vec![vec![c64(0.0, 0.0); cols]; rows];
        for (idx, pair) in flat.iter().enumerate() {
            let p = pair.as_array().ok_or_else(|| bad("entry must be [re, im]"))?;
            if p.len() != 2 {
                return Err(bad("entry must be [re, im]"));
            }
            entries[idx / cols][idx % cols] = c64(
                p[0].as_f64().ok_or_else(|| bad("non-numeric entry"))?,
                p[1].as_f64().ok_or_else(|| bad("non-numeric entry"))?,
            );
        }
        let labels = v["labels"]
            .as_array()
            .map(|ls| {
                ls.iter()
                    .map(|l| l.as_str().unwrap_or_default().to_string())
                    .collect()
            })
            .unwrap_or_default();
        let provenance = match v["provenance"].as_str() {
            Some("numeric") => Provenance::Numeric,
            _ => Provenance::ClosedForm,
        };
        PeriodMatrix::new(entries, labels, provenance)
    }
}

fn column_labels(g: usize, s: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(2 * g + s.saturating_sub(1));
    for i in 1..=g {
        labels.push(format!("alpha{i}"));
    }
    for i in 1..=g {
        labels.push(format!("beta{i}"));
    }
    for j in 1..s {
        labels.push(format!("gamma{j}"));
    }
    labels
}

/// Abel-map values h_j(P_i) for the points of S, in spec point order.
fn h_values(spec: &SingularCurveSpec) -> Result<Vec<Vec<Complex64>>> {
    match spec.base() {
        BaseData::ExplicitTorus { .. } => {
            let lat = spec.torus_lattice().unwrap();
            Ok(spec
                .points()
                .iter()
                .map(|p| vec![lat.canonicalize(p.position.unwrap())])
                .collect())
        }
        BaseData::SuppliedPeriods { h, .. } => Ok(h.clone()),
    }
}

fn tau_rows(spec: &SingularCurveSpec) -> Vec<Vec<Complex64>> {
    match spec.base() {
        BaseData::ExplicitTorus { tau } => vec![vec![*tau]],
        BaseData::SuppliedPeriods { tau, .. } => tau.clone(),
    }
}

/// Closed-form period matrix of Alb^an(X_𝔪):
/// rows 1..g carry (I_g | τ | 0), the k residue-pair rows carry
/// (0 | h(P) − h(P′) | ±1 on the paired circles), and the remaining
/// higher-order rows are zero.
pub fn build_period_matrix(spec: &SingularCurveSpec) -> Result<PeriodMatrix> {
    spec.validate()?;
    let gd = genus(spec);
    let g = spec.base_genus() as usize;
    let s = gd.s as usize;
    let cols = 2 * g + s - 1;
    let pairs = residue_pairing(spec);
    let h = h_values(spec)?;
    let tau = tau_rows(spec);

    let mut rows: CMat = Vec::with_capacity(gd.pi as usize);
    for i in 0..g {
        let mut row = vec![c64(0.0, 0.0); cols];
        row[i] = c64(1.0, 0.0);
        for j in 0..g {
            row[g + j] = tau[i][j];
        }
        rows.push(row);
    }
    for (a, b) in &pairs {
        let ia = spec.point_index(a).unwrap();
        let ib = spec.point_index(b).unwrap();
        let mut row = vec![c64(0.0, 0.0); cols];
        for j in 0..g {
            row[g + j] = h[ia][j] - h[ib][j];
        }
        if ia < s - 1 {
            row[2 * g + ia] = c64(1.0, 0.0);
        }
        if ib < s - 1 {
            row[2 * g + ib] = c64(-1.0, 0.0);
        }
        rows.push(row);
    }
    for _ in 0..gd.p {
        rows.push(vec![c64(0.0, 0.0); cols]);
    }
    PeriodMatrix::new(rows, column_labels(g, s), Provenance::ClosedForm)
}

/// Circle radius for γ_i: a third of the distance to the nearest other
/// point of S (modulo the lattice) capped by a third of the shortest
/// lattice vector.
fn circle_radius(spec: &SingularCurveSpec, idx: usize) -> f64 {
    let lat = spec.torus_lattice().unwrap();
    let tau = lat.tau();
    let shortest = tau.norm().min(1.0).min((tau - c64(1.0, 0.0)).norm());
    let mut best = shortest;
    let zi = spec.torus_point(&spec.points()[idx].id).unwrap().rep();
    for (j, pj) in spec.points().iter().enumerate() {
        if j == idx {
            continue;
        }
        let zj = spec.torus_point(&pj.id).unwrap().rep();
        let rel = zi - zj;
        let (m, n) = lat.nearest_point(rel);
        let d = (rel - c64(m as f64, 0.0) - tau * (n as f64)).norm().min(rel.norm());
        best = best.min(d);
    }
    best / 3.0
}

/// Independent numeric period matrix for a genus-1 base: constructs the
/// differential basis explicitly and integrates it over every cycle. No
/// closed-form shortcuts — this is the verification pipeline.
pub fn build_period_matrix_numeric(spec: &SingularCurveSpec) -> Result<PeriodMatrix> {
    spec.validate()?;
    if spec.base_genus() != 1 || spec.torus_lattice().is_none() {
        return Err(Error::Capability(
            "numeric period matrix requires an explicit genus-1 torus base".into(),
        ));
    }
    let gd = genus(spec);
    let lat = spec.torus_lattice().unwrap();
    let ctx = make_context(lat, Truncation::default())?;
    let s = gd.s as usize;

    let mut differentials: Vec<Differential> = vec![Differential::holomorphic()];
    for (a, b) in residue_pairing(spec) {
        let za = spec.torus_point(&a).unwrap();
        let zb = spec.torus_point(&b).unwrap();
        differentials.push(third_kind_differential(&ctx, za, zb)?);
    }
    for point in spec.points() {
        let m = spec.modulus().multiplicity(&point.id).unwrap();
        let z0 = spec.torus_point(&point.id).unwrap();
        for order in 2..=m {
            differentials.push(second_kind_differential(&ctx, z0, order)?);
        }
    }
    debug_assert_eq!(differentials.len(), gd.pi as usize);

    let mut cycles: Vec<Cycle> = vec![Cycle::Alpha, Cycle::Beta];
    for idx in 0..s - 1 {
        let center = TorusPoint::new(spec.points()[idx].position.unwrap(), lat);
        cycles.push(Cycle::SmallCircle { center, radius: circle_radius(spec, idx) });
    }

    let mut rows = Vec::with_capacity(differentials.len());
    for d in &differentials {
        let mut row = Vec::with_capacity(cycles.len());
        for cy in &cycles {
            row.push(crate::elliptic::period_integral(&ctx, d, cy)?);
        }
        rows.push(row);
    }
    PeriodMatrix::new(rows, column_labels(1, s), Provenance::Numeric)
}

// ---------------------------------------------------------------------------
// Bounded certificates

/// Bounded discreteness certificate: true iff no nonzero integer
/// combination of columns with |coefficients| ≤ `bound` has norm < `tol`.
pub fn discreteness_check(p: &PeriodMatrix, bound: i64, tol: f64) -> bool {
    let cols = p.cols();
    let rows = p.rows();
    if cols == 0 {
        return true;
    }
    let mut coeff = vec![-bound; cols];
    // skip the all-(-bound) start only after testing it; iterate odometer
    loop {
        // canonical sign: first nonzero coefficient positive
        if let Some(first) = coeff.iter().find(|&&x| x != 0) {
            if *first > 0 {
                let mut norm2 = 0.0;
                for i in 0..rows {
                    let mut z = c64(0.0, 0.0);
                    for (j, &cj) in coeff.iter().enumerate() {
                        if cj != 0 {
                            z += p.get(i, j) * (cj as f64);
                        }
                    }
                    norm2 += z.norm_sqr();
                }
                if norm2.sqrt() < tol {
                    return false;
                }
            }
        }
        // odometer
        let mut k = cols;
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            if coeff[k] < bound {
                coeff[k] += 1;
                for slot in coeff.iter_mut().skip(k + 1) {
                    *slot = -bound;
                }
                break;
            }
        }
    }
}

/// Best rational approximation p/q of `x` with q ≤ max_den, by continued
/// fractions. Returns it only when |x − p/q| ≤ tol.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.floor() as i64, 1i64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if (x - p1 as f64 / q1 as f64).abs() <= tol {
            return Some((p1, q1));
        }
        if frac.abs() < 1e-15 {
            break;
        }
        let recip = 1.0 / frac;
        let a = recip.floor();
        frac = recip - a;
        let p2 = a as i64 * p1 + p0;
        let q2 = a as i64 * q1 + q0;
        if q2 > max_den || q2 <= 0 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    ((x - p1 as f64 / q1 as f64).abs() <= tol).then_some((p1, q1))
}

/// Toroidality certificate.
///
/// For the 2-row nodal shape (columns γ, α, β) the quotient fails to be
/// toroidal exactly when a = r + qτ with rational r, q; rationality is
/// tested by continued fractions with denominators ≤ `denom_bound`.
/// For general blocks a bounded search looks for σ ∈ ℤ^rows \ {0} with
/// σᵀP ∈ ℤ^cols within `tol`; finding one certifies non-toroidality.
pub fn toroidal_test(p: &PeriodMatrix, denom_bound: i64, tol: f64) -> bool {
    if let Some((tau, s, t)) = p.nodal_parameters(1e-9) {
        if s.norm() < 1e-9 {
            // a = t decomposed over the real basis (1, τ)
            let q = t.im / tau.im;
            let r = t.re - q * tau.re;
            let q_rat = rational_approx(q, denom_bound, tol);
            let r_rat = rational_approx(r, denom_bound, tol);
            return !(q_rat.is_some() && r_rat.is_some());
        }
    }
    // general bounded sigma-search (certificate only)
    let rows = p.rows();
    let cols = p.cols();
    let bound = denom_bound.clamp(1, 30);
    let mut sigma = vec![-bound; rows];
    loop {
        if let Some(first) = sigma.iter().find(|&&x| x != 0) {
            if *first > 0 {
                let mut all_integer = true;
                for j in 0..cols {
                    let mut z = c64(0.0, 0.0);
                    for (i, &si) in sigma.iter().enumerate() {
                        if si != 0 {
                            z += p.get(i, j) * (si as f64);
                        }
                    }
                    if z.im.abs() > tol || (z.re - z.re.round()).abs() > tol {
                        all_integer = false;
                        break;
                    }
                }
                if all_integer {
                    return false;
                }
            }
        }
        let mut k = rows;
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            if sigma[k] < bound {
                sigma[k] += 1;
                for slot in sigma.iter_mut().skip(k + 1) {
                    *slot = -bound;
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Remmert-Morimoto canonical form

/// Options for [`canonical_form`].
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Relative threshold below which entries/ranks are treated as zero.
    pub tol: f64,
    /// Entry bound for the ℂ*-splitting functional search.
    pub split_bound: i64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { tol: 1e-9, split_bound: 10 }
    }
}

/// Result of the Remmert-Morimoto decomposition
/// Alb^an ≅ ℂ^p × (ℂ*)^q × 𝔔.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub p: usize,
    pub q: usize,
    /// The toroidal block in toroidal coordinates
    /// (0 I_m T; I_{n−m} R1 R2); for a compact block just (I_n | T).
    pub toroidal_block: Option<PeriodMatrix>,
    /// Whether the torus part (I_m T) satisfies the Riemann relations
    /// (T symmetric, Im T positive definite); `None` without a block.
    pub kind0: Option<bool>,
    /// Complex row transform M with  normal_form = M · input · A.
    pub witness_m: CMat,
    /// Integer column transform A (unimodular).
    pub witness_a: Vec<Vec<i64>>,
    /// The fully transformed matrix M · input · A, rows ordered
    /// (toroidal block | ℂ* rows | zero rows).
    pub normal_form: CMat,
}

struct Work {
    w: CMat,
    m: CMat,
    a: Vec<Vec<i64>>,
}

impl Work {

    fn cols(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }

    fn row_swap(&mut self, i: usize, j: usize) {
        if i != j {
            self.w.swap(i, j);
            self.m.swap(i, j);
        }
    }

    fn row_scale(&mut self, i: usize, f: Complex64) {
        for x in self.w[i].iter_mut() {
            *x *= f;
        }
        for x in self.m[i].iter_mut() {
            *x *= f;
        }
    }

    /// row[dst] += f · row[src]
    fn row_axpy(&mut self, dst: usize, src: usize, f: Complex64) {
        for j in 0..self.cols() {
            let v = self.w[src][j];
            self.w[dst][j] += f * v;
        }
        for j in 0..self.m[dst].len() {
            let v = self.m[src][j];
            self.m[dst][j] += f * v;
        }
    }

    fn col_swap(&mut self, i: usize, j: usize) {
        if i != j {
            for row in self.w.iter_mut() {
                row.swap(i, j);
            }
            for row in self.a.iter_mut() {
                row.swap(i, j);
            }
        }
    }

    /// col[dst] += k · col[src], integer k
    fn col_axpy(&mut self, dst: usize, src: usize, k: i64) {
        let kf = k as f64;
        for row in self.w.iter_mut() {
            let v = row[src];
            row[dst] += v * kf;
        }
        for row in self.a.iter_mut() {
            let v = row[src];
            row[dst] += v * k;
        }
    }

    fn col_negate(&mut self, j: usize) {
        for row in self.w.iter_mut() {
            row[j] = -row[j];
        }
        for row in self.a.iter_mut() {
            row[j] = -row[j];
        }
    }
}

/// Enumerate nonzero integer vectors of dimension `dim` with entries in
/// [-bound, bound], ordered by max-norm shells then lexicographically,
/// first nonzero entry positive.
fn integer_vectors(dim: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for shell in 1..=bound {
        let mut v = vec![-shell; dim];
        loop {
            if v.iter().any(|&x| x.abs() == shell)
                && v.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
            {
                out.push(v.clone());
            }
            let mut k = dim;
            let mut done = true;
            while k > 0 {
                k -= 1;
                if v[k] < shell {
                    v[k] += 1;
                    for slot in v.iter_mut().skip(k + 1) {
                        *slot = -shell;
                    }
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }
    out
}

/// Decompose a period matrix into ℂ^p × (ℂ*)^q × toroidal block and test
/// the block's kind-0 property. Splits are certified by a bounded search
/// for integer-valued functionals; the block normalization uses left
/// GL(n,ℂ) row moves and right GL(ℤ) column moves only.
pub fn canonical_form(pm: &PeriodMatrix, opts: ClassifyOptions) -> Result<CanonicalForm> {
    let n = pm.rows();
    let c = pm.cols();
    let scale = pm
        .entries()
        .iter()
        .flat_map(|r| r.iter().map(|z| z.norm()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let zero_tol = opts.tol * scale;
    let mut work = Work {
        w: pm.entries().clone(),
        m: cmat_identity(n),
        a: {
            let mut a = vec![vec![0i64; c]; c];
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = 1;
            }
            a
        },
    };

    let mut n_act = n;
    let mut c_act = c;
    let mut p_count = 0usize;
    let mut q_count = 0usize;

    // 1. move exactly-zero rows to the bottom (ℂ factors)
    let mut i = 0;
    while i < n_act {
        let is_zero = work.w[i].iter().all(|z| z.norm() < zero_tol);
        if is_zero {
            // bubble to the bottom of the active region
            for j in i..n_act - 1 {
                work.row_swap(j, j + 1);
            }
            n_act -= 1;
            p_count += 1;
        } else {
            i += 1;
        }
    }

    // 2. hidden ℂ factors: complex row relations ψ·W = 0
    loop {
        if n_act == 0 {
            break;
        }
        let active: CMat = work.w[..n_act].iter().map(|r| r[..c_act].to_vec()).collect();
        if cmat_rank(&active, opts.tol) == n_act {
            break;
        }
        let transpose = crate::linalg::cmat_transpose(&active);
        let null = cmat_nullspace(&transpose, opts.tol);
        let psi = null
            .first()
            .ok_or_else(|| Error::Classification("rank drop without nullspace".into()))?;
        // build the ψ-combination in the row with the largest |ψ| pivot
        let pivot = (0..n_act)
            .max_by(|&a, &b| psi[a].norm().total_cmp(&psi[b].norm()))
            .unwrap();
        if psi[pivot].norm() < opts.tol {
            return Err(Error::Classification("degenerate nullspace vector".into()));
        }
        work.row_scale(pivot, psi[pivot]);
        for r in 0..n_act {
            if r != pivot {
                work.row_axpy(pivot, r, psi[r]);
            }
        }
        // the pivot row is now (numerically) zero on active columns
        for j in pivot..n_act - 1 {
            work.row_swap(j, j + 1);
        }
        n_act -= 1;
        p_count += 1;
    }

    // 3. ℂ* splits: bounded search for integer vectors in the row span
    'split: loop {
        if n_act == 0 || c_act == 0 {
            break;
        }
        let active: CMat = work.w[..n_act].iter().map(|r| r[..c_act].to_vec()).collect();
        // check column independence over ℝ (discreteness of the generators)
        let mut realified: Vec<Vec<f64>> = Vec::with_capacity(2 * n_act);
        for i in 0..n_act {
            realified.push(active[i].iter().map(|z| z.re).collect());
            realified.push(active[i].iter().map(|z| z.im).collect());
        }
        if real_rank(&realified, opts.tol) != c_act {
            return Err(Error::Classification(
                "columns are not independent over the reals at the working tolerance".into(),
            ));
        }
        // pseudo-inverse data for membership in the complex row span:
        // solve φ·W = u  ⟺  Wᵀ φᵀ = uᵀ, least squares
        let wt = crate::linalg::cmat_transpose(&active); // c_act × n_act
        let wth = cmat_conj_transpose(&wt); // n_act × c_act
        let gram = cmat_mul(&wth, &wt); // n_act × n_act
        let gram_inv = cmat_inverse(&gram, 1e-13)
            .ok_or_else(|| Error::Classification("singular Gram matrix".into()))?;
        for u in integer_vectors(c_act, opts.split_bound) {
            let uc: Vec<Complex64> = u.iter().map(|&x| c64(x as f64, 0.0)).collect();
            // φᵀ = (WᴴW)⁻¹ Wᴴ uᵀ  (normal equations on Wᵀ φᵀ = uᵀ)
            let rhs: Vec<Complex64> = wth
                .iter()
                .map(|row| row.iter().zip(uc.iter()).map(|(a, b)| a * b).sum())
                .collect();
            let phi: Vec<Complex64> = gram_inv
                .iter()
                .map(|row| row.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum())
                .collect();
            // residual of φ·W − u
            let mut res = 0.0_f64;
            for j in 0..c_act {
                let mut z = c64(0.0, 0.0);
                for i in 0..n_act {
                    z += phi[i] * active[i][j];
                }
                res = res.max((z - uc[j]).norm());
            }
            if res > opts.tol * (1.0 + scale) {
                continue;
            }
            // u is an integer functional value-vector: split a ℂ* factor.
            // (a) gcd-reduce u across columns so it becomes (d, 0, ..., 0)
            let mut uvec = u.clone();
            loop {
                let nz: Vec<usize> = (0..c_act).filter(|&j| uvec[j] != 0).collect();
                if nz.len() <= 1 {
                    break;
                }
                let pivot = *nz
                    .iter()
                    .min_by_key(|&&j| (uvec[j].abs(), j))
                    .unwrap();
                for &j in &nz {
                    if j != pivot {
                        let k = -uvec[j] / uvec[pivot];
                        if k != 0 {
                            work.col_axpy(j, pivot, k);
                            uvec[j] += k * uvec[pivot];
                        }
                    }
                }
                // if any residue remains, swap roles and continue (Euclid)
                if (0..c_act).filter(|&j| uvec[j] != 0).count() == nz.len() {
                    // no progress possible without remainder steps; perform one
                    let other = *nz.iter().find(|&&j| j != pivot && uvec[j] != 0).unwrap();
                    let k = -uvec[other] / uvec[pivot];
                    let _ = k; // already applied above; loop continues
                }
            }
            let j0 = (0..c_act).find(|&j| uvec[j] != 0).unwrap();
            work.col_swap(j0, 0);
            uvec.swap(j0, 0);
            if uvec[0] < 0 {
                work.col_negate(0);
                uvec[0] = -uvec[0];
            }
            let d = uvec[0];
            // (b) realize φ as an actual row: overwrite the best pivot row
            let pivot = (0..n_act)
                .max_by(|&a, &b| phi[a].norm().total_cmp(&phi[b].norm()))
                .unwrap();
            work.row_scale(pivot, phi[pivot]);
            for r in 0..n_act {
                if r != pivot {
                    work.row_axpy(pivot, r, phi[r]);
                }
            }
            // normalize the split row so its lattice footprint is ℤ
            work.row_scale(pivot, c64(1.0 / d as f64, 0.0));
            // (c) clear the first column in the other active rows
            for r in 0..n_act {
                if r != pivot {
                    let f = work.w[r][0];
                    if f.norm() > 0.0 {
                        work.row_axpy(r, pivot, -f);
                    }
                }
            }
            // snap the split row to exactly e_1 on active cols (it is one
            // up to roundoff by construction)
            work.w[pivot][0] = c64(1.0, 0.0);
            for j in 1..c_act {
                work.w[pivot][j] = c64(0.0, 0.0);
            }
            // (d) retire the split row/column to the end of the active zone
            for j in pivot..n_act - 1 {
                work.row_swap(j, j + 1);
            }
            for j in 0..c_act - 1 {
                work.col_swap(j, j + 1);
            }
            n_act -= 1;
            c_act -= 1;
            q_count += 1;
            continue 'split;
        }
        break;
    }

    // 4. the remaining active block is toroidal (bounded certificate)
    let mut kind0 = None;
    let mut block = None;
    if n_act > 0 {
        if c_act < n_act {
            return Err(Error::Classification(
                "toroidal block has fewer generators than dimensions".into(),
            ));
        }
        let m_dim = c_act - n_act;
        if m_dim == 0 {
            return Err(Error::Classification(
                "unsplit (ℂ*)-type block survived the bounded functional search; raise split_bound".into(),
            ));
        }
        if m_dim > n_act {
            return Err(Error::Classification(
                "block rank exceeds a lattice of a complex torus".into(),
            ));
        }
        normalize_block(&mut work, n_act, c_act, m_dim, opts)?;
        let entries: CMat = work.w[..n_act].iter().map(|r| r[..c_act].to_vec()).collect();
        kind0 = Some(kind0_test(&entries, n_act, m_dim, opts.tol));
        let labels = (1..=c_act).map(|j| format!("c{j}")).collect();
        block = Some(PeriodMatrix::new(entries, labels, pm.provenance())?);
    }

    let normal_form = work.w.clone();
    Ok(CanonicalForm {
        p: p_count,
        q: q_count,
        toroidal_block: block,
        kind0,
        witness_m: work.m,
        witness_a: work.a,
        normal_form,
    })
}

/// Bring the active block into toroidal coordinates:
/// compact case (m = n): (I_n | T); noncompact: (0 I_m T; I_{n−m} R1 R2).
fn normalize_block(
    work: &mut Work,
    n_act: usize,
    c_act: usize,
    m_dim: usize,
    opts: ClassifyOptions,
) -> Result<()> {
    if m_dim == n_act {
        // compact torus: choose n columns with maximal |det| for the I part
        let sel = best_column_subset(&work.w, n_act, c_act, n_act)?;
        let sub: CMat = (0..n_act)
            .map(|i| sel.iter().map(|&j| work.w[i][j]).collect())
            .collect();
        let inv = cmat_inverse(&sub, 1e-12)
            .ok_or_else(|| Error::Classification("torus column block singular".into()))?;
        apply_row_transform(work, n_act, &inv);
        // permute selected columns to the front, in order
        permute_columns_front(work, &sel, 0);
        // fix 1×1 torus orientation: Im T > 0
        if m_dim == 1 && n_act == 1 && work.w[0][1].im < 0.0 {
            work.col_negate(1);
        }
        return Ok(());
    }

    // noncompact: find the maximal complex subspace U = V ∩ iV of the
    // real span of the columns
    let active: CMat = work.w[..n_act].iter().map(|r| r[..c_act].to_vec()).collect();
    let u_basis = maximal_complex_subspace(&active, m_dim, opts.tol)?;
    // complete to a basis of ℂ^n with standard vectors
    let mut basis: CMat = u_basis.clone();
    for j in 0..n_act {
        let mut candidate = vec![c64(0.0, 0.0); n_act];
        candidate[j] = c64(1.0, 0.0);
        let mut trial = basis.clone();
        trial.push(candidate.clone());
        let as_rows: CMat = trial.clone();
        if cmat_rank(&as_rows, 1e-10) == trial.len() {
            basis.push(candidate);
        }
        if basis.len() == n_act {
            break;
        }
    }
    if basis.len() != n_act {
        return Err(Error::Classification("could not complete block basis".into()));
    }
    // change rows by inv([u | w]) so U spans the first m coordinates
    let cols_mat: CMat = (0..n_act)
        .map(|i| (0..n_act).map(|j| basis[j][i]).collect())
        .collect();
    let minv = cmat_inverse(&cols_mat, 1e-12)
        .ok_or_else(|| Error::Classification("basis matrix singular".into()))?;
    apply_row_transform(work, n_act, &minv);

    // choose n−m columns whose bottom parts are complex-invertible and
    // which realify the bottom of all other columns
    let bottom_rows = n_act - m_dim;
    let sel = {
        let bottom: CMat = work.w[m_dim..n_act]
            .iter()
            .map(|r| r[..c_act].to_vec())
            .collect();
        best_column_subset(&bottom, bottom_rows, c_act, bottom_rows)?
    };
    // M step: bottom rows ← C⁻¹ · bottom rows
    {
        let c_sel: CMat = (0..bottom_rows)
            .map(|i| sel.iter().map(|&j| work.w[m_dim + i][j]).collect())
            .collect();
        let cinv = cmat_inverse(&c_sel, 1e-12)
            .ok_or_else(|| Error::Classification("bottom block singular".into()))?;
        apply_row_transform_range(work, m_dim, n_act, &cinv);
    }
    // clear the top parts of the selected columns
    for (bi, &j) in sel.iter().enumerate() {
        for top in 0..m_dim {
            let f = work.w[top][j];
            if f.norm() > 0.0 {
                work.row_axpy(top, m_dim + bi, -f);
            }
        }
    }
    permute_columns_front(work, &sel, 0);
    // remaining 2m columns: normalize the torus part (top m rows)
    let rest_offset = bottom_rows;
    let top: CMat = work.w[..m_dim]
        .iter()
        .map(|r| r[rest_offset..c_act].to_vec())
        .collect();
    let sel_t = best_column_subset(&top, m_dim, c_act - rest_offset, m_dim)?;
    let sel_abs: Vec<usize> = sel_t.iter().map(|&j| j + rest_offset).collect();
    {
        let t_sel: CMat = (0..m_dim)
            .map(|i| sel_abs.iter().map(|&j| work.w[i][j]).collect())
            .collect();
        let tinv = cmat_inverse(&t_sel, 1e-12)
            .ok_or_else(|| Error::Classification("torus block singular".into()))?;
        apply_row_transform_range(work, 0, m_dim, &tinv);
    }
    permute_columns_front(work, &sel_abs, rest_offset);
    // orientation of a 1-dimensional torus part
    if m_dim == 1 {
        let t_col = rest_offset + 1;
        if t_col < c_act && work.w[0][t_col].im < 0.0 {
            work.col_negate(t_col);
        }
    }
    Ok(())
}

/// Columns (indices into 0..c_act) whose square submatrix over the given
/// rows has maximal |det|; deterministic lexicographic tie-break.
fn best_column_subset(
    rows_mat: &CMat,
    n_rows: usize,
    c_act: usize,
    take: usize,
) -> Result<Vec<usize>> {
    fn subsets(c: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] + (k - i) < c {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for sel in subsets(c_act, take) {
        let sub: CMat = (0..n_rows)
            .map(|i| sel.iter().map(|&j| rows_mat[i][j]).collect())
            .collect();
        let det = cmat_det(&sub);
        let mag = det.norm();
        if best.as_ref().is_none_or(|(b, _)| mag > *b + 1e-15) {
            best = Some((mag, sel));
        }
    }
    let (mag, sel) = best.ok_or_else(|| Error::Classification("no column subset".into()))?;
    if mag < 1e-12 {
        return Err(Error::Classification(
            "all column subsets numerically singular".into(),
        ));
    }
    Ok(sel)
}

fn cmat_det(a: &CMat) -> Complex64 {
    let n = a.len();
    let mut w = a.clone();
    let mut det = c64(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| w[i][k].norm().total_cmp(&w[j][k].norm()))
            .unwrap();
        if w[piv][k].norm() == 0.0 {
            return c64(0.0, 0.0);
        }
        if piv != k {
            w.swap(piv, k);
            det = -det;
        }
        det *= w[k][k];
        for i in k + 1..n {
            let f = w[i][k] / w[k][k];
            for j in k..n {
                let v = w[k][j];
                w[i][j] -= f * v;
            }
        }
    }
    det
}

/// Replace rows 0..n_act by `t · rows` (t is n_act×n_act).
fn apply_row_transform(work: &mut Work, n_act: usize, t: &CMat) {
    apply_row_transform_range(work, 0, n_act, t);
}

fn apply_row_transform_range(work: &mut Work, lo: usize, hi: usize, t: &CMat) {
    let k = hi - lo;
    let cols = work.cols();
    let mcols = work.m[0].len();
    let mut new_w = vec![vec![c64(0.0, 0.0); cols]; k];
    let mut new_m = vec![vec![c64(0.0, 0.0); mcols]; k];
    for i in 0..k {
        for l in 0..k {
            let f = t[i][l];
            if f.norm() == 0.0 {
                continue;
            }
            for j in 0..cols {
                new_w[i][j] += f * work.w[lo + l][j];
            }
            for j in 0..mcols {
                new_m[i][j] += f * work.m[lo + l][j];
            }
        }
    }
    for (i, (w_row, m_row)) in new_w.into_iter().zip(new_m).enumerate() {
        work.w[lo + i] = w_row;
        work.m[lo + i] = m_row;
    }
}

/// Permute the selected columns (ascending indices) to start at `offset`,
/// preserving their relative order.
fn permute_columns_front(work: &mut Work, sel: &[usize], offset: usize) {
    let mut sel = sel.to_vec();
    for (slot, _) in (offset..offset + sel.len()).enumerate() {
        let target = offset + slot;
        let j = sel[slot];
        if j != target {
            work.col_swap(j, target);
            // update later selections that pointed at the swapped position
            for other in sel.iter_mut().skip(slot + 1) {
                if *other == target {
                    *other = j;
                }
            }
        }
    }
}

/// Complex basis (size m) of the maximal complex subspace V ∩ iV of the
/// real span V of the columns.
fn maximal_complex_subspace(active: &CMat, m_dim: usize, tol: f64) -> Result<CMat> {
    let n = active.len();
    let c = active[0].len();
    // realify columns into ℝ^{2n}
    let col_vec = |j: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * n);
        for i in 0..n {
            v.push(active[i][j].re);
            v.push(active[i][j].im);
        }
        v
    };
    let jmul = |v: &[f64]| -> Vec<f64> {
        // multiplication by i in the (re, im) interleaving
        let mut out = vec![0.0; v.len()];
        for i in 0..v.len() / 2 {
            out[2 * i] = -v[2 * i + 1];
            out[2 * i + 1] = v[2 * i];
        }
        out
    };
    // solve B x = J B y  ⇔  [B | −JB] (x; y) = 0
    let mut system = vec![vec![0.0; 2 * c]; 2 * n];
    for j in 0..c {
        let b = col_vec(j);
        let jb = jmul(&b);
        for i in 0..2 * n {
            system[i][j] = b[i];
            system[i][c + j] = -jb[i];
        }
    }
    let null = crate::linalg::real_nullspace(&system, tol);
    if null.len() != 2 * m_dim {
        return Err(Error::Classification(format!(
            "maximal complex subspace has unexpected dimension {} (expected {})",
            null.len(),
            2 * m_dim
        )));
    }
    // U vectors = B x for each kernel element; extract a complex basis
    let mut real_vecs: Vec<Vec<f64>> = Vec::new();
    for kern in &null {
        let mut v = vec![0.0; 2 * n];
        for j in 0..c {
            let b = col_vec(j);
            for i in 0..2 * n {
                v[i] += kern[j] * b[i];
            }
        }
        real_vecs.push(v);
    }
    let mut basis: CMat = Vec::new();
    for v in &real_vecs {
        let cv: Vec<Complex64> = (0..n).map(|i| c64(v[2 * i], v[2 * i + 1])).collect();
        let norm: f64 = cv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < tol {
            continue;
        }
        let cv: Vec<Complex64> = cv.iter().map(|z| z / norm).collect();
        let mut trial = basis.clone();
        trial.push(cv.clone());
        if cmat_rank(&trial, 1e-8) == trial.len() {
            basis.push(cv);
        }
        if basis.len() == m_dim {
            break;
        }
    }
    if basis.len() != m_dim {
        return Err(Error::Classification(
            "could not extract complex basis of the maximal subspace".into(),
        ));
    }
    Ok(basis)
}

/// Riemann-relation test on the torus part: with columns
/// (0 I_m T; ...) the block (I_m T) must have T symmetric with positive
/// definite imaginary part.
fn kind0_test(entries: &CMat, n_act: usize, m_dim: usize, tol: f64) -> bool {
    let offset = if m_dim == n_act { m_dim } else { (n_act - m_dim) + m_dim };
    // T occupies the last m columns of the torus rows
    let t: CMat = (0..m_dim)
        .map(|i| (0..m_dim).map(|j| entries[i][offset + j]).collect())
        .collect();
    let scale = t
        .iter()
        .flat_map(|r| r.iter().map(|z| z.norm()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for i in 0..m_dim {
        for j in 0..m_dim {
            if (t[i][j] - t[j][i]).norm() > 1e-7 * scale {
                return false;
            }
        }
    }
    // positive definiteness of Im T via leading principal minors
    for k in 1..=m_dim {
        let sub: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| t[i][j].im).collect())
            .collect();
        if real_det(&sub) <= tol {
            return false;
        }
    }
    true
}
