//! Meromorphic functions on the torus as first-class data: divisor
//! extraction by the argument principle, σ-quotient construction with a
//! prescribed divisor, the "f ≡ c(S̄) mod 𝔪" congruence test, the period
//! map, forward verification of the generalized Abel theorem, and the
//! fundamental symmetric functions.

pub mod expr;

pub use expr::{eval, local_expansion, order_of, parse, MeroExpr};

use crate::albanese::{build_period_matrix, PeriodMatrix};
use crate::curve::{genus, residue_pairing, SingularCurveSpec};
use crate::divisor::Multiconstant;
use crate::elliptic::{
    make_context, second_kind_differential, segment_integral, third_kind_differential,
    Differential, Truncation, WeierstrassContext,
};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, TorusPoint};
use num_complex::Complex64;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A located divisor on the fundamental parallelogram: canonical torus
/// points with integer multiplicities, sorted by (t, s) coordinates.
#[derive(Debug, Clone)]
pub struct TorusDivisor {
    pub points: Vec<(TorusPoint, i64)>,
}

impl TorusDivisor {
    pub fn degree(&self) -> i64 {
        self.points.iter().map(|(_, m)| m).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplicity at a location, matched within `tol` (mod the lattice).
    pub fn multiplicity_at(&self, z: Complex64, lattice: &Lattice, tol: f64) -> i64 {
        let zc = lattice.canonicalize(z);
        self.points
            .iter()
            .filter(|(p, _)| {
                let rel = p.rep() - zc;
                let (m, n) = lattice.nearest_point(rel);
                (rel - c64(m as f64, 0.0) - lattice.tau() * (n as f64)).norm() < tol
            })
            .map(|(_, m)| m)
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "points": self
                .points
                .iter()
                .map(|(p, m)| {
                    serde_json::json!({
                        "position": [p.rep().re, p.rep().im],
                        "multiplicity": m,
                    })
                })
                .collect::<Vec<_>>(),
            "degree": self.degree(),
        })
    }
}

/// Winding number of expr along the boundary of the coordinate rectangle
/// [s0, s1]×[t0, t1] (anticlockwise). Fails with a path error when the
/// function gets too close to 0/∞ on the boundary.
fn winding_rectangle(
    e: &MeroExpr,
    ctx: &WeierstrassContext,
    lat: &Lattice,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
) -> Result<i64> {
    use std::f64::consts::PI;
    let corners = [
        lat.from_coords(s0, t0),
        lat.from_coords(s1, t0),
        lat.from_coords(s1, t1),
        lat.from_coords(s0, t1),
    ];
    let mut n = 24usize;
    let mut prev: Option<i64> = None;
    'outer: while n <= 1 << 12 {
        let steps = n;
        let mut total = 0.0_f64;
        let mut last_arg: Option<f64> = None;
        for edge in 0..4 {
            let a = corners[edge];
            let b = corners[(edge + 1) % 4];
            for k in 0..steps {
                let t = k as f64 / steps as f64;
                let z = a + (b - a) * t;
                let v = eval(e, ctx, z).map_err(|err| match err {
                    Error::Pole { at, .. } => {
                        Error::Path(format!("pole on subdivision boundary at {at}"))
                    }
                    other => other,
                })?;
                if !v.is_finite() || v.norm() < 1e-250 {
                    return Err(Error::Path(format!(
                        "function vanishes/overflows on subdivision boundary at {z}"
                    )));
                }
                let arg = v.arg();
                if let Some(prev_arg) = last_arg {
                    let mut d = arg - prev_arg;
                    while d > PI {
                        d -= 2.0 * PI;
                    }
                    while d < -PI {
                        d += 2.0 * PI;
                    }
                    if d.abs() > 2.5 {
                        n *= 2;
                        continue 'outer;
                    }
                    total += d;
                }
                last_arg = Some(arg);
            }
        }
        // close the loop back to the first sample
        let first = corners[0];
        let v = eval(e, ctx, first)?;
        if let Some(prev_arg) = last_arg {
            let mut d = v.arg() - prev_arg;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            total += d;
        }
        let w = (total / (2.0 * PI)).round() as i64;
        if (total / (2.0 * PI) - w as f64).abs() > 0.2 {
            n *= 2;
            continue;
        }
        if prev == Some(w) {
            return Ok(w);
        }
        prev = Some(w);
        n *= 2;
    }
    Err(Error::Accuracy("boundary winding did not stabilize".into()))
}

/// Zeros and poles of expr over the fundamental parallelogram, located by
/// recursive argument-principle subdivision refined to `tol`. The total
/// degree of an elliptic expression is checked to be zero.
///
/// Cells with winding 0 are discarded only when they contain no leaf
/// singular candidate; a cell hiding a cancelling zero/pole pair around
/// a ℘- or σ-leaf point keeps getting subdivided until the pair splits.
/// Poles sitting at zeros of a compound denominator are resolved through
/// that denominator's own leaf candidates.
pub fn divisor_of(e: &MeroExpr, ctx: &WeierstrassContext, tol: f64) -> Result<TorusDivisor> {
    let lat = ctx.lattice();
    let candidates: Vec<(f64, f64)> = e
        .singular_candidates(&lat)
        .iter()
        .map(|&z| lat.coords(z))
        .collect();
    // does the half-open coordinate box contain a candidate (mod Z^2)?
    let cell_has_candidate = |s0: f64, s1: f64, t0: f64, t1: f64| -> bool {
        candidates.iter().any(|&(cs, ct)| {
            let s = cs + (s0 - cs).ceil();
            let t = ct + (t0 - ct).ceil();
            s >= s0 && s < s1 && t >= t0 && t < t1
        })
    };
    // jittered grid anchors avoid zeros sitting on subdivision edges
    let jitters = [
        (0.0131, 0.0077),
        (0.0219, 0.0151),
        (0.0347, 0.0233),
        (0.0453, 0.0371),
        (0.0561, 0.0439),
    ];
    let mut last_err = None;
    'jitter: for &(js, jt) in &jitters {
        let mut found: Vec<(Complex64, i64)> = Vec::new();
        // stack of (s0, s1, t0, t1, depth)
        let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                stack.push((
                    js + i as f64 / 8.0,
                    js + (i + 1) as f64 / 8.0,
                    jt + j as f64 / 8.0,
                    jt + (j + 1) as f64 / 8.0,
                    1,
                ));
            }
        }
        while let Some((s0, s1, t0, t1, depth)) = stack.pop() {
            let w = match winding_rectangle(e, ctx, &lat, s0, s1, t0, t1) {
                Ok(w) => w,
                Err(Error::Path(msg)) => {
                    last_err = Some(Error::Path(msg));
                    continue 'jitter;
                }
                Err(Error::Accuracy(msg)) => {
                    // a zero too close to this grid's edges; try the next
                    // global jitter
                    last_err = Some(Error::Accuracy(msg));
                    continue 'jitter;
                }
                Err(other) => return Err(other),
            };
            if w == 0 && !cell_has_candidate(s0, s1, t0, t1) {
                continue;
            }
            let z_size = (lat.from_coords(s1, t1) - lat.from_coords(s0, t0)).norm();
            if z_size < tol || depth >= 40 {
                if depth >= 40 && z_size >= tol {
                    return Err(Error::Accuracy(
                        "subdivision depth exhausted before reaching tolerance".into(),
                    ));
                }
                if w != 0 {
                    let center = lat.from_coords((s0 + s1) / 2.0, (t0 + t1) / 2.0);
                    found.push((center, w));
                }
                continue;
            }
            let sm = (s0 + s1) / 2.0;
            let tm = (t0 + t1) / 2.0;
            stack.push((s0, sm, t0, tm, depth + 1));
            stack.push((sm, s1, t0, tm, depth + 1));
            stack.push((s0, sm, tm, t1, depth + 1));
            stack.push((sm, s1, tm, t1, depth + 1));
        }
        // merge points that refined to the same location
        let mut merged: Vec<(Complex64, i64)> = Vec::new();
        for (z, w) in found {
            let zc = lat.canonicalize(z);
            if let Some(slot) = merged.iter_mut().find(|(p, _)| {
                let rel = *p - zc;
                let (m, n) = lat.nearest_point(rel);
                (rel - c64(m as f64, 0.0) - lat.tau() * (n as f64)).norm() < 10.0 * tol
            }) {
                slot.1 += w;
            } else {
                merged.push((zc, w));
            }
        }
        merged.retain(|(_, w)| *w != 0);
        let degree: i64 = merged.iter().map(|(_, w)| w).sum();
        if degree != 0 {
            return Err(Error::Domain(format!(
                "expression is not elliptic: divisor degree {degree} over the cell"
            )));
        }
        let mut points: Vec<(TorusPoint, i64)> = merged
            .into_iter()
            .map(|(z, w)| (TorusPoint::new(z, lat), w))
            .collect();
        points.sort_by(|(a, _), (b, _)| {
            let ca = lat.coords(a.rep());
            let cb = lat.coords(b.rep());
            (ca.1, ca.0).partial_cmp(&(cb.1, cb.0)).unwrap()
        });
        return Ok(TorusDivisor { points });
    }
    Err(last_err.unwrap_or_else(|| Error::Accuracy("subdivision failed on all jitters".into())))
}

/// σ-quotient with the prescribed zeros and poles. Representatives are
/// shifted by exact lattice vectors so that Σ zeros = Σ poles; the
/// result is checked to be elliptic.
pub fn function_with_divisor(
    ctx: &WeierstrassContext,
    zeros: &[TorusPoint],
    poles: &[TorusPoint],
) -> Result<MeroExpr> {
    if zeros.len() != poles.len() {
        return Err(Error::Domain(format!(
            "zero and pole counts must match ({} vs {})",
            zeros.len(),
            poles.len()
        )));
    }
    if zeros.is_empty() {
        return Ok(MeroExpr::Const(c64(1.0, 0.0)));
    }
    let lat = ctx.lattice();
    let tau = ctx.tau();
    let sum_z: Complex64 = zeros.iter().map(|p| p.rep()).sum();
    let sum_p: Complex64 = poles.iter().map(|p| p.rep()).sum();
    let delta = sum_z - sum_p;
    let (m, n) = lat.nearest_point(delta);
    let lattice_part = c64(m as f64, 0.0) + tau * (n as f64);
    if (delta - lattice_part).norm() > 1e-8 {
        return Err(Error::Domain(format!(
            "Abel condition violated: zero/pole sums differ by {delta}, not a lattice vector"
        )));
    }
    let mut zero_reps: Vec<Complex64> = zeros.iter().map(|p| p.rep()).collect();
    zero_reps[0] -= lattice_part;
    let pole_reps: Vec<Complex64> = poles.iter().map(|p| p.rep()).collect();
    let chain = |reps: &[Complex64]| -> MeroExpr {
        let mut it = reps.iter();
        let first = MeroExpr::Sigma { shift: *it.next().unwrap() };
        it.fold(first, |acc, &r| {
            MeroExpr::Mul(Box::new(acc), Box::new(MeroExpr::Sigma { shift: r }))
        })
    };
    let f = MeroExpr::Div(Box::new(chain(&zero_reps)), Box::new(chain(&pole_reps)));
    // periodicity check at a point away from the divisor
    let probe = (0..24)
        .map(|k| {
            lat.from_coords(
                (0.137 + 0.21 * k as f64).fract(),
                (0.293 + 0.17 * k as f64).fract(),
            )
        })
        .find(|z| {
            zero_reps
                .iter()
                .chain(pole_reps.iter())
                .all(|p| (lat.canonicalize(z - p)).norm() > 0.05 && {
                    let r = lat.canonicalize(z - p);
                    (r - c64(1.0, 0.0)).norm() > 0.05 && (r - tau).norm() > 0.05
                        && (r - c64(1.0, 0.0) - tau).norm() > 0.05
                })
        })
        .ok_or_else(|| Error::Accuracy("no probe point clear of the divisor".into()))?;
    let v0 = eval(&f, ctx, probe)?;
    for shift in [c64(1.0, 0.0), tau] {
        let v1 = eval(&f, ctx, probe + shift)?;
        if (v1 - v0).norm() > 1e-8 * v0.norm().max(1.0) {
            return Err(Error::Accuracy(format!(
                "sigma quotient failed the periodicity check: residual {}",
                (v1 - v0).norm()
            )));
        }
    }
    Ok(f)
}

/// Test f ≡ c(S̄) mod 𝔪: on every glued class the values agree and are
/// nonzero, and at every point the Laurent coefficients of f − c_Q at
/// orders 1 .. 𝔪(P)−1 vanish. Returns the multiconstant iff all classes
/// pass.
pub fn check_mod_m(
    e: &MeroExpr,
    spec: &SingularCurveSpec,
    tol: f64,
) -> Result<Option<Multiconstant>> {
    let lat = spec
        .torus_lattice()
        .ok_or_else(|| Error::Capability("mod-m test needs an explicit torus base".into()))?;
    let ctx = make_context(lat, Truncation::default())?;
    let mut values = Vec::with_capacity(spec.classes().len());
    for class in spec.classes() {
        let mut c_q: Option<Complex64> = None;
        for id in class {
            let p = spec.torus_point(id).unwrap();
            let v = eval(e, &ctx, p.rep()).map_err(|err| match err {
                Error::Pole { at, .. } => {
                    Error::Domain(format!("function has a singularity at the S point {at}"))
                }
                other => other,
            })?;
            if v.norm() < tol {
                return Ok(None); // c_Q must be nonzero
            }
            match c_q {
                None => c_q = Some(v),
                Some(c) => {
                    if (v - c).norm() > tol * c.norm().max(1.0) {
                        return Ok(None);
                    }
                }
            }
        }
        let c_q = c_q.unwrap();
        // higher-order vanishing at each point of the class
        for id in class {
            let m = spec.modulus().multiplicity(id).unwrap();
            if m < 2 {
                continue;
            }
            let p = spec.torus_point(id).unwrap();
            let co = local_expansion(e, &ctx, p.rep(), m - 1)?;
            let mid = (m - 1) as usize;
            let scale = c_q.norm().max(1.0);
            for j in 1..m as usize {
                // negative indices must vanish too (no pole at S)
                if co[mid - j].norm() > tol * scale {
                    return Err(Error::Domain(format!(
                        "function has a pole at the S point {}",
                        p.rep()
                    )));
                }
                if co[mid + j].norm() > tol * scale {
                    return Ok(None);
                }
            }
        }
        values.push(c_q);
    }
    Ok(Some(Multiconstant::new(values)?))
}

/// Differential basis matching the closed-form row order: dz, one
/// third-kind form per residue pair, then the higher-order forms.
fn differential_basis(
    spec: &SingularCurveSpec,
    ctx: &WeierstrassContext,
) -> Result<Vec<Differential>> {
    let mut out = vec![Differential::holomorphic()];
    for (a, b) in residue_pairing(spec) {
        let za = spec.torus_point(&a).unwrap();
        let zb = spec.torus_point(&b).unwrap();
        out.push(third_kind_differential(ctx, za, zb)?);
    }
    for point in spec.points() {
        let m = spec.modulus().multiplicity(&point.id).unwrap();
        let z0 = spec.torus_point(&point.id).unwrap();
        for order in 2..=m {
            out.push(second_kind_differential(ctx, z0, order)?);
        }
    }
    Ok(out)
}

/// Deterministic base point for the period map: the first candidate on a
/// fixed grid that keeps a safe distance from every point of S.
pub fn base_point(spec: &SingularCurveSpec) -> Result<TorusPoint> {
    let lat = spec
        .torus_lattice()
        .ok_or_else(|| Error::Capability("period map needs an explicit torus base".into()))?;
    let tau = lat.tau();
    let shortest = tau.norm().min(1.0).min((tau - c64(1.0, 0.0)).norm());
    'cand: for k in 0..32 {
        let s = (0.318 + 0.187 * k as f64).fract();
        let t = (0.577 + 0.131 * k as f64).fract();
        let z = lat.from_coords(s, t);
        for p in spec.points() {
            let rel = z - p.position.unwrap();
            let (m, n) = lat.nearest_point(rel);
            let d = (rel - c64(m as f64, 0.0) - tau * (n as f64)).norm();
            if d < 0.12 * shortest {
                continue 'cand;
            }
        }
        return Ok(TorusPoint::new(z, lat));
    }
    Err(Error::Domain("no admissible base point found".into()))
}

/// Integrate a differential along a straight segment, detouring around
/// poles when necessary.
fn integrate_with_reroute(
    ctx: &WeierstrassContext,
    d: &Differential,
    a: Complex64,
    b: Complex64,
    depth: u32,
) -> Result<Complex64> {
    let margin = 0.008 * ctx.tau().im.min(1.0);
    match segment_integral(ctx, d, a, b, margin) {
        Ok(v) => Ok(v),
        Err(Error::Path(_)) if depth < 6 => {
            let dir = b - a;
            let perp = Complex64::new(0.0, 1.0) * dir / dir.norm();
            for sign in [1.0, -1.0] {
                let mid = (a + b) / 2.0 + perp * (sign * 4.0 * margin);
                let left = integrate_with_reroute(ctx, d, a, mid, depth + 1);
                let right = integrate_with_reroute(ctx, d, mid, b, depth + 1);
                if let (Ok(l), Ok(r)) = (left, right) {
                    return Ok(l + r);
                }
            }
            Err(Error::Path("rerouting around poles failed".into()))
        }
        Err(e) => Err(e),
    }
}

/// The period map φ(P) ∈ ℂ^π with the fixed base point: the dz integral
/// followed by the residue-pair and higher-order components, computed by
/// quadrature along concrete paths in the cut domain.
pub fn period_map(spec: &SingularCurveSpec, p: TorusPoint) -> Result<Vec<Complex64>> {
    let lat = spec
        .torus_lattice()
        .ok_or_else(|| Error::Capability("period map needs an explicit torus base".into()))?;
    let ctx = make_context(lat, Truncation::default())?;
    for s in spec.points() {
        if (lat.canonicalize(s.position.unwrap()) - p.rep()).norm() < 1e-10 {
            return Err(Error::Domain("period map is undefined on S".into()));
        }
    }
    let p0 = base_point(spec)?;
    let basis = differential_basis(spec, &ctx)?;
    let mut out = Vec::with_capacity(basis.len());
    out.push(crate::elliptic::abel_integral(&ctx, p0, p));
    for d in basis.iter().skip(1) {
        out.push(integrate_with_reroute(&ctx, d, p0.rep(), p.rep(), 0)?);
    }
    Ok(out)
}

/// Distance from v to the lattice spanned by the period-matrix columns,
/// by bounded integer search around the real least-squares solution.
pub fn lattice_residual(pm: &PeriodMatrix, v: &[Complex64], bound: i64) -> f64 {
    let rows = pm.rows();
    let cols = pm.cols();
    // realify: minimize ||v - P c|| over c in Z^cols
    let mut a = vec![vec![0.0_f64; cols]; 2 * rows];
    for i in 0..rows {
        for j in 0..cols {
            a[2 * i][j] = pm.get(i, j).re;
            a[2 * i + 1][j] = pm.get(i, j).im;
        }
    }
    let mut b = vec![0.0_f64; 2 * rows];
    for i in 0..rows {
        b[2 * i] = v[i].re;
        b[2 * i + 1] = v[i].im;
    }
    // normal equations (cols x cols)
    let mut ata = vec![vec![0.0_f64; cols]; cols];
    let mut atb = vec![0.0_f64; cols];
    for i in 0..cols {
        for j in 0..cols {
            ata[i][j] = (0..2 * rows).map(|r| a[r][i] * a[r][j]).sum();
        }
        atb[i] = (0..2 * rows).map(|r| a[r][i] * b[r]).sum();
    }
    let c_ls = solve_real(&ata, &atb).unwrap_or_else(|| vec![0.0; cols]);
    let center: Vec<i64> = c_ls
        .iter()
        .map(|x| x.round().clamp(-bound as f64, bound as f64) as i64)
        .collect();
    // search a ±2 box around the rounded solution
    let mut best = f64::INFINITY;
    let mut offsets = vec![-2i64; cols];
    loop {
        let cand: Vec<i64> = center
            .iter()
            .zip(offsets.iter())
            .map(|(c, o)| (c + o).clamp(-bound, bound))
            .collect();
        let mut norm2 = 0.0;
        for r in 0..2 * rows {
            let mut s = b[r];
            for j in 0..cols {
                s -= a[r][j] * cand[j] as f64;
            }
            norm2 += s * s;
        }
        best = best.min(norm2.sqrt());
        let mut k = cols;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if offsets[k] < 2 {
                offsets[k] += 1;
                for slot in offsets.iter_mut().skip(k + 1) {
                    *slot = -2;
                }
                break;
            }
        }
    }
}

fn solve_real(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b.iter())
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[piv][k].abs() < 1e-12 {
            return None;
        }
        m.swap(k, piv);
        for i in 0..n {
            if i != k {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    let v = m[k][j];
                    m[i][j] -= f * v;
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Outcome of the forward Abel verification.
#[derive(Debug, Clone)]
pub struct AbelReport {
    pub divisor: TorusDivisor,
    pub multiconstant: Option<Multiconstant>,
    /// Σ D(P)·φ(P) over the divisor.
    pub period_map_value: Vec<Complex64>,
    /// Distance of the value from the period lattice Γ.
    pub residual: f64,
    pub passes: bool,
}

impl AbelReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "divisor": self.divisor.to_json(),
            "multiconstant": self
                .multiconstant
                .as_ref()
                .map(|mc| mc.values.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()),
            "period_map_value": self
                .period_map_value
                .iter()
                .map(|z| [z.re, z.im])
                .collect::<Vec<_>>(),
            "residual": self.residual,
            "passes": self.passes,
        })
    }
}

/// Forward direction of the generalized Abel theorem: extract D = (f),
/// evaluate Σ D(P)·φ(P), and test membership in the period lattice at
/// `tol`. The multiconstant hypothesis is evaluated and reported; the
/// lattice test is performed either way.
pub fn abel_verify(spec: &SingularCurveSpec, e: &MeroExpr, tol: f64) -> Result<AbelReport> {
    let lat = spec
        .torus_lattice()
        .ok_or_else(|| Error::Capability("Abel verification needs a torus base".into()))?;
    let ctx = make_context(lat, Truncation::default())?;
    let multiconstant = check_mod_m(e, spec, 1e-7)?;
    let divisor = divisor_of(e, &ctx, 1e-8)?;
    let gd = genus(spec);
    let mut value = vec![c64(0.0, 0.0); gd.pi as usize];
    for (point, mult) in &divisor.points {
        let phi = period_map(spec, *point)?;
        for (acc, comp) in value.iter_mut().zip(phi.iter()) {
            *acc += comp * (*mult as f64);
        }
    }
    let pm = build_period_matrix(spec)?;
    let residual = lattice_residual(&pm, &value, 20);
    Ok(AbelReport {
        divisor,
        multiconstant,
        period_map_value: value,
        residual,
        passes: residual < tol,
    })
}

/// Fundamental symmetric functions: ξ_k = (−1)^k e_k(x(P_1..P_π)) and the
/// same for η with y, i.e. the coefficients of ∏(X − x(P_i)).
pub fn symmetric_values(
    spec: &SingularCurveSpec,
    x: &MeroExpr,
    y: &MeroExpr,
    points: &[TorusPoint],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let gd = genus(spec);
    if points.len() != gd.pi as usize {
        return Err(Error::Structure(format!(
            "expected {} points (the genus), got {}",
            gd.pi,
            points.len()
        )));
    }
    let lat = spec
        .torus_lattice()
        .ok_or_else(|| Error::Capability("symmetric values need a torus base".into()))?;
    let ctx = make_context(lat, Truncation::default())?;
    let values = |f: &MeroExpr| -> Result<Vec<Complex64>> {
        points.iter().map(|p| eval(f, &ctx, p.rep())).collect()
    };
    let coefficients = |roots: &[Complex64]| -> Vec<Complex64> {
        // ∏(X − r_i) = X^n + c_1 X^{n−1} + ... + c_n
        let mut co = vec![c64(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![c64(0.0, 0.0); co.len() + 1];
            for (i, &c) in co.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            co = next;
        }
        co[1..].to_vec()
    };
    Ok((coefficients(&values(x)?), coefficients(&values(y)?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_and_lat() -> (WeierstrassContext, Lattice) {
        let lat = Lattice::new(c64(0.1, 1.3)).unwrap();
        (make_context(lat, Truncation::default()).unwrap(), lat)
    }

    #[test]
    fn divisor_of_constants_is_empty() {
        let (ctx, _) = ctx_and_lat();
        let e = parse("3").unwrap();
        let d = divisor_of(&e, &ctx, 1e-8).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn divisor_of_wp_difference() {
        // wp(z) − wp(0.3): simple zeros at ±0.3, double pole at 0
        let (ctx, lat) = ctx_and_lat();
        let e = parse("wp(z) - wp(0.3)").unwrap();
        let d = divisor_of(&e, &ctx, 1e-8).unwrap();
        assert_eq!(d.degree(), 0);
        assert_eq!(d.multiplicity_at(c64(0.3, 0.0), &lat, 1e-6), 1);
        assert_eq!(d.multiplicity_at(c64(-0.3, 0.0), &lat, 1e-6), 1);
        assert_eq!(d.multiplicity_at(c64(0.0, 0.0), &lat, 1e-6), -2);
        assert_eq!(d.points.len(), 3);
    }

    #[test]
    fn divisor_roundtrip_through_construction() {
        let (ctx, lat) = ctx_and_lat();
        let zeros = [c64(0.27, 0.31), c64(0.66, 0.52)];
        let poles = [c64(0.13, 0.77), c64(0.8, 0.06)];
        // enforce the Abel condition: adjust one pole so sums agree
        let fixed_pole = zeros[0] + zeros[1] - poles[0];
        let zs: Vec<TorusPoint> = zeros.iter().map(|&z| TorusPoint::new(z, lat)).collect();
        let ps = vec![
            TorusPoint::new(poles[0], lat),
            TorusPoint::new(fixed_pole, lat),
        ];
        let f = function_with_divisor(&ctx, &zs, &ps).unwrap();
        let d = divisor_of(&f, &ctx, 1e-8).unwrap();
        for z in &zs {
            assert_eq!(d.multiplicity_at(z.rep(), &lat, 1e-6), 1);
        }
        for p in &ps {
            assert_eq!(d.multiplicity_at(p.rep(), &lat, 1e-6), -1);
        }
    }

    #[test]
    fn function_with_divisor_rejects_bad_data() {
        let (ctx, lat) = ctx_and_lat();
        let z = TorusPoint::new(c64(0.3, 0.2), lat);
        let p = TorusPoint::new(c64(0.1, 0.5), lat);
        assert!(function_with_divisor(&ctx, &[z], &[]).is_err());
        // Abel condition violated
        assert!(matches!(
            function_with_divisor(&ctx, &[z], &[p]),
            Err(Error::Domain(_))
        ));
        // trivial divisor gives the constant 1
        let f = function_with_divisor(&ctx, &[], &[]).unwrap();
        assert_eq!(f, MeroExpr::Const(c64(1.0, 0.0)));
    }

    #[test]
    fn lattice_vector_offsets_are_repaired() {
        // zero/pole sums differing by a lattice vector: representatives
        // get shifted, the result is elliptic
        let (ctx, lat) = ctx_and_lat();
        let tau = lat.tau();
        let zs = vec![
            TorusPoint::new(c64(0.2, 0.1), lat),
            TorusPoint::new(c64(0.7, 0.4), lat),
        ];
        // same points shifted so the sums differ by exactly 1 + tau
        let ps = [
            TorusPoint::new(c64(0.2, 0.1) + c64(1.0, 0.0), lat),
            TorusPoint::new(c64(0.7, 0.4) + tau, lat),
        ];
        // canonicalization makes these identical to zs; displace slightly
        // to keep a genuine quotient while the sums still close up
        let ps = vec![
            TorusPoint::new(ps[0].rep() + c64(0.11, 0.0), lat),
            TorusPoint::new(ps[1].rep() - c64(0.11, 0.0), lat),
        ];
        let f = function_with_divisor(&ctx, &zs, &ps).unwrap();
        let d = divisor_of(&f, &ctx, 1e-8).unwrap();
        assert_eq!(d.degree(), 0);
        assert_eq!(d.points.len(), 4);
    }

    fn node_spec() -> SingularCurveSpec {
        SingularCurveSpec::node(c64(0.1, 1.3), c64(0.62, 0.41), c64(0.17, 0.23)).unwrap()
    }

    /// σ-quotient with f(P1) = f(P2) by construction: divisor symmetric
    /// about the midpoint of the glued points.
    fn symmetric_function(spec: &SingularCurveSpec, w_a: Complex64, w_b: Complex64) -> MeroExpr {
        let z1 = spec.torus_point("P1").unwrap().rep();
        let z2 = spec.torus_point("P2").unwrap().rep();
        let c = (z1 + z2) / 2.0;
        MeroExpr::Div(
            Box::new(MeroExpr::Mul(
                Box::new(MeroExpr::Sigma { shift: c + w_a }),
                Box::new(MeroExpr::Sigma { shift: c - w_a }),
            )),
            Box::new(MeroExpr::Mul(
                Box::new(MeroExpr::Sigma { shift: c + w_b }),
                Box::new(MeroExpr::Sigma { shift: c - w_b }),
            )),
        )
    }

    #[test]
    fn check_mod_m_on_node() {
        let spec = node_spec();
        let f = symmetric_function(&spec, c64(0.21, 0.11), c64(0.05, 0.33));
        let mc = check_mod_m(&f, &spec, 1e-7).unwrap();
        assert!(mc.is_some(), "symmetric sigma quotient must pass");
        // generic quotient does not
        let lat = spec.torus_lattice().unwrap();
        let ctx = make_context(lat, Truncation::default()).unwrap();
        let zs = vec![
            TorusPoint::new(c64(0.27, 0.31), lat),
            TorusPoint::new(c64(0.66, 0.52), lat),
        ];
        let ps = vec![
            TorusPoint::new(c64(0.13, 0.77), lat),
            TorusPoint::new(c64(0.27, 0.31) + c64(0.66, 0.52) - c64(0.13, 0.77), lat),
        ];
        let g = function_with_divisor(&ctx, &zs, &ps).unwrap();
        assert!(check_mod_m(&g, &spec, 1e-7).unwrap().is_none());
    }

    #[test]
    fn check_mod_m_on_cusp() {
        // f with f'(P) = 0 passes, generic f fails
        let tau = c64(0.1, 1.3);
        let z0 = c64(0.37, 0.51);
        let spec = SingularCurveSpec::cusp(tau, z0).unwrap();
        // wp(z − z0) + const has wp'(z0 − z0 + w)… use f = wp(z - z0 - w0)
        // with wp'(w0) = 0: the half-period w0 = 1/2 is a critical point.
        let f = MeroExpr::Add(
            Box::new(MeroExpr::Wp { shift: z0 - c64(0.5, 0.0) }),
            Box::new(MeroExpr::Const(c64(1.0, 0.0))),
        );
        let mc = check_mod_m(&f, &spec, 1e-7).unwrap();
        assert!(mc.is_some(), "critical-point value must satisfy the cusp condition");
        let g = MeroExpr::Add(
            Box::new(MeroExpr::Wp { shift: z0 - c64(0.23, 0.11) }),
            Box::new(MeroExpr::Const(c64(1.0, 0.0))),
        );
        assert!(check_mod_m(&g, &spec, 1e-7).unwrap().is_none());
    }

    #[test]
    fn period_map_basics() {
        let spec = node_spec();
        let p0 = base_point(&spec).unwrap();
        let phi = period_map(&spec, p0).unwrap();
        assert_eq!(phi.len(), 2);
        assert!(phi.iter().all(|z| z.norm() < 1e-9), "phi(P0) = 0");
        // the holomorphic component is the representative difference
        let lat = spec.torus_lattice().unwrap();
        let p = TorusPoint::new(c64(0.4, 0.9), lat);
        let phi = period_map(&spec, p).unwrap();
        assert!((phi[0] - (p.rep() - p0.rep())).norm() < 1e-10);
        // S points are rejected
        assert!(period_map(&spec, spec.torus_point("P1").unwrap()).is_err());
    }

    #[test]
    fn abel_verify_symmetric_passes_and_generic_fails() {
        let spec = node_spec();
        let f = symmetric_function(&spec, c64(0.21, 0.11), c64(0.05, 0.33));
        let report = abel_verify(&spec, &f, 1e-7).unwrap();
        assert!(report.multiconstant.is_some());
        assert!(report.passes, "residual {}", report.residual);
        // constant function: empty divisor, zero vector, passes
        let c = parse("2").unwrap();
        let report = abel_verify(&spec, &c, 1e-7).unwrap();
        assert!(report.divisor.is_empty());
        assert!(report.passes);
        // a quotient violating the multiconstant condition fails with a
        // visibly nonzero residue-pair component
        let lat = spec.torus_lattice().unwrap();
        let ctx = make_context(lat, Truncation::default()).unwrap();
        let zs = vec![
            TorusPoint::new(c64(0.27, 0.31), lat),
            TorusPoint::new(c64(0.66, 0.52), lat),
        ];
        let ps = vec![
            TorusPoint::new(c64(0.13, 0.77), lat),
            TorusPoint::new(c64(0.27, 0.31) + c64(0.66, 0.52) - c64(0.13, 0.77), lat),
        ];
        let g = function_with_divisor(&ctx, &zs, &ps).unwrap();
        let report = abel_verify(&spec, &g, 1e-7).unwrap();
        assert!(report.multiconstant.is_none());
        assert!(!report.passes);
        assert!(report.residual > 1e-3, "residual {}", report.residual);
    }

    #[test]
    fn symmetric_values_signs_and_permutation() {
        let spec = node_spec();
        let lat = spec.torus_lattice().unwrap();
        let x = parse("wp(z)").unwrap();
        let y = parse("wpp(z)").unwrap();
        let pts = [
            TorusPoint::new(c64(0.31, 0.17), lat),
            TorusPoint::new(c64(0.52, 0.73), lat),
        ];
        let (xi, eta) = symmetric_values(&spec, &x, &y, &pts).unwrap();
        assert_eq!(xi.len(), 2);
        assert_eq!(eta.len(), 2);
        let ctx = make_context(lat, Truncation::default()).unwrap();
        let u = eval(&x, &ctx, pts[0].rep()).unwrap();
        let v = eval(&x, &ctx, pts[1].rep()).unwrap();
        assert!((xi[0] + (u + v)).norm() < 1e-10, "xi_1 = -(u+v)");
        assert!((xi[1] - u * v).norm() < 1e-10, "xi_2 = uv");
        // permutation invariance
        let swapped = [pts[1], pts[0]];
        let (xi2, eta2) = symmetric_values(&spec, &x, &y, &swapped).unwrap();
        for (a, b) in xi.iter().zip(xi2.iter()).chain(eta.iter().zip(eta2.iter())) {
            assert!((a - b).norm() < 1e-9);
        }
        // polynomial identity: prod(X - x_i) = X^2 + xi_1 X + xi_2
        let big_x = c64(1.7, -0.4);
        let lhs = (big_x - u) * (big_x - v);
        let rhs = big_x * big_x + xi[0] * big_x + xi[1];
        assert!((lhs - rhs).norm() < 1e-9);
        // wrong point count is a structural error
        assert!(symmetric_values(&spec, &x, &y, &pts[..1]).is_err());
    }
}
