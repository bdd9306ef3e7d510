//! Rank-2 complex lattices Λ_τ = ℤ + τℤ, SL(2,ℤ) fundamental-domain
//! reduction, lattice-type detection and integer unimodular matrices.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOL: f64 = 1e-9;

/// The lattice Λ_τ = ℤ + τℤ with Im τ > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    tau: Complex64,
}

impl Lattice {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !tau.im.is_finite() || tau.im <= 0.0 {
            return Err(Error::Domain(format!(
                "lattice parameter must have positive imaginary part, got {tau}"
            )));
        }
        Ok(Lattice { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Real coordinates (s, t) of `z` in the basis (1, τ): z = s + tτ.
    pub fn coords(&self, z: Complex64) -> (f64, f64) {
        let t = z.im / self.tau.im;
        let s = z.re - t * self.tau.re;
        (s, t)
    }

    pub fn from_coords(&self, s: f64, t: f64) -> Complex64 {
        Complex64::new(s, 0.0) + self.tau * t
    }

    /// Canonical representative in the fundamental parallelogram
    /// ℱ = { s + tτ : 0 ≤ s, t < 1 }.
    pub fn canonicalize(&self, z: Complex64) -> Complex64 {
        let (s, t) = self.coords(z);
        let fs = s - s.floor();
        let ft = t - t.floor();
        // snap coordinates that floor pushed to 1 - eps back to 0
        let fix = |x: f64| if (1.0 - x).abs() < 1e-13 { 0.0 } else { x };
        self.from_coords(fix(fs), fix(ft))
    }

    /// Nearest lattice point to `z` (search over rounded coordinates ±1).
    pub fn nearest_point(&self, z: Complex64) -> (i64, i64) {
        let (s, t) = self.coords(z);
        let (m0, n0) = (s.round() as i64, t.round() as i64);
        let mut best = (m0, n0);
        let mut best_d = f64::INFINITY;
        for m in m0 - 1..=m0 + 1 {
            for n in n0 - 1..=n0 + 1 {
                let p = Complex64::new(m as f64, 0.0) + self.tau * (n as f64);
                let d = (z - p).norm();
                if d < best_d {
                    best_d = d;
                    best = (m, n);
                }
            }
        }
        best
    }
}

/// A point of the torus ℂ/Λ_τ. The stored representative lies in the
/// fundamental parallelogram ℱ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    rep: Complex64,
    lattice: Lattice,
}

impl TorusPoint {
    pub fn new(z: Complex64, lattice: Lattice) -> Self {
        TorusPoint {
            rep: lattice.canonicalize(z),
            lattice,
        }
    }

    pub fn rep(&self) -> Complex64 {
        self.rep
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }
}

/// Shape class of Λ_τ under the SL(2,ℤ) action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeType {
    Square,
    Hexagonal,
    Generic,
}

/// An integer square matrix with determinant ±1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnimodularMatrix {
    entries: Vec<Vec<i64>>,
}

impl UnimodularMatrix {
    pub fn new(entries: Vec<Vec<i64>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Structure("matrix must be square".into()));
        }
        let det = crate::linalg::int_det(&entries);
        if det != 1 && det != -1 {
            return Err(Error::Structure(format!(
                "determinant must be +-1, got {det}"
            )));
        }
        Ok(UnimodularMatrix { entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![vec![0i64; n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = 1;
        }
        UnimodularMatrix { entries }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i][j]
    }

    pub fn det(&self) -> i64 {
        crate::linalg::int_det(&self.entries) as i64
    }

    pub fn neg(&self) -> Self {
        UnimodularMatrix {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|&x| -x).collect())
                .collect(),
        }
    }
}

/// Reduce τ into the standard fundamental domain of SL(2,ℤ):
/// |Re τ| ≤ 1/2 and |τ| ≥ 1, with the boundary convention
/// Re τ ∈ [−1/2, 1/2) and, on |τ| = 1, Re τ ≤ 0.
///
/// Returns the reduced value together with the matrix [[a,b],[c,d]]
/// (det 1) such that τ_reduced = (aτ + b)/(cτ + d).
pub fn reduce_fundamental_domain(tau: Complex64) -> Result<(Complex64, [[i64; 2]; 2])> {
    if !tau.im.is_finite() || tau.im <= 0.0 {
        return Err(Error::Domain(format!(
            "reduction requires Im tau > 0, got {tau}"
        )));
    }
    let mut t = tau;
    // m = [[a,b],[c,d]] acting as t -> (a t + b)/(c t + d)
    let mut m = [[1i64, 0], [0, 1]];
    let shift = |m: &mut [[i64; 2]; 2], n: i64| {
        // left-multiply by T^n = [[1,n],[0,1]]
        m[0][0] += n * m[1][0];
        m[0][1] += n * m[1][1];
    };
    let invert = |m: &mut [[i64; 2]; 2]| {
        // left-multiply by S = [[0,-1],[1,0]]
        let top = [m[0][0], m[0][1]];
        m[0][0] = -m[1][0];
        m[0][1] = -m[1][1];
        m[1][0] = top[0];
        m[1][1] = top[1];
    };
    for _ in 0..256 {
        let n = t.re.round();
        if n != 0.0 {
            t -= Complex64::new(n, 0.0);
            shift(&mut m, -(n as i64));
        }
        let r = t.norm();
        if r < 1.0 - 1e-15 {
            t = -t.inv();
            invert(&mut m);
            continue;
        }
        // boundary conventions
        if (t.re - 0.5).abs() < 1e-15 {
            t -= Complex64::new(1.0, 0.0);
            shift(&mut m, -1);
        }
        if (r - 1.0).abs() < 1e-15 && t.re > 1e-15 {
            t = -t.inv();
            invert(&mut m);
            continue;
        }
        if t.re >= -0.5 - 1e-15 && t.re < 0.5 && r >= 1.0 - 1e-15 {
            return Ok((t, m));
        }
    }
    Err(Error::Accuracy(
        "fundamental-domain reduction did not converge".into(),
    ))
}

/// Apply [[a,b],[c,d]] to τ as a Möbius map.
pub fn moebius(m: [[i64; 2]; 2], tau: Complex64) -> Complex64 {
    let num = Complex64::new(m[0][0] as f64, 0.0) * tau + Complex64::new(m[0][1] as f64, 0.0);
    let den = Complex64::new(m[1][0] as f64, 0.0) * tau + Complex64::new(m[1][1] as f64, 0.0);
    num / den
}

/// Detect whether Λ_τ is square (τ ~ i), hexagonal (τ ~ e^{2πi/3}) or
/// generic, after fundamental-domain reduction.
pub fn lattice_type(tau: Complex64, tol: f64) -> Result<LatticeType> {
    let (t, _) = reduce_fundamental_domain(tau)?;
    let i = Complex64::new(0.0, 1.0);
    let rho = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let rho2 = Complex64::from_polar(1.0, std::f64::consts::PI / 3.0);
    if (t - i).norm() < tol {
        Ok(LatticeType::Square)
    } else if (t - rho).norm() < tol || (t - rho2).norm() < tol {
        Ok(LatticeType::Hexagonal)
    } else {
        Ok(LatticeType::Generic)
    }
}

/// Multipliers γ of torus automorphisms z ↦ γz + z₀: fourth roots of
/// unity for square lattices, sixth roots for hexagonal, ±1 otherwise.
pub fn automorphism_multipliers(tau: Complex64) -> Result<Vec<Complex64>> {
    let ty = lattice_type(tau, DEFAULT_TOL)?;
    let snap = |x: f64| -> f64 {
        for v in [0.0, 1.0, -1.0, 0.5, -0.5] {
            if (x - v).abs() < 1e-12 {
                return v;
            }
        }
        x
    };
    let roots = |k: usize| -> Vec<Complex64> {
        (0..k)
            .map(|j| {
                let w =
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / k as f64);
                Complex64::new(snap(w.re), snap(w.im))
            })
            .collect()
    };
    Ok(match ty {
        LatticeType::Square => roots(4),
        LatticeType::Hexagonal => roots(6),
        LatticeType::Generic => roots(2),
    })
}

/// True iff z ≡ w mod Λ within `tol`.
pub fn congruent_mod_lattice(z: Complex64, w: Complex64, lattice: &Lattice, tol: f64) -> bool {
    let diff = z - w;
    let (m, n) = lattice.nearest_point(diff);
    let p = Complex64::new(m as f64, 0.0) + lattice.tau() * (n as f64);
    (diff - p).norm() < tol
}

/// Streaming enumeration of all n×n integer matrices with entries in
/// [-bound, bound] and determinant ±1.
///
/// Order: the flattened entry vector (row-major) counts like an odometer
/// with the last entry varying fastest, each digit running from -bound
/// to +bound; matrices are yielded in that lexicographic order.
pub fn enumerate_unimodular(n: usize, bound: i64) -> UnimodularIter {
    assert!(n >= 1 && bound >= 1);
    UnimodularIter {
        n,
        bound,
        state: vec![-bound; n * n],
        done: false,
        first: true,
    }
}

pub struct UnimodularIter {
    n: usize,
    bound: i64,
    state: Vec<i64>,
    done: bool,
    first: bool,
}

impl UnimodularIter {
    fn advance(&mut self) -> bool {
        for slot in self.state.iter_mut().rev() {
            if *slot < self.bound {
                *slot += 1;
                return true;
            }
            *slot = -self.bound;
        }
        false
    }

    fn current(&self) -> Vec<Vec<i64>> {
        self.state
            .chunks(self.n)
            .map(|chunk| chunk.to_vec())
            .collect()
    }
}

/// Allocation-free determinant of the flattened state for small n.
fn det_flat(s: &[i64], n: usize) -> i128 {
    match n {
        1 => s[0] as i128,
        2 => s[0] as i128 * s[3] as i128 - s[1] as i128 * s[2] as i128,
        3 => {
            let m = |i: usize| s[i] as i128;
            m(0) * (m(4) * m(8) - m(5) * m(7)) - m(1) * (m(3) * m(8) - m(5) * m(6))
                + m(2) * (m(3) * m(7) - m(4) * m(6))
        }
        _ => {
            let rows: Vec<Vec<i64>> = s.chunks(n).map(|c| c.to_vec()).collect();
            crate::linalg::int_det(&rows)
        }
    }
}

impl Iterator for UnimodularIter {
    type Item = UnimodularMatrix;

    fn next(&mut self) -> Option<UnimodularMatrix> {
        if self.done {
            return None;
        }
        loop {
            if self.first {
                self.first = false;
            } else if !self.advance() {
                self.done = true;
                return None;
            }
            let det = det_flat(&self.state, self.n);
            if det == 1 || det == -1 {
                return Some(UnimodularMatrix { entries: self.current() });
            }
        }
    }
}
