//! Divisors prime to S, extended divisors with prescribed behaviour at
//! the glued points, multiconstants, and the Riemann-Roch Euler
//! characteristic χ = deg D + 1 − π with its known-dimension cases.

use crate::curve::{GenusData, SingularCurveSpec};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Integer-weighted formal sum of points away from S.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divisor {
    weights: BTreeMap<String, i64>,
}

impl Divisor {
    pub fn zero() -> Self {
        Divisor::default()
    }

    pub fn from_weights(weights: BTreeMap<String, i64>) -> Self {
        let mut d = Divisor { weights };
        d.weights.retain(|_, &mut w| w != 0);
        d
    }

    pub fn single(id: &str, weight: i64) -> Self {
        let mut weights = BTreeMap::new();
        if weight != 0 {
            weights.insert(id.to_string(), weight);
        }
        Divisor { weights }
    }

    pub fn weight(&self, id: &str) -> i64 {
        self.weights.get(id).copied().unwrap_or(0)
    }

    pub fn weights(&self) -> &BTreeMap<String, i64> {
        &self.weights
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.weights.values().sum()
    }

    pub fn add(&self, other: &Divisor) -> Divisor {
        let mut weights = self.weights.clone();
        for (id, w) in &other.weights {
            *weights.entry(id.clone()).or_insert(0) += w;
        }
        Divisor::from_weights(weights)
    }

    pub fn neg(&self) -> Divisor {
        Divisor {
            weights: self.weights.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }

    /// Componentwise partial order: self ≥ other.
    pub fn geq(&self, other: &Divisor) -> bool {
        let ids: std::collections::BTreeSet<&String> =
            self.weights.keys().chain(other.weights.keys()).collect();
        ids.into_iter().all(|id| self.weight(id) >= other.weight(id))
    }

    /// Parse the CLI literal syntax: signed integer-weighted sums over
    /// identifiers, e.g. `2*A - B + C`.
    pub fn parse(text: &str) -> Result<Divisor> {
        let mut weights: BTreeMap<String, i64> = BTreeMap::new();
        let bytes = text.as_bytes();
        let mut pos = 0usize;
        let skip_ws = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        };
        let mut first = true;
        loop {
            skip_ws(&mut pos);
            if pos >= bytes.len() {
                if first {
                    break; // empty input = zero divisor
                }
                return Err(Error::Syntax {
                    position: pos,
                    expected: "term".into(),
                    found: "end of input".into(),
                });
            }
            let mut sign = 1i64;
            match bytes[pos] {
                b'+' => pos += 1,
                b'-' => {
                    sign = -1;
                    pos += 1;
                }
                _ if first => {}
                other => {
                    return Err(Error::Syntax {
                        position: pos,
                        expected: "'+' or '-'".into(),
                        found: (other as char).to_string(),
                    });
                }
            }
            skip_ws(&mut pos);
            let mut coeff = 1i64;
            if pos < bytes.len() && bytes[pos].is_ascii_digit() {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                coeff = text[start..pos].parse().map_err(|_| Error::Syntax {
                    position: start,
                    expected: "integer".into(),
                    found: text[start..pos].to_string(),
                })?;
                skip_ws(&mut pos);
                if pos < bytes.len() && bytes[pos] == b'*' {
                    pos += 1;
                    skip_ws(&mut pos);
                }
            }
            let start = pos;
            while pos < bytes.len()
                && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
            {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Syntax {
                    position: pos,
                    expected: "point identifier".into(),
                    found: if pos < bytes.len() {
                        (bytes[pos] as char).to_string()
                    } else {
                        "end of input".into()
                    },
                });
            }
            *weights.entry(text[start..pos].to_string()).or_insert(0) += sign * coeff;
            first = false;
            skip_ws(&mut pos);
            if pos >= bytes.len() {
                break;
            }
        }
        Ok(Divisor::from_weights(weights))
    }
}

impl std::fmt::Display for Divisor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.weights.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (id, w) in &self.weights {
            if first {
                if *w < 0 {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {} ", if *w < 0 { "-" } else { "+" })?;
            }
            let a = w.abs();
            if a == 1 {
                write!(f, "{id}")?;
            } else {
                write!(f, "{a}*{id}")?;
            }
        }
        Ok(())
    }
}

/// Divisor with prescribed integer data n_P at the points of each glued
/// class; for a class with nonzero entries, every |n_P| ≥ 𝔪(P) and all
/// n_P share one sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedDivisor {
    pub off_s: Divisor,
    /// Per class (spec class order): entries n_P aligned with the class's
    /// point order. An all-zero vector means the class is untouched.
    pub at_classes: Vec<Vec<i64>>,
}

/// One nonzero constant per glued class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiconstant {
    /// c_Q per class, in spec class order.
    pub values: Vec<Complex64>,
}

impl Multiconstant {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.iter().any(|c| c.norm() == 0.0) {
            return Err(Error::Domain("multiconstant entries must be nonzero".into()));
        }
        Ok(Multiconstant { values })
    }
}

/// Riemann-Roch result: χ always; h⁰/h¹ only in the paper-backed cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RRResult {
    pub chi: i64,
    pub h0: Option<i64>,
    pub h1: Option<i64>,
}

/// χ(ℒ(D)) = deg D + 1 − π, with h⁰ = 1, h¹ = π for D = 0 and h⁰ = 0,
/// h¹ = π − 1 − deg D for deg D < 0.
pub fn rr_chi(d: &Divisor, genus: &GenusData) -> RRResult {
    let deg = d.degree();
    let pi = genus.pi as i64;
    let chi = deg + 1 - pi;
    if d.is_zero() {
        RRResult { chi, h0: Some(1), h1: Some(pi) }
    } else if deg < 0 {
        RRResult { chi, h0: Some(0), h1: Some(-chi) }
    } else {
        RRResult { chi, h0: None, h1: None }
    }
}

/// Check the extended-divisor constraints against a spec: for each class
/// with a nonzero entry vector, |n_P| ≥ 𝔪(P) everywhere and all entries
/// strictly share one sign.
pub fn validate_extended(e: &ExtendedDivisor, spec: &SingularCurveSpec) -> Result<bool> {
    if e.at_classes.len() != spec.classes().len() {
        return Err(Error::Structure(format!(
            "expected {} class entries, got {}",
            spec.classes().len(),
            e.at_classes.len()
        )));
    }
    for (entries, class) in e.at_classes.iter().zip(spec.classes()) {
        if entries.len() != class.len() {
            return Err(Error::Structure(format!(
                "class of size {} got {} entries",
                class.len(),
                entries.len()
            )));
        }
        if entries.iter().all(|&n| n == 0) {
            continue;
        }
        let positive = entries[0] > 0;
        for (&n, id) in entries.iter().zip(class) {
            let m = spec.modulus().multiplicity(id).unwrap_or(0) as i64;
            if n == 0 || (n > 0) != positive || n.abs() < m {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{genus, SingularCurveSpec};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn node_genus() -> GenusData {
        let spec = SingularCurveSpec::node(c(0.0, 2.0), c(0.2, 0.3), c(0.6, 0.1)).unwrap();
        genus(&spec)
    }

    #[test]
    fn degree_add_geq() {
        let zero = Divisor::zero();
        assert_eq!(zero.degree(), 0);
        let d = Divisor::parse("P1 + P2 - Q").unwrap();
        assert_eq!(d.degree(), 1);
        let p = Divisor::single("P", 1);
        assert!(p.geq(&zero));
        let pq = Divisor::parse("P - Q").unwrap();
        assert!(!pq.geq(&zero));
        assert_eq!(d.add(&d.neg()), zero);
        // partial order: reflexive, antisymmetric on distinct divisors
        assert!(d.geq(&d));
        assert!(!(p.geq(&pq) && pq.geq(&p)));
    }

    #[test]
    fn parse_literals() {
        let d = Divisor::parse("2*A - B + C").unwrap();
        assert_eq!(d.weight("A"), 2);
        assert_eq!(d.weight("B"), -1);
        assert_eq!(d.weight("C"), 1);
        assert_eq!(d.degree(), 2);
        assert_eq!(Divisor::parse("").unwrap(), Divisor::zero());
        assert!(Divisor::parse("2*").is_err());
        assert!(Divisor::parse("A B").is_err());
        // weights merge and zero-weight entries vanish
        let e = Divisor::parse("A - A + 3*B").unwrap();
        assert_eq!(e.weight("A"), 0);
        assert_eq!(e.weights().len(), 1);
        let shown = format!("{}", d);
        assert_eq!(Divisor::parse(&shown).unwrap(), d);
    }

    #[test]
    fn rr_known_cases() {
        let g = node_genus();
        assert_eq!(g.pi, 2);
        // D = 0: chi = -1, h0 = 1, h1 = 2
        let r = rr_chi(&Divisor::zero(), &g);
        assert_eq!(r, RRResult { chi: -1, h0: Some(1), h1: Some(2) });
        // deg D = -1: chi = -2, h0 = 0, h1 = 2
        let r = rr_chi(&Divisor::single("Q", -1), &g);
        assert_eq!(r, RRResult { chi: -2, h0: Some(0), h1: Some(2) });
        // deg D = 5: chi = 4, dimensions unknown
        let r = rr_chi(&Divisor::parse("5*Q").unwrap(), &g);
        assert_eq!(r, RRResult { chi: 4, h0: None, h1: None });
        // h0 - h1 = chi whenever both are present
        for d in [Divisor::zero(), Divisor::single("Q", -3)] {
            let r = rr_chi(&d, &g);
            if let (Some(h0), Some(h1)) = (r.h0, r.h1) {
                assert_eq!(h0 - h1, r.chi);
            }
        }
    }

    #[test]
    fn rr_additivity() {
        let g = node_genus();
        let mut d = Divisor::parse("2*A - B").unwrap();
        for i in 0..20 {
            let chi = rr_chi(&d, &g).chi;
            let d2 = d.add(&Divisor::single(&format!("X{i}"), 1));
            assert_eq!(rr_chi(&d2, &g).chi, chi + 1);
            d = d2;
        }
    }

    #[test]
    fn extended_divisor_constraints() {
        let spec = SingularCurveSpec::node(c(0.0, 2.0), c(0.2, 0.3), c(0.6, 0.1)).unwrap();
        let ok = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![1, 1]],
        };
        assert!(validate_extended(&ok, &spec).unwrap());
        let mixed = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![1, -1]],
        };
        assert!(!validate_extended(&mixed, &spec).unwrap());
        let untouched = ExtendedDivisor {
            off_s: Divisor::parse("A - B").unwrap(),
            at_classes: vec![vec![0, 0]],
        };
        assert!(validate_extended(&untouched, &spec).unwrap());
        // permuting points within the class preserves validity
        let perm = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![2, 3]],
        };
        let perm_swapped = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![3, 2]],
        };
        assert_eq!(
            validate_extended(&perm, &spec).unwrap(),
            validate_extended(&perm_swapped, &spec).unwrap()
        );
        // class mismatch is a structural error
        let bad = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![1]],
        };
        assert!(validate_extended(&bad, &spec).is_err());
    }

    #[test]
    fn cusp_extended_constraints() {
        let spec = SingularCurveSpec::cusp(c(0.0, 2.0), c(0.4, 0.2)).unwrap();
        // |n| < m(P) = 2 violates the constraint
        let low = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![1]],
        };
        assert!(!validate_extended(&low, &spec).unwrap());
        let ok = ExtendedDivisor {
            off_s: Divisor::zero(),
            at_classes: vec![vec![-2]],
        };
        assert!(validate_extended(&ok, &spec).unwrap());
    }

    #[test]
    fn multiconstant_nonzero() {
        assert!(Multiconstant::new(vec![c(1.0, 0.0)]).is_ok());
        assert!(Multiconstant::new(vec![c(0.0, 0.0)]).is_err());
    }
}
