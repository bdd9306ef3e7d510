//! Meromorphic-function expressions on the torus: parser, evaluator,
//! Laurent expansion via Cauchy integrals, and argument-principle order
//! counting.
//!
//! Grammar:
//!   expr   := term (('+'|'-') term)*
//!   term   := factor (('*'|'/') factor)*
//!   factor := base ('^' integer)?
//!   base   := number | 'wp' '(' arg ')' | 'wpp' '(' arg ')'
//!           | 'sigma' '(' arg ')' | '(' expr ')'
//!   arg    := 'z' (('+'|'-') complex)* | complex
//! Numbers carry an optional trailing 'i' (imaginary literal); a+bi is
//! parsed as a sum of two literals.

use crate::elliptic::{sigma_fn, wp, wp_prime, WeierstrassContext};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use num_complex::Complex64;
use std::f64::consts::PI;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Expression tree for rational combinations of ℘, ℘′ and σ.
#[derive(Debug, Clone, PartialEq)]
pub enum MeroExpr {
    Const(Complex64),
    /// ℘(z − shift)
    Wp { shift: Complex64 },
    /// ℘′(z − shift)
    WpPrime { shift: Complex64 },
    /// σ(z − shift)
    Sigma { shift: Complex64 },
    /// ℘ / ℘′ / σ evaluated at a constant argument.
    WpAt(Complex64),
    WpPrimeAt(Complex64),
    SigmaAt(Complex64),
    Add(Box<MeroExpr>, Box<MeroExpr>),
    Sub(Box<MeroExpr>, Box<MeroExpr>),
    Mul(Box<MeroExpr>, Box<MeroExpr>),
    Div(Box<MeroExpr>, Box<MeroExpr>),
    Pow(Box<MeroExpr>, i32),
}

impl MeroExpr {
    pub fn leaf_count(&self) -> usize {
        match self {
            MeroExpr::Const(_)
            | MeroExpr::Wp { .. }
            | MeroExpr::WpPrime { .. }
            | MeroExpr::Sigma { .. }
            | MeroExpr::WpAt(_)
            | MeroExpr::WpPrimeAt(_)
            | MeroExpr::SigmaAt(_) => 1,
            MeroExpr::Add(a, b)
            | MeroExpr::Sub(a, b)
            | MeroExpr::Mul(a, b)
            | MeroExpr::Div(a, b) => a.leaf_count() + b.leaf_count(),
            MeroExpr::Pow(a, _) => a.leaf_count(),
        }
    }

    /// Candidate singular points (poles of ℘/℘′ shifts, zeros of σ
    /// shifts), as canonical torus representatives.
    pub fn singular_candidates(&self, lattice: &Lattice) -> Vec<Complex64> {
        let mut out = Vec::new();
        self.collect_candidates(lattice, &mut out);
        out.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        out.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
        out
    }

    fn collect_candidates(&self, lattice: &Lattice, out: &mut Vec<Complex64>) {
        match self {
            MeroExpr::Wp { shift } | MeroExpr::WpPrime { shift } | MeroExpr::Sigma { shift } => {
                out.push(lattice.canonicalize(*shift));
            }
            MeroExpr::Add(a, b)
            | MeroExpr::Sub(a, b)
            | MeroExpr::Mul(a, b)
            | MeroExpr::Div(a, b) => {
                a.collect_candidates(lattice, out);
                b.collect_candidates(lattice, out);
            }
            MeroExpr::Pow(a, _) => a.collect_candidates(lattice, out),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Tokenizer / parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool), // value, imaginary?
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => pos += 1,
            b'+' => {
                toks.push((Tok::Plus, pos));
                pos += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, pos));
                pos += 1;
            }
            b'*' => {
                toks.push((Tok::Star, pos));
                pos += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, pos));
                pos += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, pos));
                pos += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, pos));
                pos += 1;
            }
            b')' => {
                toks.push((Tok::RParen, pos));
                pos += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_digit()
                        || bytes[pos] == b'.'
                        || bytes[pos] == b'e'
                        || bytes[pos] == b'E'
                        || ((bytes[pos] == b'+' || bytes[pos] == b'-')
                            && pos > start
                            && (bytes[pos - 1] == b'e' || bytes[pos - 1] == b'E')))
                {
                    pos += 1;
                }
                let val: f64 = text[start..pos].parse().map_err(|_| Error::Syntax {
                    position: start,
                    expected: "number".into(),
                    found: text[start..pos].to_string(),
                })?;
                let imag = pos < bytes.len() && bytes[pos] == b'i';
                if imag {
                    pos += 1;
                }
                toks.push((Tok::Num(val, imag), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                let word = &text[start..pos];
                if word == "i" {
                    toks.push((Tok::Num(1.0, true), start));
                } else {
                    toks.push((Tok::Ident(word.to_string()), start));
                }
            }
            other => {
                return Err(Error::Syntax {
                    position: pos,
                    expected: "token".into(),
                    found: (other as char).to_string(),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    idx: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.len, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        self.idx += 1;
        t
    }

    fn err(&self, expected: &str) -> Error {
        Error::Syntax {
            position: self.pos(),
            expected: expected.into(),
            found: self
                .peek()
                .map_or("end of input".to_string(), |t| format!("{t:?}")),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expr(&mut self) -> Result<MeroExpr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = MeroExpr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = MeroExpr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MeroExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    acc = MeroExpr::Mul(Box::new(acc), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    acc = MeroExpr::Div(Box::new(acc), Box::new(self.factor()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<MeroExpr> {
        let base = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let neg = if self.peek() == Some(&Tok::Minus) {
                self.bump();
                true
            } else {
                false
            };
            match self.bump() {
                Some(Tok::Num(v, false)) if v.fract() == 0.0 => {
                    let e = v as i32;
                    return Ok(MeroExpr::Pow(Box::new(base), if neg { -e } else { e }));
                }
                _ => return Err(self.err("integer exponent")),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<MeroExpr> {
        match self.peek().cloned() {
            Some(Tok::Num(v, imag)) => {
                self.bump();
                Ok(MeroExpr::Const(if imag { c64(0.0, v) } else { c64(v, 0.0) }))
            }
            Some(Tok::Minus) => {
                // unary minus on a base
                self.bump();
                let inner = self.base()?;
                Ok(MeroExpr::Sub(
                    Box::new(MeroExpr::Const(c64(0.0, 0.0))),
                    Box::new(inner),
                ))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                match name.as_str() {
                    "wp" | "wpp" | "sigma" => {
                        self.expect(Tok::LParen, "'('")?;
                        let arg = self.argument()?;
                        self.expect(Tok::RParen, "')'")?;
                        Ok(match (name.as_str(), arg) {
                            ("wp", Arg::Shifted(s)) => MeroExpr::Wp { shift: s },
                            ("wpp", Arg::Shifted(s)) => MeroExpr::WpPrime { shift: s },
                            ("sigma", Arg::Shifted(s)) => MeroExpr::Sigma { shift: s },
                            ("wp", Arg::Constant(c)) => MeroExpr::WpAt(c),
                            ("wpp", Arg::Constant(c)) => MeroExpr::WpPrimeAt(c),
                            ("sigma", Arg::Constant(c)) => MeroExpr::SigmaAt(c),
                            _ => unreachable!(),
                        })
                    }
                    other => Err(Error::Syntax {
                        position: self.toks[self.idx - 1].1,
                        expected: "'wp', 'wpp' or 'sigma'".into(),
                        found: other.to_string(),
                    }),
                }
            }
            _ => Err(self.err("number, function call or '('")),
        }
    }

    /// Inside a function call: either z with literal offsets, or a
    /// constant complex expression (sums of literals).
    fn argument(&mut self) -> Result<Arg> {
        let has_z = matches!(self.peek(), Some(Tok::Ident(w)) if w == "z");
        let mut acc = c64(0.0, 0.0);
        if has_z {
            self.bump();
        } else {
            acc = self.complex_literal(1.0)?;
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc += self.complex_literal(1.0)?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc += self.complex_literal(-1.0)?;
                }
                _ => break,
            }
        }
        if has_z {
            // wp(z + c) is wp(z − (−c))
            Ok(Arg::Shifted(-acc))
        } else {
            Ok(Arg::Constant(acc))
        }
    }

    fn complex_literal(&mut self, sign: f64) -> Result<Complex64> {
        match self.bump() {
            Some(Tok::Num(v, true)) => Ok(c64(0.0, sign * v)),
            Some(Tok::Num(v, false)) => Ok(c64(sign * v, 0.0)),
            _ => {
                self.idx = self.idx.saturating_sub(1);
                Err(self.err("complex literal"))
            }
        }
    }
}

enum Arg {
    Shifted(Complex64),
    Constant(Complex64),
}

/// Parse an expression string. Errors carry the byte position and the
/// expected token class.
pub fn parse(text: &str) -> Result<MeroExpr> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks: &toks, idx: 0, len: text.len() };
    let e = p.expr()?;
    if p.idx != toks.len() {
        return Err(p.err("end of input"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Finite(Complex64),
    Infinite,
}

fn eval_value(expr: &MeroExpr, ctx: &WeierstrassContext, z: Complex64) -> Result<Value> {
    use Value::*;
    let lift = |r: crate::error::Result<Complex64>| -> Result<Value> {
        match r {
            Ok(v) => Ok(Finite(v)),
            Err(Error::Pole { .. }) => Ok(Infinite),
            Err(e) => Err(e),
        }
    };
    let indeterminate =
        |what: &str| Err(Error::Accuracy(format!("indeterminate form {what} at z = {z}")));
    match expr {
        MeroExpr::Const(c) => Ok(Finite(*c)),
        MeroExpr::Wp { shift } => lift(wp(ctx, z - shift)),
        MeroExpr::WpPrime { shift } => lift(wp_prime(ctx, z - shift)),
        MeroExpr::Sigma { shift } => lift(sigma_fn(ctx, z - shift)),
        MeroExpr::WpAt(c) => lift(wp(ctx, *c)),
        MeroExpr::WpPrimeAt(c) => lift(wp_prime(ctx, *c)),
        MeroExpr::SigmaAt(c) => lift(sigma_fn(ctx, *c)),
        MeroExpr::Add(a, b) | MeroExpr::Sub(a, b) => {
            let sign = if matches!(expr, MeroExpr::Add(..)) { 1.0 } else { -1.0 };
            match (eval_value(a, ctx, z)?, eval_value(b, ctx, z)?) {
                (Finite(x), Finite(y)) => Ok(Finite(x + sign * y)),
                (Infinite, Finite(_)) | (Finite(_), Infinite) => Ok(Infinite),
                (Infinite, Infinite) => indeterminate("∞ ± ∞"),
            }
        }
        MeroExpr::Mul(a, b) => match (eval_value(a, ctx, z)?, eval_value(b, ctx, z)?) {
            (Finite(x), Finite(y)) => Ok(Finite(x * y)),
            (Infinite, Finite(y)) | (Finite(y), Infinite) => {
                if y.norm() == 0.0 {
                    indeterminate("0 · ∞")
                } else {
                    Ok(Infinite)
                }
            }
            (Infinite, Infinite) => Ok(Infinite),
        },
        MeroExpr::Div(a, b) => match (eval_value(a, ctx, z)?, eval_value(b, ctx, z)?) {
            (Finite(x), Finite(y)) => {
                if y.norm() == 0.0 {
                    if x.norm() == 0.0 {
                        indeterminate("0 / 0")
                    } else {
                        Ok(Infinite)
                    }
                } else {
                    Ok(Finite(x / y))
                }
            }
            (Finite(_), Infinite) => Ok(Finite(c64(0.0, 0.0))),
            (Infinite, Finite(y)) => {
                if y.norm() == 0.0 {
                    indeterminate("∞ / 0")
                } else {
                    Ok(Infinite)
                }
            }
            (Infinite, Infinite) => indeterminate("∞ / ∞"),
        },
        MeroExpr::Pow(a, e) => match eval_value(a, ctx, z)? {
            Finite(x) => {
                if *e < 0 && x.norm() == 0.0 {
                    Ok(Infinite)
                } else {
                    Ok(Finite(x.powi(*e)))
                }
            }
            Infinite => {
                if *e > 0 {
                    Ok(Infinite)
                } else if *e < 0 {
                    Ok(Finite(c64(0.0, 0.0)))
                } else {
                    Ok(Finite(c64(1.0, 0.0)))
                }
            }
        },
    }
}

/// Evaluate at a point; hitting a pole reports its order via the
/// argument principle.
pub fn eval(expr: &MeroExpr, ctx: &WeierstrassContext, z: Complex64) -> Result<Complex64> {
    match eval_value(expr, ctx, z)? {
        Value::Finite(v) => Ok(v),
        Value::Infinite => {
            let ord = order_of(expr, ctx, z).ok();
            Err(Error::Pole {
                at: z,
                order: ord.map(|o| (-o).max(0) as u32),
            })
        }
    }
}

/// Radius that keeps other singular candidates strictly outside a circle
/// around z0.
fn safe_radius(expr: &MeroExpr, ctx: &WeierstrassContext, z0: Complex64) -> f64 {
    let lat = ctx.lattice();
    let tau = ctx.tau();
    let shortest = tau.norm().min(1.0).min((tau - c64(1.0, 0.0)).norm());
    let mut best: f64 = 0.2 * shortest;
    for cand in expr.singular_candidates(&lat) {
        let rel = cand - z0;
        let (m, n) = lat.nearest_point(rel);
        let d = (rel - c64(m as f64, 0.0) - tau * (n as f64)).norm();
        if d > 1e-10 {
            best = best.min(d / 2.0);
        }
    }
    best
}

/// Order of expr at z0 (zeros positive, poles negative) by the winding
/// number of the image of a small circle.
pub fn order_of(expr: &MeroExpr, ctx: &WeierstrassContext, z0: Complex64) -> Result<i64> {
    let r = safe_radius(expr, ctx, z0);
    winding_on_circle(expr, ctx, z0, r)
}

/// Winding number of expr along an anticlockwise circle. The sampling
/// density doubles until the accumulated phase is stable and every step
/// is small.
pub(crate) fn winding_on_circle(
    expr: &MeroExpr,
    ctx: &WeierstrassContext,
    center: Complex64,
    radius: f64,
) -> Result<i64> {
    let mut n = 64usize;
    let mut prev: Option<i64> = None;
    'outer: while n <= 1 << 14 {
        let steps = n;
        let mut total = 0.0_f64;
        let mut last_arg: Option<f64> = None;
        let mut first_arg = 0.0;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let z = center + radius * Complex64::from_polar(1.0, 2.0 * PI * t);
            let v = match eval_value(expr, ctx, z)? {
                Value::Finite(v) => v,
                Value::Infinite => {
                    return Err(Error::Path(format!("singularity on sampling circle at {z}")))
                }
            };
            if !v.is_finite() || v.norm() < 1e-280 {
                return Err(Error::Path(format!(
                    "function vanishes or overflows on the sampling circle at {z}"
                )));
            }
            let arg = v.arg();
            match last_arg {
                None => first_arg = arg,
                Some(prev_arg) => {
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
            }
            last_arg = Some(arg);
        }
        let _ = first_arg;
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
    Err(Error::Accuracy("winding number did not stabilize".into()))
}

/// Laurent coefficients a_{−order} .. a_{+order} of expr about z0, by
/// Cauchy integrals on a circle that excludes other singularities.
pub fn local_expansion(
    expr: &MeroExpr,
    ctx: &WeierstrassContext,
    z0: Complex64,
    order: u32,
) -> Result<Vec<Complex64>> {
    let mut radius = safe_radius(expr, ctx, z0);
    'retry: for _ in 0..4 {
        let mut n = 256usize;
        let mut prev: Option<Vec<Complex64>> = None;
        while n <= 1 << 14 {
            let mut samples = Vec::with_capacity(n);
            for k in 0..n {
                let t = k as f64 / n as f64;
                let dir = Complex64::from_polar(1.0, 2.0 * PI * t);
                let z = z0 + radius * dir;
                match eval_value(expr, ctx, z)? {
                    Value::Finite(v) if v.is_finite() => samples.push((dir, v)),
                    _ => {
                        radius *= 0.5;
                        continue 'retry;
                    }
                }
            }
            // a_j = (1/2πi) ∮ f(z) (z−z0)^{−j−1} dz
            //     = (1/n) Σ_k f(z_k) (r e^{iθ_k})^{−j}
            let m = order as i64;
            let mut coeffs = Vec::with_capacity((2 * order + 1) as usize);
            for j in -m..=m {
                let mut acc = c64(0.0, 0.0);
            for (dir, v) in &samples {
                    let w = radius.powi(-j as i32) * dir.powi(-j as i32);
                    acc += v * w;
                }
                coeffs.push(acc / n as f64);
            }
            if let Some(p) = &prev {
                let scale = coeffs.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
                let diff = coeffs
                    .iter()
                    .zip(p.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0_f64, f64::max);
                if diff < 1e-10 * scale {
                    return Ok(coeffs);
                }
            }
            prev = Some(coeffs);
            n *= 2;
        }
        radius *= 0.5;
    }
    Err(Error::Accuracy(
        "Laurent extraction did not converge (singularity near the circle?)".into(),
    ))
}
