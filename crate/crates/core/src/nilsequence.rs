//! Polynomial sequences on tori and on the Heisenberg nilmanifold.
//!
//! Heisenberg group coordinates use the law
//! `(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')` with lattice
//! `Γ = Z³`. A sequence is stored through its coordinate polynomials; every
//! fractional part is taken exactly, real coefficients being read as the
//! dyadic rationals they are.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numberfield::{format_rational, NormForm};
use crate::poly::Poly;

/// Coefficient: exact rational when the input was rational, float otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum Coef {
    Exact(BigRational),
    Real(f64),
}

impl Coef {
    pub fn rational(n: i64, d: i64) -> Self {
        Coef::Exact(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coef::Exact(r) => r.is_zero(),
            Coef::Real(v) => *v == 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coef::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Coef::Real(v) => *v,
        }
    }

    pub fn add(&self, other: &Coef) -> Coef {
        match (self, other) {
            (Coef::Exact(a), Coef::Exact(b)) => Coef::Exact(a + b),
            _ => Coef::Real(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul_int(&self, k: &BigInt) -> Coef {
        match self {
            Coef::Exact(r) => Coef::Exact(r * BigRational::from_integer(k.clone())),
            Coef::Real(v) => Coef::Real(v * k.to_f64().unwrap()),
        }
    }

    /// Distance to the nearest integer.
    pub fn dist_to_int(&self) -> f64 {
        match self {
            Coef::Exact(r) => {
                let f = r - r.floor();
                let d = f.clone().min(BigRational::one() - f);
                d.to_f64().unwrap()
            }
            Coef::Real(v) => (v - v.round()).abs(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Coef::Exact(r) => Value::String(format_rational(r)),
            Coef::Real(v) => serde_json::Number::from_f64(*v).map(Value::Number).unwrap_or(Value::Null),
        }
    }

    fn from_json(v: &Value) -> Result<Coef> {
        match v {
            Value::String(s) => {
                let t = s.trim();
                let (n, d) = t.split_once('/').unwrap_or((t, "1"));
                let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient {s:?}")))?;
                let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient {s:?}")))?;
                if d.is_zero() {
                    return Err(Error::Parse(format!("zero denominator in {s:?}")));
                }
                Ok(Coef::Exact(BigRational::new(n, d)))
            }
            Value::Number(n) => match n.as_i64() {
                Some(i) => Ok(Coef::Exact(BigRational::from_integer(BigInt::from(i)))),
                None => Ok(Coef::Real(n.as_f64().ok_or_else(|| Error::Parse("bad number".into()))?)),
            },
            other => Err(Error::Parse(format!("coefficient must be a string or number, got {other}"))),
        }
    }
}

/// A coefficient prepared for repeated `floor`/`frac` of integer multiples.
#[derive(Clone, Debug)]
enum Compiled {
    Dyadic { mant: i128, exp: i32 },
    Small { num: i128, den: i128 },
    Big(BigRational),
}

impl Compiled {
    fn new(c: &Coef) -> Self {
        match c {
            Coef::Real(v) => {
                if *v == 0.0 || !v.is_finite() {
                    return Compiled::Dyadic { mant: 0, exp: 0 };
                }
                let bits = v.to_bits();
                let sign = if bits >> 63 == 0 { 1i128 } else { -1 };
                let e = ((bits >> 52) & 0x7ff) as i32;
                let f = (bits & ((1u64 << 52) - 1)) as i128;
                let (mant, exp) = if e == 0 { (f, -1074) } else { (f | (1i128 << 52), e - 1075) };
                Compiled::Dyadic { mant: sign * mant, exp }
            }
            Coef::Exact(r) => match (r.numer().to_i64(), r.denom().to_i64()) {
                (Some(n), Some(d)) => Compiled::Small { num: n as i128, den: d as i128 },
                _ => Compiled::Big(r.clone()),
            },
        }
    }

    fn split_big(r: &BigRational, k: i128) -> (i128, f64) {
        let v = r * BigRational::from_integer(BigInt::from(k));
        let fl = v.floor();
        let frac = (&v - &fl).to_f64().unwrap();
        (fl.to_integer().to_i128().unwrap_or(0), frac)
    }

    fn as_rational(&self) -> BigRational {
        match self {
            Compiled::Dyadic { mant, exp } => BigRational::from_integer(BigInt::from(*mant)) * pow2(*exp),
            Compiled::Small { num, den } => BigRational::new(BigInt::from(*num), BigInt::from(*den)),
            Compiled::Big(r) => r.clone(),
        }
    }

    fn split_bigint(&self, k: &BigInt) -> (i128, f64) {
        let v = self.as_rational() * BigRational::from_integer(k.clone());
        let fl = v.floor();
        ((fl.to_integer().to_i128().unwrap_or(0)), (&v - &fl).to_f64().unwrap())
    }

    /// `(floor(c·k), frac(c·k))`, exact up to the final float rounding of the fraction.
    fn split(&self, k: i128) -> (i128, f64) {
        match *self {
            Compiled::Dyadic { mant, exp } => {
                let Some(p) = mant.checked_mul(k) else {
                    let r = BigRational::new(BigInt::from(mant), BigInt::one()) * pow2(exp);
                    return Self::split_big(&r, k);
                };
                if exp >= 0 {
                    let int = if exp < 64 { p.checked_mul(1i128 << exp).unwrap_or(0) } else { 0 };
                    return (int, 0.0);
                }
                let s = (-exp) as u32;
                if s >= 120 {
                    let v = p as f64 * 2f64.powi(exp);
                    let fl = v.floor();
                    return (fl as i128, v - fl);
                }
                let fl = p >> s;
                let rem = p - (fl << s);
                let frac = rem as f64 / (1i128 << s) as f64;
                if frac >= 1.0 {
                    (fl + 1, 0.0)
                } else {
                    (fl, frac)
                }
            }
            Compiled::Small { num, den } => match num.checked_mul(k) {
                Some(p) => (p.div_euclid(den), p.rem_euclid(den) as f64 / den as f64),
                None => Self::split_big(&BigRational::new(BigInt::from(num), BigInt::from(den)), k),
            },
            Compiled::Big(ref r) => Self::split_big(r, k),
        }
    }
}

fn pow2(e: i32) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

fn monomial_value(n: &[i64], e: &[u32]) -> Option<i128> {
    let mut v: i128 = 1;
    for (&x, &k) in n.iter().zip(e) {
        for _ in 0..k {
            v = v.checked_mul(x as i128)?;
        }
    }
    Some(v)
}

/// Real polynomial `Z^t → R`, read modulo 1 where needed.
#[derive(Clone, Debug, PartialEq)]
pub struct RPoly {
    pub params: usize,
    pub terms: BTreeMap<Vec<u32>, Coef>,
}

impl RPoly {
    pub fn zero(params: usize) -> Self {
        Self { params, terms: BTreeMap::new() }
    }

    pub fn from_terms(params: usize, terms: impl IntoIterator<Item = (Vec<u32>, Coef)>) -> Self {
        let mut p = Self::zero(params);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    /// One-parameter polynomial from coefficients `c_0, c_1, …`.
    pub fn univariate(coeffs: &[Coef]) -> Self {
        Self::from_terms(1, coeffs.iter().enumerate().map(|(k, c)| (vec![k as u32], c.clone())))
    }

    pub fn add_term(&mut self, e: Vec<u32>, c: Coef) {
        assert_eq!(e.len(), self.params);
        if c.is_zero() {
            return;
        }
        let next = match self.terms.get(&e) {
            Some(old) => old.add(&c),
            None => c,
        };
        if next.is_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, next);
        }
    }

    pub fn coeff(&self, e: &[u32]) -> Option<&Coef> {
        self.terms.get(e)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &RPoly) -> RPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale_int(&self, k: i64) -> RPoly {
        let k = BigInt::from(k);
        RPoly::from_terms(self.params, self.terms.iter().map(|(e, c)| (e.clone(), c.mul_int(&k))))
    }

    /// Per-term contributions `N^i ‖β_i‖` over nonzero multi-indices.
    pub fn smoothness_terms(&self, box_: &[u64]) -> Vec<(Vec<u32>, f64)> {
        self.terms
            .iter()
            .filter(|(e, _)| e.iter().any(|&k| k > 0))
            .map(|(e, c)| {
                let scale: f64 = box_.iter().zip(e).map(|(&n, &k)| (n as f64).powi(k as i32)).product();
                (e.clone(), scale * c.dist_to_int())
            })
            .collect()
    }

    pub fn smoothness_norm(&self, box_: &[u64]) -> f64 {
        self.smoothness_terms(box_).into_iter().map(|t| t.1).fold(0.0, f64::max)
    }

    /// Substitute integer polynomials for the variables.
    pub fn compose(&self, subs: &[Poly<BigInt>]) -> RPoly {
        assert_eq!(subs.len(), self.params);
        let target = subs.first().map(|s| s.nvars()).unwrap_or(0);
        let mut powers: Vec<Vec<Poly<BigInt>>> =
            subs.iter().map(|s| vec![Poly::constant(target, BigInt::one()), s.clone()]).collect();
        let mut out = RPoly::zero(target);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(target, BigInt::one());
            for (i, &k) in e.iter().enumerate() {
                while powers[i].len() <= k as usize {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][k as usize];
            }
            for (ex, v) in t.terms() {
                out.add_term(ex.clone(), c.mul_int(v));
            }
        }
        out
    }

    fn compiled(&self) -> Vec<(Vec<u32>, Compiled)> {
        self.terms.iter().map(|(e, c)| (e.clone(), Compiled::new(c))).collect()
    }
}

/// Evaluation kernel of one coordinate polynomial.
#[derive(Clone, Debug)]
struct Kernel(Vec<(Vec<u32>, Compiled)>);

impl Kernel {
    /// `(floor(P(n)·k), frac(P(n)·k))`.
    fn split(&self, n: &[i64], k: i128) -> (i128, f64) {
        let mut int: i128 = 0;
        let mut frac = 0.0;
        for (e, c) in &self.0 {
            let m = monomial_value(n, e).and_then(|m| m.checked_mul(k));
            let (i, f) = match m {
                Some(m) => c.split(m),
                None => {
                    let mut big = BigInt::from(k);
                    for (&x, &ei) in n.iter().zip(e) {
                        big *= BigInt::from(x).pow(ei);
                    }
                    c.split_bigint(&big)
                }
            };
            int = int.wrapping_add(i);
            frac += f;
        }
        let fl = frac.floor();
        (int.wrapping_add(fl as i128), frac - fl)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Torus,
    Heisenberg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nilmanifold {
    pub kind: ManifoldKind,
    /// `m_G`
    pub dim: usize,
    /// Filtration degree `ℓ`.
    pub degree: u32,
    /// Rationality parameter.
    #[serde(rename = "Q")]
    pub q: u32,
}

impl Nilmanifold {
    pub fn torus(dim: usize, degree: u32) -> Self {
        Self { kind: ManifoldKind::Torus, dim, degree, q: 2 }
    }

    pub fn heisenberg() -> Self {
        Self { kind: ManifoldKind::Heisenberg, dim: 3, degree: 2, q: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ManifoldKind::Torus if !(1..=3).contains(&self.dim) || self.degree < 1 => {
                Err(Error::InvalidArgument("torus needs 1 <= dim <= 3 and degree >= 1".into()))
            }
            ManifoldKind::Heisenberg if self.dim != 3 || self.degree != 2 => {
                Err(Error::InvalidArgument("Heisenberg manifold has dim 3 and degree 2".into()))
            }
            _ if self.q < 2 => Err(Error::InvalidArgument("rationality parameter Q must be at least 2".into())),
            _ => Ok(()),
        }
    }

    /// Number of horizontal coordinates.
    pub fn horizontal(&self) -> usize {
        match self.kind {
            ManifoldKind::Torus => self.dim,
            ManifoldKind::Heisenberg => 2,
        }
    }
}

/// A polynomial sequence `Z^t → G`, given by its coordinate polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySequence {
    pub manifold: Nilmanifold,
    pub params: usize,
    pub coords: Vec<RPoly>,
    /// Degree multiplier of the refined filtration after composing with a
    /// degree-`t` polynomial (1 for an original sequence).
    pub degree_scale: u32,
}

impl PolySequence {
    pub fn new(manifold: Nilmanifold, coords: Vec<RPoly>) -> Result<Self> {
        let params = coords.first().map(|c| c.params).unwrap_or(1);
        let s = Self { manifold, params, coords, degree_scale: 1 };
        s.validate()?;
        Ok(s)
    }

    /// One-parameter torus sequence `n ↦ (P_1(n), …)`.
    pub fn torus(coords: Vec<Vec<Coef>>) -> Result<Self> {
        let degree = coords.iter().map(|c| c.len().saturating_sub(1) as u32).max().unwrap_or(1).max(1);
        Self::new(Nilmanifold::torus(coords.len(), degree), coords.iter().map(|c| RPoly::univariate(c)).collect())
    }

    /// One-parameter Heisenberg sequence with linear `x`, `y` and quadratic `z`.
    pub fn heisenberg(x: &[Coef], y: &[Coef], z: &[Coef]) -> Result<Self> {
        Self::new(Nilmanifold::heisenberg(), vec![RPoly::univariate(x), RPoly::univariate(y), RPoly::univariate(z)])
    }

    /// Filtration condition: coordinate in step `j` has degree at most `j`
    /// (times the refinement factor).
    pub fn validate(&self) -> Result<()> {
        self.manifold.validate()?;
        if self.coords.len() != self.manifold.dim {
            return Err(Error::LengthMismatch { expected: self.manifold.dim, got: self.coords.len() });
        }
        if self.coords.iter().any(|c| c.params != self.params) || self.params == 0 || self.params > 3 {
            return Err(Error::InvalidArgument("coordinate polynomials need a common parameter count in 1..=3".into()));
        }
        let caps: Vec<u32> = match self.manifold.kind {
            ManifoldKind::Torus => vec![self.manifold.degree * self.degree_scale; self.manifold.dim],
            ManifoldKind::Heisenberg => vec![self.degree_scale, self.degree_scale, 2 * self.degree_scale],
        };
        for (i, (c, cap)) in self.coords.iter().zip(caps).enumerate() {
            if c.degree() > cap {
                return Err(Error::DegreeOverflow { got: c.degree(), max: cap });
            }
            let _ = i;
        }
        Ok(())
    }

    fn kernels(&self) -> Vec<Kernel> {
        self.coords.iter().map(|c| Kernel(c.compiled())).collect()
    }

    /// Fundamental-domain coordinates of `g(n)Γ`.
    pub fn point(&self, n: &[i64]) -> Vec<f64> {
        point_with(&self.kernels(), self.manifold.kind, n)
    }

    /// Compiled evaluator for repeated point queries.
    pub fn evaluator(&self) -> Evaluator {
        Evaluator { kernels: self.kernels(), kind: self.manifold.kind }
    }

    /// The horizontal character `η` composed with the sequence.
    pub fn character_poly(&self, eta: &[i64]) -> RPoly {
        let mut out = RPoly::zero(self.params);
        for (k, c) in eta.iter().zip(&self.coords) {
            if *k != 0 {
                out = out.add(&c.scale_int(*k));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let coords: Vec<Value> = self
            .coords
            .iter()
            .map(|c| {
                let mut m = Map::new();
                for (e, v) in &c.terms {
                    let key = e.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
                    m.insert(key, v.to_json());
                }
                Value::Object(m)
            })
            .collect();
        serde_json::json!({
            "kind": self.manifold.kind,
            "dim": self.manifold.dim,
            "degree": self.manifold.degree,
            "Q": self.manifold.q,
            "params": self.params,
            "degree_scale": self.degree_scale,
            "coords": coords,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let kind: ManifoldKind = serde_json::from_value(v.get("kind").cloned().ok_or_else(|| Error::Parse("missing kind".into()))?)?;
        let coords_v = v.get("coords").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing coords".into()))?;
        let params = v.get("params").and_then(Value::as_u64).unwrap_or(1) as usize;
        let mut coords = Vec::new();
        for c in coords_v {
            let obj = c.as_object().ok_or_else(|| Error::Parse("coordinate must be an object".into()))?;
            let mut p = RPoly::zero(params);
            for (key, val) in obj {
                let e: Vec<u32> = key
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad multi-index {key:?}"))))
                    .collect::<Result<_>>()?;
                if e.len() != params {
                    return Err(Error::Parse(format!("multi-index {key:?} does not have {params} entries")));
                }
                p.add_term(e, Coef::from_json(val)?);
            }
            coords.push(p);
        }
        let dim = v.get("dim").and_then(Value::as_u64).map(|d| d as usize).unwrap_or(coords.len());
        let degree = match kind {
            ManifoldKind::Heisenberg => 2,
            ManifoldKind::Torus => {
                v.get("degree").and_then(Value::as_u64).map(|d| d as u32).unwrap_or_else(|| coords.iter().map(RPoly::degree).max().unwrap_or(1).max(1))
            }
        };
        let q = v.get("Q").and_then(Value::as_u64).unwrap_or(2) as u32;
        let manifold = Nilmanifold { kind, dim: if kind == ManifoldKind::Heisenberg { 3 } else { dim }, degree, q };
        let s = Self {
            manifold,
            params,
            coords,
            degree_scale: v.get("degree_scale").and_then(Value::as_u64).unwrap_or(1) as u32,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug)]
pub struct Evaluator {
    kernels: Vec<Kernel>,
    kind: ManifoldKind,
}

impl Evaluator {
    pub fn point(&self, n: &[i64]) -> Vec<f64> {
        point_with(&self.kernels, self.kind, n)
    }
}

fn point_with(kernels: &[Kernel], kind: ManifoldKind, n: &[i64]) -> Vec<f64> {
    match kind {
        ManifoldKind::Torus => kernels.iter().map(|k| k.split(n, 1).1).collect(),
        ManifoldKind::Heisenberg => {
            let (_, xf) = kernels[0].split(n, 1);
            let (yi, yf) = kernels[1].split(n, 1);
            let (_, zf) = kernels[2].split(n, 1);
            // Right-multiply by (a, b, c) with b = −floor(y): z gains x·b.
            let (_, xb) = kernels[0].split(n, -yi);
            let z = zf + xb;
            vec![xf, yf, z - z.floor()]
        }
    }
}

pub type Point3 = [BigRational; 3];

pub fn heisenberg_mul(g: &Point3, h: &Point3) -> Point3 {
    [&g[0] + &h[0], &g[1] + &h[1], &g[2] + &h[2] + &g[0] * &h[1]]
}

pub fn heisenberg_inv(g: &Point3) -> Point3 {
    [-&g[0], -&g[1], -&g[2] + &g[0] * &g[1]]
}

/// Torus reduction: fractional parts.
pub fn reduce_torus(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v - v.floor()).collect()
}

/// Heisenberg reduction `g ↦ gγ` into `[0,1)³`, returning `γ` as well.
pub fn reduce_heisenberg(g: [f64; 3]) -> ([f64; 3], [i64; 3]) {
    let a = -g[0].floor();
    let b = -g[1].floor();
    let c = -(g[2] + g[0] * b).floor();
    let z = g[2] + c + g[0] * b;
    ([g[0] + a, g[1] + b, z - z.floor()], [a as i64, b as i64, c as i64])
}

/// Exact Heisenberg reduction over the rationals.
pub fn reduce_heisenberg_exact(g: &Point3) -> (Point3, [BigInt; 3]) {
    let a = -g[0].floor().to_integer();
    let b = -g[1].floor().to_integer();
    let rb = BigRational::from_integer(b.clone());
    let c = -(&g[2] + &g[0] * &rb).floor().to_integer();
    let gamma = [BigRational::from_integer(a.clone()), rb, BigRational::from_integer(c.clone())];
    (heisenberg_mul(g, &gamma), [a, b, c])
}

/// Surrogate distance: sup-norm between `p` and nearby lattice translates of `q`.
pub fn distance(kind: ManifoldKind, p: &[f64], q: &[f64]) -> f64 {
    let wrap = |d: f64| {
        let d = d - d.round();
        d.abs()
    };
    match kind {
        ManifoldKind::Torus => p.iter().zip(q).map(|(a, b)| wrap(a - b)).fold(0.0, f64::max),
        ManifoldKind::Heisenberg => {
            let mut best = f64::INFINITY;
            for a in -1..=1 {
                for b in -1..=1 {
                    let (a, b) = (a as f64, b as f64);
                    let t = [q[0] + a, q[1] + b, q[2] + q[0] * b];
                    let d = (p[0] - t[0]).abs().max((p[1] - t[1]).abs()).max(wrap(p[2] - t[2]));
                    best = best.min(d);
                }
            }
            best
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestKind {
    Cos(Vec<i64>),
    Sin(Vec<i64>),
    Bump,
    VerticalCos,
    VerticalSin,
}

/// A smooth test function on fundamental-domain coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub name: String,
    pub kind: TestKind,
    pub mean: f64,
    pub lipschitz: f64,
}

const BUMP_LIP: f64 = 4.081_048_498_805_58; // 3√3π/4

fn sin4(x: f64) -> f64 {
    (PI * x).sin().powi(4)
}

impl TestFunction {
    pub fn character(freq: Vec<i64>, cosine: bool) -> Self {
        let l1: i64 = freq.iter().map(|k| k.abs()).sum();
        let name = format!("{}(2π·{:?})", if cosine { "cos" } else { "sin" }, freq);
        let kind = if cosine { TestKind::Cos(freq) } else { TestKind::Sin(freq) };
        Self { name, kind, mean: 0.0, lipschitz: 2.0 * PI * l1 as f64 }
    }

    pub fn eval(&self, h: &[f64]) -> f64 {
        match &self.kind {
            TestKind::Cos(k) => (2.0 * PI * k.iter().zip(h).map(|(&a, b)| a as f64 * b).sum::<f64>()).cos(),
            TestKind::Sin(k) => (2.0 * PI * k.iter().zip(h).map(|(&a, b)| a as f64 * b).sum::<f64>()).sin(),
            TestKind::Bump => h.iter().map(|&v| sin4(v)).product(),
            TestKind::VerticalCos => sin4(h[0]) * (2.0 * PI * (h[2] - h[0] * h[1])).cos(),
            TestKind::VerticalSin => sin4(h[0]) * (2.0 * PI * (h[2] - h[0] * h[1])).sin(),
        }
    }
}

/// Nonzero frequency vectors in `Z^k`, ordered by sup-norm then lexicographically,
/// one of each `±` pair.
fn frequencies(k: usize, count: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut r = 1i64;
    while out.len() < count {
        let mut level = Vec::new();
        let total = (2 * r + 1).pow(k as u32);
        for idx in 0..total {
            let mut v = Vec::with_capacity(k);
            let mut t = idx;
            for _ in 0..k {
                v.push(t % (2 * r + 1) - r);
                t /= 2 * r + 1;
            }
            v.reverse();
            let sup = v.iter().map(|x| x.abs()).max().unwrap();
            let first = v.iter().find(|&&x| x != 0).copied().unwrap_or(0);
            if sup == r && first > 0 {
                level.push(v);
            }
        }
        level.sort_by_key(|v| (v.iter().map(|x| x.abs()).sum::<i64>(), v.clone()));
        out.extend(level);
        r += 1;
    }
    out.truncate(count);
    out
}

/// The fixed 12-function suite.
///
/// Torus: cosine and sine of the first five frequency vectors, the cosine of
/// the sixth, and a product bump. Heisenberg: cosine and sine of the first
/// four horizontal frequencies, the cosine of the fifth, the bump in `(x, y)`,
/// and the two vertical functions `ψ(x)·e(z − xy)` with `ψ = sin⁴(πx)`.
pub fn test_suite(manifold: &Nilmanifold) -> Vec<TestFunction> {
    let k = manifold.horizontal();
    let mut out = Vec::with_capacity(12);
    let (pairs, extra) = match manifold.kind {
        ManifoldKind::Torus => (5, 1),
        ManifoldKind::Heisenberg => (4, 1),
    };
    let freqs = frequencies(k, pairs + extra);
    for f in &freqs[..pairs] {
        out.push(TestFunction::character(f.clone(), true));
        out.push(TestFunction::character(f.clone(), false));
    }
    out.push(TestFunction::character(freqs[pairs].clone(), true));
    out.push(TestFunction {
        name: "bump".into(),
        kind: TestKind::Bump,
        mean: 0.375f64.powi(k as i32),
        lipschitz: BUMP_LIP * k as f64,
    });
    if manifold.kind == ManifoldKind::Heisenberg {
        let lip = BUMP_LIP + 8.0 * PI;
        out.push(TestFunction { name: "vertical-cos".into(), kind: TestKind::VerticalCos, mean: 0.0, lipschitz: lip });
        out.push(TestFunction { name: "vertical-sin".into(), kind: TestKind::VerticalSin, mean: 0.0, lipschitz: lip });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub progressions_per_axis: usize,
    pub density_floor: f64,
    pub seed: u64,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        Self { progressions_per_axis: 200, density_floor: 0.1, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub eta: Vec<i64>,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub delta_estimate: f64,
    pub worst_function: String,
    pub witness: Option<Witness>,
    pub progressions_tested: usize,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
}

/// Progression `{a + d j : j < len}` of 0-based indices along one axis.
#[derive(Clone, Copy, Debug)]
struct Progression {
    a: u64,
    d: u64,
    len: u64,
}

fn sample_progressions(n: &[u64], cfg: &DiscrepancyConfig) -> Result<Vec<Vec<Progression>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = cfg.progressions_per_axis * n.len();
    let mut out = vec![n.iter().map(|&ni| Progression { a: 0, d: 1, len: ni }).collect::<Vec<_>>()];
    for _ in 0..count {
        let mut prog = Vec::with_capacity(n.len());
        for &ni in n {
            let min_len = ((cfg.density_floor * ni as f64).ceil() as u64).max(1);
            if min_len > ni {
                return Err(Error::InvalidArgument("empty progression sample".into()));
            }
            let d_max = ((ni - 1) / min_len.saturating_sub(1).max(1)).clamp(1, (1.0 / cfg.density_floor).floor().max(1.0) as u64);
            let d = rng.gen_range(1..=d_max);
            let len_max = (ni - 1) / d + 1;
            let len = rng.gen_range(min_len.min(len_max)..=len_max);
            let span = d * (len - 1);
            let a = rng.gen_range(0..=ni - 1 - span);
            prog.push(Progression { a, d, len });
        }
        out.push(prog);
    }
    Ok(out)
}

fn index_points(seq: &PolySequence, n: &[u64]) -> Vec<Vec<f64>> {
    let kernels = seq.kernels();
    let total: u64 = n.iter().product();
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut v = vec![0i64; n.len()];
            for ax in (0..n.len()).rev() {
                v[ax] = (idx % n[ax]) as i64 + 1;
                idx /= n[ax];
            }
            point_with(&kernels, seq.manifold.kind, &v)
        })
        .collect()
}

fn progression_average(values: &[f64], n: &[u64], prog: &[Progression]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0u64;
    let mut j = vec![0u64; n.len()];
    loop {
        let mut idx = 0u64;
        for ax in 0..n.len() {
            idx = idx * n[ax] + prog[ax].a + prog[ax].d * j[ax];
        }
        sum += values[idx as usize];
        count += 1;
        let mut ax = n.len();
        loop {
            if ax == 0 {
                return sum / count as f64;
            }
            ax -= 1;
            j[ax] += 1;
            if j[ax] < prog[ax].len {
                break;
            }
            j[ax] = 0;
        }
    }
}

/// Empirical sup of `|average − mean| / Lip` over the suite and sampled progressions.
pub fn discrepancy(seq: &PolySequence, n: &[u64], cfg: &DiscrepancyConfig) -> Result<EquidistributionReport> {
    seq.validate()?;
    if n.len() != seq.params || n.contains(&0) {
        return Err(Error::InvalidArgument("box must have one positive side per parameter".into()));
    }
    let total: u64 = n.iter().product();
    if total > 10_000_000 {
        return Err(Error::InvalidArgument(format!("box size {total} exceeds 10^7")));
    }
    let progs = sample_progressions(n, cfg)?;
    let points = index_points(seq, n);
    let suite = test_suite(&seq.manifold);
    let results: Vec<(f64, String)> = suite
        .par_iter()
        .map(|f| {
            let values: Vec<f64> = points.iter().map(|p| f.eval(p)).collect();
            let worst = progs
                .iter()
                .map(|p| (progression_average(&values, n, p) - f.mean).abs() / f.lipschitz)
                .fold(0.0, f64::max);
            (worst, f.name.clone())
        })
        .collect();
    let (delta, name) = results.into_iter().fold((0.0, String::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    Ok(EquidistributionReport {
        delta_estimate: delta.min(2.0),
        worst_function: name,
        witness: None,
        progressions_tested: progs.len(),
        seed: cfg.seed,
        n: n.to_vec(),
    })
}

/// `|average of e(η·h(g(n)))|` over the box, without Lipschitz normalisation.
pub fn character_average(seq: &PolySequence, eta: &[i64], n: &[u64]) -> f64 {
    let points = index_points(seq, n);
    let (mut re, mut im) = (0.0, 0.0);
    for p in &points {
        let phase = 2.0 * PI * eta.iter().zip(p).map(|(&k, v)| k as f64 * v).sum::<f64>();
        re += phase.cos();
        im += phase.sin();
    }
    (re * re + im * im).sqrt() / points.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Certificate {
    Equidistributed { report: EquidistributionReport },
    Witness { witness: Witness, report: EquidistributionReport },
    Inconclusive { bound: u64, report: EquidistributionReport },
}

impl Certificate {
    pub fn report(&self) -> &EquidistributionReport {
        match self {
            Certificate::Equidistributed { report } | Certificate::Witness { report, .. } | Certificate::Inconclusive { report, .. } => report,
        }
    }
}

/// Cap on the number of character vectors examined.
const CHARACTER_BUDGET: f64 = 2.0e6;

/// Default search bound `min(δ^{-3}, 10⁴)`.
pub fn default_bound(delta: f64) -> u64 {
    delta.powi(-3).clamp(1.0, 1.0e4) as u64
}

/// Measure first; if the sequence is not `δ`-equidistributed, look for the
/// horizontal character with the smallest smoothness norm (ties broken by
/// `|η|` then lexicographically) among those with norm at most `B`.
pub fn equidistribution_certificate(
    seq: &PolySequence,
    n: &[u64],
    delta: f64,
    bound: Option<u64>,
    cfg: &DiscrepancyConfig,
) -> Result<Certificate> {
    let mut report = discrepancy(seq, n, cfg)?;
    if report.delta_estimate <= delta {
        return Ok(Certificate::Equidistributed { report });
    }
    let b = bound.unwrap_or_else(|| default_bound(delta));
    let k = seq.manifold.horizontal();
    let reach = (CHARACTER_BUDGET.powf(1.0 / k as f64) / 2.0).floor() as u64;
    let b_eff = b.min(reach).max(1) as i64;
    let mut best: Option<(f64, i64, Vec<i64>)> = None;
    let side = 2 * b_eff + 1;
    for idx in 0..side.pow(k as u32) {
        let mut eta = Vec::with_capacity(k);
        let mut t = idx;
        for _ in 0..k {
            eta.push(t % side - b_eff);
            t /= side;
        }
        eta.reverse();
        let first = eta.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        if first <= 0 {
            continue;
        }
        let size = eta.iter().map(|x| x.abs()).max().unwrap();
        let norm = seq.character_poly(&eta).smoothness_norm(n);
        if norm > b as f64 {
            continue;
        }
        let cand = (norm, size, eta);
        let better = match &best {
            None => true,
            Some(cur) => (cand.0, cand.1, &cand.2) < (cur.0, cur.1, &cur.2),
        };
        if better {
            best = Some(cand);
        }
    }
    match best {
        Some((norm, _, eta)) => {
            let w = Witness { eta, norm };
            report.witness = Some(w.clone());
            Ok(Certificate::Witness { witness: w, report })
        }
        None => Ok(Certificate::Inconclusive { bound: b, report }),
    }
}

/// `n ↦ g(P(n₁, …, n_t))` for a homogeneous integer polynomial `P` of degree `t`.
pub fn compose_with_polynomial(seq: &PolySequence, p: &Poly<BigInt>, coef_bound: u64, max_degree: u32) -> Result<PolySequence> {
    if seq.params != 1 {
        return Err(Error::InvalidArgument("composition needs a one-parameter sequence".into()));
    }
    let t = p.nvars() as u32;
    if t == 0 || !p.is_homogeneous(t) || p.is_zero() {
        return Err(Error::InvalidArgument(format!("P must be homogeneous of degree {t}")));
    }
    if p.terms().any(|(_, c)| c.abs() > BigInt::from(coef_bound)) {
        return Err(Error::InvalidArgument(format!("coefficients of P exceed {coef_bound}")));
    }
    compose_general(seq, p, t, max_degree)
}

fn compose_general(seq: &PolySequence, p: &Poly<BigInt>, scale: u32, max_degree: u32) -> Result<PolySequence> {
    let coords: Vec<RPoly> = seq.coords.iter().map(|c| c.compose(std::slice::from_ref(p))).collect();
    for c in &coords {
        if c.degree() > max_degree {
            return Err(Error::DegreeOverflow { got: c.degree(), max: max_degree });
        }
    }
    let out = PolySequence {
        manifold: seq.manifold.clone(),
        params: p.nvars(),
        coords,
        degree_scale: seq.degree_scale * scale,
    };
    out.validate()?;
    Ok(out)
}

/// `n ↦ g(d² n + x_d)`, coordinatewise in every parameter.
pub fn subsequence_affine(seq: &PolySequence, d: u64, offset: &[i64]) -> Result<PolySequence> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    if offset.len() != seq.params {
        return Err(Error::LengthMismatch { expected: seq.params, got: offset.len() });
    }
    let d2 = (d * d) as i64;
    if offset.iter().any(|&x| x < 0 || x >= d2) {
        return Err(Error::InvalidArgument("offset must lie in [0, d²)".into()));
    }
    let t = seq.params;
    let subs: Vec<Poly<BigInt>> = (0..t)
        .map(|i| &Poly::var(t, i).scale(&BigInt::from(d2)) + &Poly::constant(t, BigInt::from(offset[i])))
        .collect();
    let coords = seq.coords.iter().map(|c| c.compose(&subs)).collect();
    Ok(PolySequence { coords, ..seq.clone() })
}

/// Integer polynomial `(P(Wq·x + y) − A′)/(Wq)`, with the divisibility and
/// the leading-part shape `(Wq)^{t−1} P(x)` asserted.
pub fn progression_polynomial(form: &NormForm, w: u64, q: u64, y: &[i64], a_prime: i64) -> Result<Poly<BigInt>> {
    let t = form.n_vars;
    if y.len() != t {
        return Err(Error::LengthMismatch { expected: t, got: y.len() });
    }
    let wq = w.checked_mul(q).ok_or_else(|| Error::InvalidArgument("Wq overflows".into()))? as i64;
    if wq <= 0 || a_prime.abs() >= wq || y.iter().any(|&v| v < 0 || v >= wq) {
        return Err(Error::Congruence("need |A'| < Wq and 0 <= y_i < Wq".into()));
    }
    let py = form.evaluate_i64(y)?;
    if (&py - BigInt::from(a_prime)).mod_floor(&BigInt::from(wq)) != BigInt::zero() {
        return Err(Error::Congruence(format!("P(y) = {py} is not congruent to {a_prime} mod {wq}")));
    }
    let p = form.as_poly();
    let subs: Vec<Poly<BigInt>> = (0..t)
        .map(|i| &Poly::var(t, i).scale(&BigInt::from(wq)) + &Poly::constant(t, BigInt::from(y[i])))
        .collect();
    let numer = &p.substitute(&subs) - &Poly::constant(t, BigInt::from(a_prime));
    let wqb = BigInt::from(wq);
    let mut out = Poly::zero(t);
    for (e, c) in numer.terms() {
        if !(c % &wqb).is_zero() {
            return Err(Error::Congruence(format!("coefficient {c} is not divisible by {wq}")));
        }
        out.add_term(e.clone(), c / &wqb);
    }
    let deg = p.total_degree();
    let lead = wqb.pow(deg - 1);
    for (e, c) in p.terms() {
        if out.coeff(e) != c * &lead {
            return Err(Error::Congruence("leading part differs from (Wq)^{t-1} P(x)".into()));
        }
    }
    Ok(out)
}

/// `x ↦ g((P(Wq·x + y) − A′)/(Wq))`.
pub fn progression_subsequence(
    seq: &PolySequence,
    form: &NormForm,
    w: u64,
    q: u64,
    y: &[i64],
    a_prime: i64,
    max_degree: u32,
) -> Result<PolySequence> {
    if seq.params != 1 {
        return Err(Error::InvalidArgument("progression subsequence needs a one-parameter sequence".into()));
    }
    let p = progression_polynomial(form, w, q, y, a_prime)?;
    compose_general(seq, &p, form.degree(), max_degree)
}

/// Fix all but the last parameter.
pub fn slice_to_one_param(seq: &PolySequence, fixed: &[i64]) -> Result<PolySequence> {
    let t = seq.params;
    if t < 2 {
        return Err(Error::InvalidArgument("slicing needs at least two parameters".into()));
    }
    if fixed.len() != t - 1 {
        return Err(Error::LengthMismatch { expected: t - 1, got: fixed.len() });
    }
    let subs: Vec<Poly<BigInt>> = (0..t)
        .map(|i| if i + 1 < t { Poly::constant(1, BigInt::from(fixed[i])) } else { Poly::var(1, 0) })
        .collect();
    let coords: Vec<RPoly> = seq.coords.iter().map(|c| c.compose(&subs)).collect();
    let out = PolySequence { manifold: seq.manifold.clone(), params: 1, coords, degree_scale: seq.degree_scale };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Coef {
        Coef::rational(n, d)
    }

    #[test]
    fn torus_reduction() {
        assert_eq!(reduce_torus(&[2.75, -0.25]), vec![0.75, 0.75]);
    }

    #[test]
    fn heisenberg_reduction_exact() {
        let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let zero = [q(0, 1), q(0, 1), q(0, 1)];
        assert_eq!(reduce_heisenberg_exact(&zero).0, zero);
        let g = [q(3, 2), q(9, 4), q(39, 10)];
        let (red, gamma) = reduce_heisenberg_exact(&g);
        for c in &red {
            assert!(*c >= q(0, 1) && *c < q(1, 1));
        }
        let gm = [
            BigRational::from_integer(gamma[0].clone()),
            BigRational::from_integer(gamma[1].clone()),
            BigRational::from_integer(gamma[2].clone()),
        ];
        assert_eq!(heisenberg_mul(&red, &heisenberg_inv(&gm)), g);
        let (f, _) = reduce_heisenberg([1.5, 2.25, 3.9]);
        for (a, b) in f.iter().zip(&red) {
            assert!((a - b.to_f64().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothness_examples() {
        let f = RPoly::univariate(&[r(0, 1), r(1, 2)]);
        assert_eq!(f.smoothness_norm(&[10]), 5.0);
        let f = RPoly::univariate(&[r(0, 1), r(0, 1), r(1, 3)]);
        assert!((f.smoothness_norm(&[6]) - 12.0).abs() < 1e-12);
        let f = RPoly::from_terms(2, [(vec![1, 1], r(1, 4))]);
        assert_eq!(f.smoothness_norm(&[4, 8]), 8.0);
    }

    #[test]
    fn split_is_exact_for_dyadic_coefficients() {
        let c = Compiled::new(&Coef::Real(0.375));
        assert_eq!(c.split(7), (2, 0.625));
        assert_eq!(c.split(-7), (-3, 0.375));
        let s = Compiled::new(&Coef::Real(std::f64::consts::SQRT_2));
        let (i, f) = s.split(100_000_000_000);
        let exact = BigRational::from_float(std::f64::consts::SQRT_2).unwrap() * BigRational::from_integer(BigInt::from(100_000_000_000i64));
        assert_eq!(BigInt::from(i), exact.floor().to_integer());
        assert!((f - (&exact - exact.floor()).to_f64().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_points_match_group_reduction() {
        let seq = PolySequence::heisenberg(&[r(0, 1), Coef::Real(0.3)], &[r(1, 7), Coef::Real(0.77)], &[r(0, 1), r(0, 1), Coef::Real(0.1)])
            .unwrap();
        for n in [1i64, 2, 5, 17, 123] {
            let nf = n as f64;
            let g = [0.3 * nf, 1.0 / 7.0 + 0.77 * nf, 0.1 * nf * nf];
            let (red, _) = reduce_heisenberg(g);
            let p = seq.point(&[n]);
            assert!(distance(ManifoldKind::Heisenberg, &p, &red) < 1e-9, "n = {n}: {p:?} vs {red:?}");
        }
    }

    #[test]
    fn vertical_functions_respect_identifications() {
        let suite = test_suite(&Nilmanifold::heisenberg());
        assert_eq!(suite.len(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in &suite {
            for _ in 0..200 {
                let (x, z): (f64, f64) = (rng.gen(), rng.gen());
                // (x, 1, z) ~ (x, 0, z − x)
                let a = f.eval(&[x, 1.0, z]);
                let b = f.eval(&[x, 0.0, (z - x).rem_euclid(1.0)]);
                assert!((a - b).abs() < 1e-12, "{}", f.name);
                let y: f64 = rng.gen();
                assert!((f.eval(&[1.0, y, z]) - f.eval(&[0.0, y, z])).abs() < 1e-12);
            }
        }
        assert_eq!(test_suite(&Nilmanifold::torus(1, 1)).len(), 12);
        assert_eq!(test_suite(&Nilmanifold::torus(2, 2)).len(), 12);
    }

    #[test]
    fn lipschitz_constants_hold_on_samples() {
        for m in [Nilmanifold::heisenberg(), Nilmanifold::torus(1, 1), Nilmanifold::torus(2, 1)] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for f in test_suite(&m) {
                for _ in 0..2000 {
                    let p: Vec<f64> = (0..m.dim).map(|_| rng.gen()).collect();
                    let q: Vec<f64> = p.iter().map(|v| (v + rng.gen_range(-0.02..0.02f64)).rem_euclid(1.0)).collect();
                    let d = distance(m.kind, &p, &q);
                    if d > 1e-9 {
                        assert!((f.eval(&p) - f.eval(&q)).abs() / d <= f.lipschitz * (1.0 + 1e-9), "{}", f.name);
                    }
                }
            }
        }
    }

    #[test]
    fn certificates() {
        let third = PolySequence::torus(vec![vec![r(0, 1), r(1, 3)]]).unwrap();
        let c = equidistribution_certificate(&third, &[100], 0.01, None, &DiscrepancyConfig::default()).unwrap();
        match c {
            Certificate::Witness { witness, .. } => {
                assert_eq!(witness.eta, vec![3]);
                assert_eq!(witness.norm, 0.0);
            }
            other => panic!("{other:?}"),
        }
        let root2 = PolySequence::torus(vec![vec![r(0, 1), Coef::Real(std::f64::consts::SQRT_2)]]).unwrap();
        let c = equidistribution_certificate(&root2, &[100_000], 0.01, Some(100), &DiscrepancyConfig::default()).unwrap();
        assert!(matches!(c, Certificate::Equidistributed { .. }), "{c:?}");
        assert!(c.report().delta_estimate <= 0.01);
        let h = PolySequence::heisenberg(&[r(0, 1), r(1, 2)], &[r(0, 1), Coef::Real(std::f64::consts::SQRT_2)], &[r(0, 1)]).unwrap();
        let c = equidistribution_certificate(&h, &[1000], 0.01, None, &DiscrepancyConfig::default()).unwrap();
        match c {
            Certificate::Witness { witness, .. } => {
                assert_eq!(witness.eta, vec![2, 0]);
                assert_eq!(witness.norm, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_sequence_discrepancy() {
        let seq = PolySequence::torus(vec![vec![r(1, 4)]]).unwrap();
        let rep = discrepancy(&seq, &[50], &DiscrepancyConfig::default()).unwrap();
        // sin(2π/4) = 1 against Lipschitz constant 2π
        assert!((rep.delta_estimate - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn composition_examples() {
        let alpha = Coef::Real(0.7);
        let beta = r(1, 5);
        let lin = PolySequence::torus(vec![vec![r(0, 1), alpha.clone()]]).unwrap();
        let prod = Poly::from_terms(2, [(vec![1, 1], BigInt::one())]);
        let c = compose_with_polynomial(&lin, &prod, 10, 8).unwrap();
        assert_eq!(c.coords[0].terms.len(), 1);
        assert_eq!(c.coords[0].coeff(&[1, 1]), Some(&alpha));
        let sq = PolySequence::torus(vec![vec![r(0, 1), r(0, 1), beta.clone()]]).unwrap();
        let c = compose_with_polynomial(&sq, &prod, 10, 8).unwrap();
        assert_eq!(c.coords[0].coeff(&[2, 2]), Some(&beta));
        let mixed = PolySequence::torus(vec![vec![r(0, 1), r(1, 3), beta.clone()]]).unwrap();
        let circle = Poly::from_terms(2, [(vec![2, 0], BigInt::one()), (vec![0, 2], BigInt::one())]);
        let c = compose_with_polynomial(&mixed, &circle, 10, 8).unwrap();
        assert_eq!(c.coords[0].coeff(&[2, 2]), Some(&r(2, 5)));
        assert_eq!(c.coords[0].coeff(&[2, 0]), Some(&r(1, 3)));
        assert!(matches!(compose_with_polynomial(&mixed, &circle, 10, 3), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn affine_subsequences() {
        let a = r(2, 7);
        let lin = PolySequence::torus(vec![vec![r(0, 1), a.clone()]]).unwrap();
        let s = subsequence_affine(&lin, 2, &[3]).unwrap();
        assert_eq!(s.coords[0].coeff(&[1]), Some(&r(8, 7)));
        assert_eq!(s.coords[0].coeff(&[0]), Some(&r(6, 7)));
        let sq = PolySequence::torus(vec![vec![r(0, 1), r(0, 1), a.clone()]]).unwrap();
        assert_eq!(subsequence_affine(&sq, 1, &[0]).unwrap(), sq);
        let s = subsequence_affine(&sq, 2, &[1]).unwrap();
        assert_eq!(s.coords[0].coeff(&[2]), Some(&r(32, 7)));
        assert_eq!(s.coords[0].coeff(&[1]), Some(&r(16, 7)));
        assert_eq!(s.coords[0].coeff(&[0]), Some(&r(2, 7)));
    }

    #[test]
    fn progression_polynomials() {
        let sq = NormForm::from_terms(1, &[(&[2], 1)]);
        let p = progression_polynomial(&sq, 2, 1, &[0], 0).unwrap();
        assert_eq!(p.coeff(&[2]), BigInt::from(2));
        let gauss = NormForm::from_terms(2, &[(&[2, 0], 1), (&[0, 2], 1)]);
        let p = progression_polynomial(&gauss, 4, 1, &[1, 0], 1).unwrap();
        assert_eq!(p.coeff(&[2, 0]), BigInt::from(4));
        assert_eq!(p.coeff(&[1, 0]), BigInt::from(2));
        assert_eq!(p.coeff(&[0, 0]), BigInt::zero());
        assert!(matches!(progression_polynomial(&gauss, 4, 1, &[1, 1], 1), Err(Error::Congruence(_))));
        let seq = PolySequence::torus(vec![vec![r(0, 1), Coef::Real(0.3)]]).unwrap();
        let sub = progression_subsequence(&seq, &gauss, 4, 1, &[1, 0], 1, 8).unwrap();
        assert_eq!(sub.params, 2);
        assert_eq!(sub.degree_scale, 2);
    }

    #[test]
    fn slicing() {
        let f = PolySequence::new(Nilmanifold::torus(1, 2), vec![RPoly::from_terms(2, [(vec![1, 1], r(1, 4))])]).unwrap();
        let s = slice_to_one_param(&f, &[2]).unwrap();
        assert_eq!(s.coords[0].coeff(&[1]), Some(&r(1, 2)));
        let g = PolySequence::new(Nilmanifold::torus(1, 2), vec![RPoly::from_terms(2, [(vec![1, 0], r(1, 4))])]).unwrap();
        let s = slice_to_one_param(&g, &[3]).unwrap();
        assert_eq!(s.coords[0].degree(), 0);
    }

    #[test]
    fn json_round_trip() {
        let seq = PolySequence::heisenberg(&[r(0, 1), r(1, 2)], &[r(0, 1), Coef::Real(0.125)], &[r(1, 3), r(0, 1), Coef::Real(0.1)]).unwrap();
        let back = PolySequence::from_json(&seq.to_json().to_string()).unwrap();
        assert_eq!(back, seq);
    }
}
