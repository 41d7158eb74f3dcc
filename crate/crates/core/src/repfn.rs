//! Representation counts `R(m)` and `R*_S(m)` for quadratic fields.
//!
//! An element `x ω_1 + y ω_2` is written as `(X + Y √Δ₀) / L` with `Δ₀` the
//! discriminant of the defining polynomial, so every orbit-selection test
//! reduces to sign checks on integers.

use std::collections::HashMap;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{factorize, isqrt_u128};
use crate::error::{Error, Result};
use crate::numberfield::{FieldSpec, NumberField};

/// Largest `|m|` accepted by [`count_r`] unless a caller opts in to more.
pub const DEFAULT_M_BOUND: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadKind {
    Imaginary,
    Real,
}

/// Exact data of a quadratic norm form `a x² + b xy + c y²` plus the
/// embedding coordinates of the basis.
#[derive(Clone, Debug)]
pub struct QuadData {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    /// `b² − 4ac`, the field discriminant for an integral basis.
    pub disc: i64,
    /// Discriminant of the defining polynomial.
    pub delta0: i64,
    /// `ω_i = (emb[i][0] + emb[i][1] √Δ₀) / l`.
    pub emb: [[i64; 2]; 2],
    pub l: i64,
}

impl QuadData {
    fn new(field: &NumberField) -> Result<Self> {
        if field.degree() != 2 {
            return Err(Error::UnsupportedDegree(field.degree()));
        }
        let coef = |e: [u32; 2]| -> Result<i64> {
            field
                .form
                .terms
                .get(e.as_slice())
                .map(|c| c.to_i64().ok_or_else(|| Error::UnsupportedField("norm form coefficients too large".into())))
                .unwrap_or(Ok(0))
        };
        let (a, b, c) = (coef([2, 0])?, coef([1, 1])?, coef([0, 2])?);
        let mp = &field.spec.min_poly;
        let c0 = mp[0].to_i64().ok_or_else(|| Error::UnsupportedField("min_poly too large".into()))?;
        let c1 = mp[1].to_i64().ok_or_else(|| Error::UnsupportedField("min_poly too large".into()))?;
        let delta0 = c1 * c1 - 4 * c0;
        // θ = (−c1 + √Δ₀)/2, so p + qθ = (p − q c1/2) + (q/2)√Δ₀.
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut parts = Vec::new();
        for row in &field.spec.basis {
            let (p, q) = (&row[0], &row[1]);
            let x = p - q * BigRational::from_integer(BigInt::from(c1)) * &half;
            let y = q * &half;
            parts.push([x, y]);
        }
        let l = parts.iter().flatten().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let to_i = |r: &BigRational| -> Result<i64> {
            (r * BigRational::from_integer(l.clone()))
                .to_integer()
                .to_i64()
                .ok_or_else(|| Error::UnsupportedField("basis too large".into()))
        };
        let emb = [[to_i(&parts[0][0])?, to_i(&parts[0][1])?], [to_i(&parts[1][0])?, to_i(&parts[1][1])?]];
        Ok(Self { a, b, c, disc: b * b - 4 * a * c, delta0, emb, l: l.to_i64().unwrap() })
    }

    #[inline]
    pub fn eval(&self, x: i64, y: i64) -> i128 {
        let (x, y) = (x as i128, y as i128);
        self.a as i128 * x * x + self.b as i128 * x * y + self.c as i128 * y * y
    }

    /// `(X, Y)` with `x ω_1 + y ω_2 = (X + Y √Δ₀)/L`.
    #[inline]
    pub fn embed(&self, x: i64, y: i64) -> (i128, i128) {
        let (x, y) = (x as i128, y as i128);
        (x * self.emb[0][0] as i128 + y * self.emb[1][0] as i128, x * self.emb[0][1] as i128 + y * self.emb[1][1] as i128)
    }

    /// Inverse of [`embed`](Self::embed) when the result is integral.
    pub fn unembed(&self, xx: i128, yy: i128) -> Option<(i64, i64)> {
        let [[a1, b1], [a2, b2]] = self.emb.map(|r| r.map(|v| v as i128));
        let det = a1 * b2 - a2 * b1;
        let xn = xx * b2 - yy * a2;
        let yn = yy * a1 - xx * b1;
        (xn % det == 0 && yn % det == 0).then(|| ((xn / det) as i64, (yn / det) as i64))
    }

    /// Real embeddings `(σ1, σ2)` in floating point (real fields only).
    pub fn sigma(&self, x: f64, y: f64) -> (f64, f64) {
        let r = (self.delta0 as f64).sqrt();
        let xx = x * self.emb[0][0] as f64 + y * self.emb[1][0] as f64;
        let yy = x * self.emb[0][1] as f64 + y * self.emb[1][1] as f64;
        let l = self.l as f64;
        ((xx + yy * r) / l, (xx - yy * r) / l)
    }

    /// All integer `(x, y)` with `Q(x, y) = m` and `|y| ≤ y_max`.
    fn solutions_in(&self, m: i64, y_max: i64) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let (a, b, c) = (self.a as i128, self.b as i128, self.c as i128);
        for y in -y_max..=y_max {
            let yy = y as i128;
            let d = b * b * yy * yy - 4 * a * (c * yy * yy - m as i128);
            if d < 0 {
                continue;
            }
            let s = isqrt_u128(d as u128) as i128;
            if s * s != d {
                continue;
            }
            for num in [-b * yy + s, -b * yy - s] {
                if num % (2 * a) == 0 {
                    out.push(((num / (2 * a)) as i64, y));
                }
                if s == 0 {
                    break;
                }
            }
        }
        out
    }
}

/// Fundamental domain for the action of positive-norm units on a quadratic order.
#[derive(Clone, Debug)]
pub struct FundamentalDomainQuad {
    pub kind: QuadKind,
    /// Number of units (imaginary case; all have norm +1).
    pub unit_count_pos: u32,
    /// Fundamental unit `> 1` in basis coordinates (real case).
    pub fund_unit: Option<(i64, i64)>,
    pub fund_unit_norm: i32,
    /// Generator `ε₊ > 1` of the norm-one units modulo ±1, basis coordinates.
    pub pos_norm_generator: Option<(i64, i64)>,
    /// `2 log ε₊` (real case), zero otherwise.
    pub log_window: f64,
    pub data: QuadData,
    /// `ε₊ ∝ E + F √Δ₀` with a positive scale, used for exact window tests.
    eps_surd: (BigInt, BigInt),
    eps_small: Option<(i128, i128)>,
    eps_f64: f64,
    pub field_id: String,
    pub m_bound: u128,
}

impl FundamentalDomainQuad {
    pub fn new(field: &NumberField) -> Result<Self> {
        let data = QuadData::new(field)?;
        let field_id = field.spec.field_id();
        if data.delta0 < 0 {
            let w = data.solutions_in(1, ((4 * data.a) as f64 / (-data.disc) as f64).sqrt() as i64 + 1).len() as u32;
            if ![2, 4, 6].contains(&w) {
                return Err(Error::InvalidField(format!("unexpected unit count {w}")));
            }
            return Ok(Self {
                kind: QuadKind::Imaginary,
                unit_count_pos: w,
                fund_unit: None,
                fund_unit_norm: 1,
                pos_norm_generator: None,
                log_window: 0.0,
                data,
                eps_surd: (BigInt::zero(), BigInt::zero()),
                eps_small: None,
                eps_f64: 1.0,
                field_id,
                m_bound: DEFAULT_M_BOUND,
            });
        }
        let (d, k) = squarefree_decomposition(data.delta0 as u64);
        if d == 1 {
            return Err(Error::InvalidField("defining polynomial has rational roots".into()));
        }
        let (ua, ub) = fundamental_unit(d)?;
        // Fundamental unit of the maximal order: ε₀ or a cube root of it.
        let (mut p, mut q) = (BigRational::from_integer(ua.clone()), BigRational::from_integer(ub.clone()));
        if d % 4 == 1 {
            if let Some((t, u)) = cube_root_unit(&ua, &ub, d) {
                p = BigRational::new(t, BigInt::from(2));
                q = BigRational::new(u, BigInt::from(2));
            }
        }
        let norm_of = |p: &BigRational, q: &BigRational| p * p - q * q * BigRational::from_integer(BigInt::from(d));
        let n_eps = norm_of(&p, &q);
        let to_coords = |p: &BigRational, q: &BigRational| -> Result<(i64, i64)> {
            // √d = √Δ₀ / k = (2θ + c1)/k
            let c1 = BigRational::from_integer(field.spec.min_poly[1].clone());
            let kk = BigRational::from_integer(BigInt::from(k));
            let c0 = p + q * &c1 / &kk;
            let c1p = q * BigRational::from_integer(BigInt::from(2)) / &kk;
            let v = field
                .from_power_basis(&[c0, c1p])
                .ok_or_else(|| Error::InvalidField("unit is not integral in the given basis".into()))?;
            let f = |b: &BigInt| b.to_i64().ok_or_else(|| Error::UnsupportedField("fundamental unit too large".into()));
            Ok((f(&v[0])?, f(&v[1])?))
        };
        let fund = to_coords(&p, &q)?;
        let (pp, qp) = if n_eps.is_one() {
            (p.clone(), q.clone())
        } else {
            let dd = BigRational::from_integer(BigInt::from(d));
            (&p * &p + &q * &q * dd, BigRational::from_integer(BigInt::from(2)) * &p * &q)
        };
        let gen = to_coords(&pp, &qp)?;
        // ε₊ = pp + (qp/k) √Δ₀; clear denominators.
        let e_r = pp.clone();
        let f_r = qp.clone() / BigRational::from_integer(BigInt::from(k));
        let den = e_r.denom().lcm(f_r.denom());
        let e = (e_r * BigRational::from_integer(den.clone())).to_integer();
        let f = (f_r * BigRational::from_integer(den)).to_integer();
        let eps_f64 = pp.to_f64().unwrap_or(f64::NAN) + qp.to_f64().unwrap_or(f64::NAN) * (d as f64).sqrt();
        let eps_small = match (e.to_i128(), f.to_i128()) {
            (Some(a), Some(b)) if a.abs() < 1 << 40 && b.abs() < 1 << 40 => Some((a, b)),
            _ => None,
        };
        Ok(Self {
            kind: QuadKind::Real,
            unit_count_pos: 2,
            fund_unit: Some(fund),
            fund_unit_norm: if n_eps.is_one() { 1 } else { -1 },
            pos_norm_generator: Some(gen),
            log_window: 2.0 * eps_f64.ln(),
            data,
            eps_surd: (e, f),
            eps_small,
            eps_f64,
            field_id,
            m_bound: DEFAULT_M_BOUND,
        })
    }

    pub fn from_spec(spec: FieldSpec) -> Result<Self> {
        Self::new(&NumberField::new(spec)?)
    }

    pub fn with_bound(mut self, bound: u128) -> Self {
        self.m_bound = bound;
        self
    }

    /// `ε₊` as a real number (1 for imaginary fields).
    pub fn eps_plus(&self) -> f64 {
        self.eps_f64
    }

    /// Exact membership of a nonzero lattice point in the real-case window
    /// `σ1 > 0`, `|σ1/σ2| ∈ [1, ε₊²)`.
    pub fn in_window(&self, x: i64, y: i64) -> bool {
        let (xx, yy) = self.data.embed(x, y);
        self.in_window_xy(xx, yy)
    }

    fn in_window_xy(&self, xx: i128, yy: i128) -> bool {
        if xx == 0 && yy == 0 {
            return false;
        }
        // |σ1| ≥ |σ2| ⇔ XY ≥ 0; together with σ1 > 0 this forces X > 0.
        if xx < 0 || yy < 0 {
            return false;
        }
        let delta = self.data.delta0 as i128;
        if let Some((e, f)) = self.eps_small {
            if xx < 1 << 40 && yy < 1 << 40 {
                // γ = α·ε̄₊ = (XE − YFΔ) + (YE − XF)√Δ; need |σ1(γ)| < |σ2(γ)|.
                let g1 = xx * e - yy * f * delta;
                let g2 = yy * e - xx * f;
                return g1.signum() * g2.signum() < 0;
            }
        }
        let (e, f) = &self.eps_surd;
        let (xb, yb) = (BigInt::from(xx), BigInt::from(yy));
        let g1 = &xb * e - &yb * f * BigInt::from(delta);
        let g2 = &yb * e - &xb * f;
        g1.signum() * g2.signum() < BigInt::zero()
    }

    /// Nonnegative `(X, Y)` bounds of the window region with `|N| ≤ m_abs`.
    fn real_y_bound(&self, m_abs: u128) -> i64 {
        let q = &self.data;
        let s = (m_abs as f64).sqrt();
        let l = q.l as f64;
        let xmax = l * (self.eps_f64 + 1.0) * s / 2.0;
        let ymax = xmax / (q.delta0 as f64).sqrt();
        let det = (q.emb[0][0] as f64 * q.emb[1][1] as f64 - q.emb[1][0] as f64 * q.emb[0][1] as f64).abs();
        ((q.emb[0][0].abs() as f64 * ymax + q.emb[0][1].abs() as f64 * xmax) / det).ceil() as i64 + 1
    }

    fn real_x_bound(&self, m_abs: u128) -> i64 {
        let q = &self.data;
        let s = (m_abs as f64).sqrt();
        let l = q.l as f64;
        let xmax = l * (self.eps_f64 + 1.0) * s / 2.0;
        let ymax = xmax / (q.delta0 as f64).sqrt();
        let det = (q.emb[0][0] as f64 * q.emb[1][1] as f64 - q.emb[1][0] as f64 * q.emb[0][1] as f64).abs();
        ((q.emb[1][1].abs() as f64 * xmax + q.emb[1][0].abs() as f64 * ymax) / det).ceil() as i64 + 1
    }

    fn imag_y_bound(&self, m_abs: u128) -> i64 {
        let q = &self.data;
        ((4.0 * q.a as f64 * m_abs as f64) / (-q.disc) as f64).sqrt() as i64 + 1
    }

    /// All representatives of norm `m` inside the fundamental domain
    /// (imaginary case: the sector `arg σ1 ∈ [0, 2π/w)`).
    pub fn representatives(&self, m: i64) -> Vec<(i64, i64)> {
        if m == 0 {
            return Vec::new();
        }
        match self.kind {
            QuadKind::Imaginary => {
                if m < 0 {
                    return Vec::new();
                }
                let sols = self.data.solutions_in(m, self.imag_y_bound(m as u128));
                let w = self.unit_count_pos as f64;
                sols.into_iter()
                    .filter(|&(x, y)| {
                        let (xx, yy) = self.data.embed(x, y);
                        let ang = (yy as f64 * (-self.data.delta0 as f64).sqrt()).atan2(xx as f64);
                        let ang = if ang < 0.0 { ang + 2.0 * std::f64::consts::PI } else { ang };
                        ang * w < 2.0 * std::f64::consts::PI * (1.0 - 1e-12)
                    })
                    .collect()
            }
            QuadKind::Real => {
                let yb = self.real_y_bound(m.unsigned_abs() as u128);
                self.data.solutions_in(m, yb).into_iter().filter(|&(x, y)| self.in_window(x, y)).collect()
            }
        }
    }

    /// A single representative of norm `m`, if any.
    pub fn find_representation(&self, m: i64) -> Option<(i64, i64)> {
        match self.kind {
            QuadKind::Imaginary if m > 0 => self.data.solutions_in(m, self.imag_y_bound(m as u128)).into_iter().next(),
            QuadKind::Imaginary => None,
            QuadKind::Real => self.representatives(m).into_iter().next(),
        }
    }

    /// Floating-point membership in `𝔇⁺` for Monte Carlo volume estimates.
    pub fn in_domain_f64(&self, x: f64, y: f64) -> bool {
        let q = &self.data;
        match self.kind {
            QuadKind::Imaginary => {
                let xx = x * q.emb[0][0] as f64 + y * q.emb[1][0] as f64;
                let yy = (x * q.emb[0][1] as f64 + y * q.emb[1][1] as f64) * (-q.delta0 as f64).sqrt();
                let ang = yy.atan2(xx);
                let ang = if ang < 0.0 { ang + 2.0 * std::f64::consts::PI } else { ang };
                ang < 2.0 * std::f64::consts::PI / self.unit_count_pos as f64
            }
            QuadKind::Real => {
                let (s1, s2) = q.sigma(x, y);
                if s1 <= 0.0 || s2 == 0.0 {
                    return false;
                }
                let r = s1 / s2.abs();
                r >= 1.0 && r < self.eps_f64 * self.eps_f64
            }
        }
    }

    /// Axis-aligned box containing `{x ∈ 𝔇⁺ : |N(x)| ≤ 1}` in basis coordinates.
    pub fn bounding_box(&self) -> Result<[(f64, f64); 2]> {
        match self.kind {
            QuadKind::Imaginary => {
                let q = &self.data;
                let dd = (-q.disc) as f64;
                let xb = (4.0 * q.c as f64 / dd).sqrt();
                let yb = (4.0 * q.a as f64 / dd).sqrt();
                Ok([(-xb, xb), (-yb, yb)])
            }
            QuadKind::Real => {
                if !(self.log_window.is_finite() && self.log_window > 0.0) {
                    return Err(Error::UnboundedDomain(format!("log window {}", self.log_window)));
                }
                let xb = self.real_x_bound(1) as f64;
                let yb = self.real_y_bound(1) as f64;
                Ok([(-xb, xb), (-yb, yb)])
            }
        }
    }

    /// Closed-form `κ^ε` (area of `{x ∈ 𝔇⁺ : 0 < εN(x) ≤ 1}`), used as an oracle.
    pub fn kappa_exact(&self, positive: bool) -> f64 {
        let dd = (self.data.disc as f64).abs().sqrt();
        match self.kind {
            QuadKind::Imaginary if positive => 2.0 * std::f64::consts::PI / (self.unit_count_pos as f64 * dd),
            QuadKind::Imaginary => 0.0,
            QuadKind::Real => self.eps_f64.ln() / dd,
        }
    }
}

/// Squarefree part `d` and cofactor `k` with `n = d k²`.
pub fn squarefree_decomposition(n: u64) -> (u64, u64) {
    let mut d = 1;
    let mut k = 1;
    for (p, e) in factorize(n) {
        k *= p.pow(e / 2);
        if e % 2 == 1 {
            d *= p;
        }
    }
    (d, k)
}

/// Fundamental unit `a + b√d > 1` of `Z[√d]`, from the continued fraction of `√d`.
pub fn fundamental_unit(d: u64) -> Result<(BigInt, BigInt)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("d = {d} must exceed 1")));
    }
    if isqrt_u128(d as u128).pow(2) == d as u128 {
        return Err(Error::InvalidArgument(format!("d = {d} is a perfect square")));
    }
    if factorize(d).iter().any(|&(_, e)| e > 1) {
        return Err(Error::InvalidArgument(format!("d = {d} is not square-free")));
    }
    let a0 = BigInt::from(isqrt_u128(d as u128) as u64);
    let dd = BigInt::from(d);
    let (mut m, mut den, mut a) = (BigInt::zero(), BigInt::one(), a0.clone());
    let (mut p_prev, mut p) = (BigInt::one(), a0.clone());
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    loop {
        let n = &p * &p - &dd * &q * &q;
        if n.abs().is_one() {
            return Ok((p, q));
        }
        m = &den * &a - &m;
        den = (&dd - &m * &m) / &den;
        a = (&a0 + &m) / &den;
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
    }
}

/// For `d ≡ 1 mod 4`, a unit `η = (t + u√d)/2` with `η³ = a + b√d`, if one exists.
fn cube_root_unit(a: &BigInt, b: &BigInt, d: u64) -> Option<(BigInt, BigInt)> {
    let dd = BigInt::from(d);
    let n = a * a - &dd * b * b;
    let tr: BigInt = a * 2;
    // Tr(η)³ − 3N(η)Tr(η) = Tr(η³) with N(η) = N(ε₀).
    let guess = tr.cbrt();
    for delta in -2i32..=2 {
        let t = &guess + delta;
        if t <= BigInt::zero() {
            continue;
        }
        if &t * &t * &t - BigInt::from(3) * &n * &t != tr {
            continue;
        }
        let u2 = &t * &t - BigInt::from(4) * &n;
        if u2.is_negative() || !(&u2 % &dd).is_zero() {
            continue;
        }
        let u2 = u2 / &dd;
        let u = u2.sqrt();
        if &u * &u == u2 && t.is_odd() && u.is_odd() {
            return Some((t, u));
        }
    }
    None
}

/// `R(m)`: lattice points of norm `m` in the fundamental domain.
pub fn count_r(m: i64, dom: &FundamentalDomainQuad) -> Result<u64> {
    if m == 0 {
        return Ok(0);
    }
    let ma = m.unsigned_abs() as u128;
    if ma > dom.m_bound {
        return Err(Error::BoundExceeded { m: ma, bound: dom.m_bound });
    }
    Ok(match dom.kind {
        QuadKind::Imaginary => {
            if m < 0 {
                return Ok(0);
            }
            let n = dom.data.solutions_in(m, dom.imag_y_bound(ma)).len() as u64;
            debug_assert_eq!(n % dom.unit_count_pos as u64, 0);
            n / dom.unit_count_pos as u64
        }
        QuadKind::Real => dom.representatives(m).len() as u64,
    })
}

/// 1 iff every prime outside `s` divides `m` at most once.
pub fn squarefree_outside_s(m: i64, s: &[u64]) -> Result<bool> {
    if m == 0 {
        return Err(Error::InvalidArgument("m = 0".into()));
    }
    Ok(factorize(m.unsigned_abs()).iter().all(|&(p, e)| e <= 1 || s.contains(&p)))
}

pub fn count_r_star(m: i64, s: &[u64], dom: &FundamentalDomainQuad) -> Result<u64> {
    if m == 0 {
        return Ok(0);
    }
    if !squarefree_outside_s(m, s)? {
        return Ok(0);
    }
    count_r(m, dom)
}

/// Discriminants of the imaginary quadratic fields of class number one.
pub const CLASS_NUMBER_ONE: [i64; 9] = [-3, -4, -7, -8, -11, -19, -43, -67, -163];

/// Kronecker symbol `(D/p)` for a fundamental discriminant `D` and prime `p`.
pub fn kronecker(d: i64, p: u64) -> i32 {
    if d.rem_euclid(p as i64) == 0 {
        return 0;
    }
    if p == 2 {
        return if d.rem_euclid(8) == 1 { 1 } else { -1 };
    }
    let r = crate::arith::pow_mod(d.rem_euclid(p as i64) as u64, (p - 1) / 2, p);
    if r == 1 {
        1
    } else {
        -1
    }
}

/// Number of integral ideals of norm `m`, from the splitting of each prime.
pub fn ideal_count_oracle(m: u64, field: &NumberField) -> Result<u64> {
    let d = field.spec.discriminant.to_i64().unwrap_or(0);
    if field.degree() != 2 || !CLASS_NUMBER_ONE.contains(&d) {
        return Err(Error::UnsupportedField(format!("discriminant {d} is not a configured class-number-one field")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m = 0".into()));
    }
    let mut count = 1u64;
    for (p, e) in factorize(m) {
        count *= match kronecker(d, p) {
            1 => e as u64 + 1,
            0 => 1,
            _ => u64::from(e % 2 == 0),
        };
    }
    Ok(count)
}

/// `R(m)` for every `m` in `[−M, M]`, by enumerating the domain once.
#[derive(Clone, Debug)]
pub struct RepTable {
    pub m_max: u64,
    pos: Vec<u32>,
    neg: Vec<u32>,
}

impl RepTable {
    pub fn build(dom: &FundamentalDomainQuad, m_max: u64) -> Self {
        let n = m_max as usize + 1;
        let mut pos = vec![0u32; n];
        let mut neg = vec![0u32; n];
        let q = &dom.data;
        match dom.kind {
            QuadKind::Imaginary => {
                let yb = dom.imag_y_bound(m_max as u128);
                let (a, b, c) = (q.a as i128, q.b as i128, q.c as i128);
                let dd = (-q.disc) as i128;
                for y in -yb..=yb {
                    let yy = y as i128;
                    let disc = 4 * a * m_max as i128 - dd * yy * yy;
                    if disc < 0 {
                        continue;
                    }
                    let s = isqrt_u128(disc as u128) as i128;
                    let lo = (-b * yy - s).div_euclid(2 * a) - 1;
                    let hi = (-b * yy + s).div_euclid(2 * a) + 1;
                    for x in lo..=hi {
                        let v = a * x * x + b * x * yy + c * yy * yy;
                        if v > 0 && v <= m_max as i128 {
                            pos[v as usize] += 1;
                        }
                    }
                }
                let w = dom.unit_count_pos;
                for v in pos.iter_mut() {
                    debug_assert_eq!(*v % w, 0);
                    *v /= w;
                }
            }
            QuadKind::Real => {
                let yb = dom.real_y_bound(m_max as u128);
                let xb = dom.real_x_bound(m_max as u128);
                for y in -yb..=yb {
                    for x in -xb..=xb {
                        let v = q.eval(x, y);
                        if v == 0 || v.unsigned_abs() > m_max as u128 || !dom.in_window(x, y) {
                            continue;
                        }
                        if v > 0 {
                            pos[v as usize] += 1;
                        } else {
                            neg[(-v) as usize] += 1;
                        }
                    }
                }
            }
        }
        pos[0] = 0;
        neg[0] = 0;
        Self { m_max, pos, neg }
    }

    pub fn get(&self, m: i64) -> u64 {
        let i = m.unsigned_abs() as usize;
        assert!(i as u64 <= self.m_max, "m = {m} outside table");
        if m >= 0 {
            self.pos[i] as u64
        } else {
            self.neg[i] as u64
        }
    }
}

/// `sf[k]` for `1 ≤ k ≤ M`: whether `k` is square-free away from `s`.
pub fn squarefree_outside_table(m_max: u64, s: &[u64]) -> Vec<bool> {
    let n = m_max as usize;
    let mut sf = vec![true; n + 1];
    sf[0] = false;
    for p in crate::arith::primes_up_to(isqrt_u128(m_max as u128) as u64) {
        if s.contains(&p) {
            continue;
        }
        let sq = (p * p) as usize;
        let mut j = sq;
        while j <= n {
            sf[j] = false;
            j += sq;
        }
    }
    sf
}

/// `R*_S` over `[−M, M]`.
#[derive(Clone, Debug)]
pub struct RepStarTable {
    pub r: RepTable,
    pub s: Vec<u64>,
    sf: Vec<bool>,
}

impl RepStarTable {
    pub fn build(dom: &FundamentalDomainQuad, m_max: u64, s: &[u64]) -> Self {
        Self { r: RepTable::build(dom, m_max), s: s.to_vec(), sf: squarefree_outside_table(m_max, s) }
    }

    pub fn from_table(r: RepTable, s: &[u64]) -> Self {
        let sf = squarefree_outside_table(r.m_max, s);
        Self { r, s: s.to_vec(), sf }
    }

    #[inline]
    pub fn get(&self, m: i64) -> u64 {
        if self.sf[m.unsigned_abs() as usize] {
            self.r.get(m)
        } else {
            0
        }
    }

    pub fn m_max(&self) -> u64 {
        self.r.m_max
    }
}

/// Persistent memo of `R(m)` keyed by field id, stored as `field_id m R` lines.
pub struct RepCache {
    path: Option<PathBuf>,
    field_id: String,
    r: RwLock<Option<HashMap<i64, u64>>>,
    r_star: RwLock<HashMap<(i64, Vec<u64>), u64>>,
    pending: RwLock<Vec<(i64, u64)>>,
}

impl RepCache {
    pub fn in_memory(field_id: &str) -> Self {
        Self {
            path: None,
            field_id: field_id.to_string(),
            r: RwLock::new(Some(HashMap::new())),
            r_star: RwLock::new(HashMap::new()),
            pending: RwLock::new(Vec::new()),
        }
    }

    pub fn open(path: &Path, field_id: &str) -> Self {
        Self {
            path: Some(path.to_path_buf()),
            field_id: field_id.to_string(),
            r: RwLock::new(None),
            r_star: RwLock::new(HashMap::new()),
            pending: RwLock::new(Vec::new()),
        }
    }

    fn ensure_loaded(&self) -> Result<()> {
        if self.r.read().unwrap().is_some() {
            return Ok(());
        }
        let mut guard = self.r.write().unwrap();
        if guard.is_some() {
            return Ok(());
        }
        let mut map = HashMap::new();
        if let Some(path) = &self.path {
            if path.exists() {
                let f = std::io::BufReader::new(std::fs::File::open(path)?);
                for (i, line) in f.lines().enumerate() {
                    let line = line?;
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    if parts.is_empty() {
                        continue;
                    }
                    if parts.len() != 3 {
                        return Err(Error::Parse(format!("cache line {}: expected 3 fields", i + 1)));
                    }
                    if parts[0] != self.field_id {
                        continue;
                    }
                    let m: i64 = parts[1].parse().map_err(|_| Error::Parse(format!("cache line {}: bad m", i + 1)))?;
                    let r: u64 = parts[2].parse().map_err(|_| Error::Parse(format!("cache line {}: bad R", i + 1)))?;
                    map.insert(m, r);
                }
            }
        }
        *guard = Some(map);
        Ok(())
    }

    pub fn get_r(&self, m: i64, dom: &FundamentalDomainQuad) -> Result<u64> {
        self.ensure_loaded()?;
        if let Some(&v) = self.r.read().unwrap().as_ref().unwrap().get(&m) {
            return Ok(v);
        }
        let v = count_r(m, dom)?;
        self.r.write().unwrap().as_mut().unwrap().insert(m, v);
        self.pending.write().unwrap().push((m, v));
        Ok(v)
    }

    pub fn get_r_star(&self, m: i64, s: &[u64], dom: &FundamentalDomainQuad) -> Result<u64> {
        let mut key_s = s.to_vec();
        key_s.sort_unstable();
        if let Some(&v) = self.r_star.read().unwrap().get(&(m, key_s.clone())) {
            return Ok(v);
        }
        let v = if m != 0 && squarefree_outside_s(m, s)? { self.get_r(m, dom)? } else { 0 };
        self.r_star.write().unwrap().insert((m, key_s), v);
        Ok(v)
    }

    /// Append newly computed values to the backing file.
    pub fn flush(&self) -> Result<usize> {
        let mut pending = self.pending.write().unwrap();
        let Some(path) = &self.path else {
            pending.clear();
            return Ok(0);
        };
        if pending.is_empty() {
            return Ok(0);
        }
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        for (m, r) in pending.iter() {
            writeln!(f, "{} {} {}", self.field_id, m, r)?;
        }
        let n = pending.len();
        pending.clear();
        Ok(n)
    }

    /// Recompute up to `k` cached entries and return the ones that disagree.
    pub fn spot_check(&self, dom: &FundamentalDomainQuad, k: usize) -> Result<Vec<(i64, u64, u64)>> {
        self.ensure_loaded()?;
        let entries: Vec<(i64, u64)> = {
            let g = self.r.read().unwrap();
            let mut v: Vec<_> = g.as_ref().unwrap().iter().map(|(&m, &r)| (m, r)).collect();
            v.sort_unstable();
            v.into_iter().take(k).collect()
        };
        let mut bad = Vec::new();
        for (m, r) in entries {
            let fresh = count_r(m, dom)?;
            if fresh != r {
                bad.push((m, r, fresh));
            }
        }
        Ok(bad)
    }

    pub fn len(&self) -> usize {
        self.r.read().unwrap().as_ref().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numberfield::presets;

    fn dom(spec: FieldSpec) -> FundamentalDomainQuad {
        FundamentalDomainQuad::from_spec(spec).unwrap()
    }

    #[test]
    fn units_of_small_fields() {
        assert_eq!(fundamental_unit(2).unwrap(), (BigInt::from(1), BigInt::from(1)));
        assert_eq!(fundamental_unit(3).unwrap(), (BigInt::from(2), BigInt::from(1)));
        assert_eq!(fundamental_unit(7).unwrap(), (BigInt::from(8), BigInt::from(3)));
        assert!(fundamental_unit(4).is_err());
        assert!(fundamental_unit(12).is_err());
        assert!(fundamental_unit(1).is_err());
    }

    #[test]
    fn unit_brute_force() {
        for d in [2u64, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 22, 23] {
            let (a, b) = fundamental_unit(d).unwrap();
            let mut best = None;
            'outer: for bb in 1i64..200 {
                for aa in 1i64..3000 {
                    let n = aa * aa - d as i64 * bb * bb;
                    if n == 1 || n == -1 {
                        best = Some((aa, bb));
                        break 'outer;
                    }
                }
            }
            let (aa, bb) = best.unwrap();
            assert_eq!((a, b), (BigInt::from(aa), BigInt::from(bb)), "d = {d}");
        }
    }

    #[test]
    fn domain_data() {
        let g = dom(presets::gaussian());
        assert_eq!(g.kind, QuadKind::Imaginary);
        assert_eq!(g.unit_count_pos, 4);
        assert_eq!(dom(presets::eisenstein()).unit_count_pos, 6);
        assert_eq!(dom(presets::sqrt_minus_two()).unit_count_pos, 2);

        let s = dom(presets::sqrt_two());
        assert_eq!(s.fund_unit, Some((1, 1)));
        assert_eq!(s.fund_unit_norm, -1);
        assert_eq!(s.pos_norm_generator, Some((3, 2)));
        assert!((s.log_window - 2.0 * (3.0 + 2.0 * 2f64.sqrt()).ln()).abs() < 1e-12);

        let gold = dom(presets::golden());
        assert_eq!(gold.fund_unit, Some((0, 1)));
        assert_eq!(gold.fund_unit_norm, -1);
        assert_eq!(gold.pos_norm_generator, Some((1, 1)));

        let t = dom(presets::sqrt_three());
        assert_eq!(t.fund_unit, Some((2, 1)));
        assert_eq!(t.fund_unit_norm, 1);
    }

    #[test]
    fn gaussian_counts() {
        let g = dom(presets::gaussian());
        assert_eq!(count_r(5, &g).unwrap(), 2);
        assert_eq!(count_r(0, &g).unwrap(), 0);
        assert_eq!(count_r(12, &g).unwrap(), 0);
        assert_eq!(count_r(25, &g).unwrap(), 3);
        assert_eq!(count_r(-5, &g).unwrap(), 0);
        assert!(matches!(count_r(1 << 40, &g), Err(Error::BoundExceeded { .. })));
    }

    #[test]
    fn degree_three_unsupported() {
        let k = NumberField::new(presets::cube_root_two()).unwrap();
        assert!(matches!(FundamentalDomainQuad::new(&k), Err(Error::UnsupportedDegree(3))));
    }

    #[test]
    fn squarefree_examples() {
        assert!(squarefree_outside_s(12, &[2]).unwrap());
        assert!(!squarefree_outside_s(12, &[]).unwrap());
        assert!(squarefree_outside_s(-18, &[3]).unwrap());
        assert!(squarefree_outside_s(0, &[]).is_err());
    }

    #[test]
    fn r_star_examples() {
        let g = dom(presets::gaussian());
        assert_eq!(count_r_star(8, &[2], &g).unwrap(), 1);
        assert_eq!(count_r_star(8, &[], &g).unwrap(), 0);
        assert_eq!(count_r_star(5, &[], &g).unwrap(), 2);
    }

    #[test]
    fn ideal_oracle_examples() {
        let k = NumberField::new(presets::gaussian()).unwrap();
        assert_eq!(ideal_count_oracle(25, &k).unwrap(), 3);
        assert_eq!(ideal_count_oracle(1, &k).unwrap(), 1);
        assert_eq!(ideal_count_oracle(3, &k).unwrap(), 0);
        let r = NumberField::new(presets::sqrt_two()).unwrap();
        assert!(matches!(ideal_count_oracle(7, &r), Err(Error::UnsupportedField(_))));
    }

    #[test]
    fn oracle_on_other_class_number_one_fields() {
        for spec in [presets::sqrt_minus_two(), presets::eisenstein(), presets::sqrt_minus_seven(), presets::sqrt_minus_eleven()] {
            let k = NumberField::new(spec).unwrap();
            let d = FundamentalDomainQuad::new(&k).unwrap();
            for m in 1..=2000i64 {
                assert_eq!(count_r(m, &d).unwrap(), ideal_count_oracle(m as u64, &k).unwrap(), "m = {m}");
            }
        }
    }

    #[test]
    fn table_matches_pointwise() {
        for spec in [presets::gaussian(), presets::eisenstein(), presets::sqrt_two(), presets::golden(), presets::sqrt_three()] {
            let d = dom(spec);
            let t = RepTable::build(&d, 500);
            for m in -500i64..=500 {
                assert_eq!(t.get(m), count_r(m, &d).unwrap(), "m = {m}");
            }
        }
    }

    #[test]
    fn real_quadratic_norm_minus_one_orbits() {
        // Q(√2) has class number one and a unit of norm −1, so R(m) = R(−m).
        let d = dom(presets::sqrt_two());
        for m in 1..200 {
            assert_eq!(count_r(m, &d).unwrap(), count_r(-m, &d).unwrap());
        }
        assert_eq!(count_r(1, &d).unwrap(), 1);
        assert_eq!(count_r(7, &d).unwrap(), 2);
        assert_eq!(count_r(3, &d).unwrap(), 0);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.cache");
        let d = dom(presets::gaussian());
        let c = RepCache::open(&path, &d.field_id);
        for m in 1..50 {
            c.get_r(m, &d).unwrap();
        }
        assert_eq!(c.flush().unwrap(), 49);
        let c2 = RepCache::open(&path, &d.field_id);
        assert_eq!(c2.get_r(25, &d).unwrap(), 3);
        assert_eq!(c2.len(), 49);
        assert!(c2.spot_check(&d, 49).unwrap().is_empty());
        assert_eq!(c2.get_r_star(8, &[2], &d).unwrap(), 1);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().any(|l| l == format!("{} 25 3", d.field_id)));
    }
}
