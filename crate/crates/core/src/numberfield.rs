//! Number fields given by a defining polynomial and an explicit integral
//! basis, their regular representation and their norm forms.
//!
//! Everything in this module is exact (big integers and big rationals).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::error::{Error, Result};
use crate::fp_poly::factor_degrees;
use crate::poly::Poly;

pub type Matrix = Vec<Vec<BigRational>>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub(crate) mod linalg {
    use super::*;

    pub fn identity(n: usize) -> Matrix {
        (0..n).map(|i| (0..n).map(|j| if i == j { rat(1) } else { rat(0) }).collect()).collect()
    }

    pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
        let n = a.len();
        let k = b.len();
        let m = b[0].len();
        (0..n)
            .map(|i| (0..m).map(|j| (0..k).fold(rat(0), |acc, t| acc + &a[i][t] * &b[t][j])).collect())
            .collect()
    }

    pub fn add_scaled(acc: &mut Matrix, a: &Matrix, c: &BigRational) {
        for (ra, rb) in acc.iter_mut().zip(a) {
            for (x, y) in ra.iter_mut().zip(rb) {
                *x += y * c;
            }
        }
    }

    pub fn transpose(a: &Matrix) -> Matrix {
        let n = a.len();
        let m = a[0].len();
        (0..m).map(|j| (0..n).map(|i| a[i][j].clone()).collect()).collect()
    }

    pub fn mat_vec(a: &Matrix, v: &[BigRational]) -> Vec<BigRational> {
        a.iter().map(|row| row.iter().zip(v).fold(rat(0), |acc, (x, y)| acc + x * y)).collect()
    }

    pub fn trace(a: &Matrix) -> BigRational {
        (0..a.len()).fold(rat(0), |acc, i| acc + &a[i][i])
    }

    pub fn det(a: &Matrix) -> BigRational {
        let n = a.len();
        let mut m = a.clone();
        let mut d = rat(1);
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
                return rat(0);
            };
            if piv != col {
                m.swap(piv, col);
                d = -d;
            }
            let pv = m[col][col].clone();
            d *= &pv;
            for r in col + 1..n {
                if m[r][col].is_zero() {
                    continue;
                }
                let f = &m[r][col] / &pv;
                for c in col..n {
                    let t = &m[col][c] * &f;
                    m[r][c] -= t;
                }
            }
        }
        d
    }

    pub fn inverse(a: &Matrix) -> Option<Matrix> {
        let n = a.len();
        let mut m: Matrix = a.iter().zip(identity(n)).map(|(r, e)| r.iter().cloned().chain(e).collect()).collect();
        for col in 0..n {
            let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
            m.swap(piv, col);
            let pv = m[col][col].clone();
            for c in 0..2 * n {
                m[col][c] = &m[col][c] / &pv;
            }
            for r in 0..n {
                if r != col && !m[r][col].is_zero() {
                    let f = m[r][col].clone();
                    for c in 0..2 * n {
                        let t = &m[col][c] * &f;
                        m[r][c] -= t;
                    }
                }
            }
        }
        Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
    }
}

/// A number field `Q(θ)` together with a Z-basis `ω_1..ω_n` of its ring of
/// integers, each `ω_i` written in the power basis `1, θ, …, θ^{n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub degree: usize,
    /// Monic defining polynomial, constant term first.
    pub min_poly: Vec<BigInt>,
    /// Row `i` holds the power-basis coordinates of `ω_{i+1}`.
    pub basis: Vec<Vec<BigRational>>,
    pub discriminant: BigInt,
}

#[derive(Serialize, Deserialize)]
struct FieldSpecFile {
    degree: usize,
    min_poly: Vec<serde_json::Number>,
    basis: Vec<String>,
    discriminant: serde_json::Number,
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
    let den: BigInt = den.parse().map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(num, den))
}

/// Canonical `"p/q"` rendering with `q > 0` and `gcd(p, q) = 1`.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn parse_int(n: &serde_json::Number) -> Result<BigInt> {
    n.to_string().parse().map_err(|_| Error::Parse(format!("expected an integer, got {n}")))
}

fn int_number(b: &BigInt) -> Result<serde_json::Number> {
    let v: serde_json::Value = serde_json::from_str(&b.to_string())?;
    match v {
        serde_json::Value::Number(n) => Ok(n),
        _ => Err(Error::Parse("integer rendering".into())),
    }
}

impl FieldSpec {
    pub fn new(min_poly: &[i64], basis: &[&[(i64, i64)]], discriminant: i64) -> Self {
        Self {
            degree: min_poly.len() - 1,
            min_poly: min_poly.iter().map(|&c| BigInt::from(c)).collect(),
            basis: basis
                .iter()
                .map(|row| row.iter().map(|&(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q))).collect())
                .collect(),
            discriminant: BigInt::from(discriminant),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: FieldSpecFile = serde_json::from_str(text)?;
        let n = f.degree;
        if f.min_poly.len() != n + 1 {
            return Err(Error::Parse(format!("min_poly has {} coefficients, expected {}", f.min_poly.len(), n + 1)));
        }
        if f.basis.len() != n * n {
            return Err(Error::Parse(format!("basis has {} entries, expected {}", f.basis.len(), n * n)));
        }
        let min_poly = f.min_poly.iter().map(parse_int).collect::<Result<Vec<_>>>()?;
        let flat = f.basis.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
        let basis = flat.chunks(n).map(|r| r.to_vec()).collect();
        let spec = Self { degree: n, min_poly, basis, discriminant: parse_int(&f.discriminant)? };
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = FieldSpecFile {
            degree: self.degree,
            min_poly: self.min_poly.iter().map(int_number).collect::<Result<_>>()?,
            basis: self.basis.iter().flatten().map(format_rational).collect(),
            discriminant: int_number(&self.discriminant)?,
        };
        Ok(serde_json::to_string_pretty(&f)? + "\n")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Stable identifier derived from the canonical JSON rendering.
    pub fn field_id(&self) -> String {
        let text = self.to_json().expect("canonical rendering");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    fn min_poly_i128(&self) -> Option<Vec<i128>> {
        self.min_poly.iter().map(|c| c.to_i128()).collect()
    }

    /// Structural checks; the discriminant identity is verified by
    /// [`NumberField::new`], which needs the multiplication matrices.
    pub fn check_shape(&self) -> Result<()> {
        let n = self.degree;
        if n < 2 {
            return Err(Error::InvalidField(format!("degree {n} < 2")));
        }
        if self.min_poly.len() != n + 1 || !self.min_poly[n].is_one() {
            return Err(Error::InvalidField("min_poly must be monic of the stated degree".into()));
        }
        if self.basis.len() != n || self.basis.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidField("basis must be an n×n matrix".into()));
        }
        self.check_no_rational_root()?;
        self.spot_check_irreducible()?;
        if linalg::det(&self.basis).is_zero() {
            return Err(Error::InvalidField("basis matrix is singular".into()));
        }
        Ok(())
    }

    fn check_no_rational_root(&self) -> Result<()> {
        let c0 = &self.min_poly[0];
        if c0.is_zero() {
            return Err(Error::InvalidField("min_poly has the rational root 0".into()));
        }
        // A monic integer polynomial's rational roots are integer divisors of c0.
        let Some(c) = c0.abs().to_u64() else {
            return Ok(());
        };
        let mut divisors = vec![1u64];
        for (p, e) in factorize(c) {
            let mut next = Vec::new();
            for &d in &divisors {
                let mut pk = 1u64;
                for _ in 0..=e {
                    next.push(d * pk);
                    pk *= p;
                }
            }
            divisors = next;
        }
        for d in divisors {
            for r in [BigInt::from(d), -BigInt::from(d)] {
                let v = self.min_poly.iter().rev().fold(BigInt::zero(), |acc, a| acc * &r + a);
                if v.is_zero() {
                    return Err(Error::InvalidField(format!("min_poly has the rational root {r}")));
                }
            }
        }
        Ok(())
    }

    /// For degree 4 and above a polynomial with no rational root may still
    /// factor; rule that out by intersecting the possible factor degrees
    /// seen modulo small primes. Inconclusive outcomes are accepted.
    fn spot_check_irreducible(&self) -> Result<()> {
        let n = self.degree;
        if n <= 3 || n > 8 {
            return Ok(());
        }
        let Some(f) = self.min_poly_i128() else {
            return Ok(());
        };
        let mut possible: Vec<bool> = (0..=n).map(|d| d >= 1 && d < n).collect();
        for p in crate::arith::primes_up_to(400) {
            if let Some(degs) = factor_degrees(&f, p) {
                let mut sums = vec![false; n + 1];
                sums[0] = true;
                for &d in &degs {
                    for s in (d..=n).rev() {
                        if sums[s - d] {
                            sums[s] = true;
                        }
                    }
                }
                for d in 1..n {
                    possible[d] &= sums[d];
                }
                if !possible.iter().any(|&b| b) {
                    return Ok(());
                }
            }
        }
        if possible.iter().any(|&b| b) {
            // Degree patterns never excluded a factorisation; try Z-factors of
            // degree n/2 would be the next step. Accept as asserted by the user.
            return Ok(());
        }
        Ok(())
    }
}

/// Homogeneous degree-`n` integer form in `n` variables.
#[derive(Clone, PartialEq, Eq)]
pub struct NormForm {
    pub n_vars: usize,
    pub terms: BTreeMap<Vec<u32>, BigInt>,
}

impl fmt::Debug for NormForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormForm({self})")
    }
}

impl fmt::Display for NormForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let a = c.abs();
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
                .collect();
            if !a.is_one() || mono.is_empty() {
                write!(f, "{a}")?;
                if !mono.is_empty() {
                    write!(f, "*")?;
                }
            }
            write!(f, "{}", mono.join("*"))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl NormForm {
    pub fn from_terms(n_vars: usize, terms: &[(&[u32], i64)]) -> Self {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if *c != 0 {
                map.insert(e.to_vec(), BigInt::from(*c));
            }
        }
        Self { n_vars, terms: map }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[BigInt]) -> Result<BigInt> {
        if x.len() != self.n_vars {
            return Err(Error::LengthMismatch { expected: self.n_vars, got: x.len() });
        }
        let mut acc = BigInt::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                t *= xi.pow(k);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn evaluate_i64(&self, x: &[i64]) -> Result<BigInt> {
        let v: Vec<BigInt> = x.iter().map(|&a| BigInt::from(a)).collect();
        self.evaluate(&v)
    }

    pub fn as_poly(&self) -> Poly<BigInt> {
        Poly::from_terms(self.n_vars, self.terms.iter().map(|(e, c)| (e.clone(), c.clone())))
    }

    pub fn compile(&self) -> CompiledForm {
        CompiledForm {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.iter().map(|&k| k as u8).collect(), c.to_i128().expect("coefficient fits i128")))
                .collect(),
        }
    }

    /// Stable hash used to key disk caches.
    pub fn form_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// Machine-integer evaluator for hot loops (coefficients must fit i128).
#[derive(Clone, Debug)]
pub struct CompiledForm {
    pub n_vars: usize,
    pub terms: Vec<(Vec<u8>, i128)>,
}

impl CompiledForm {
    /// `N(x) mod m` for residues `x_i < m`, `m < 2^62`.
    #[inline]
    pub fn eval_mod(&self, x: &[u64], m: u64) -> u64 {
        let m128 = m as u128;
        let mut acc: u128 = 0;
        for (e, c) in &self.terms {
            let mut t = c.rem_euclid(m as i128) as u128;
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t = t * (*xi as u128) % m128;
                }
            }
            acc = (acc + t) % m128;
        }
        acc as u64
    }

    /// Exact value at an integer point, when it fits in i128.
    #[inline]
    pub fn eval_i128(&self, x: &[i64]) -> i128 {
        let mut acc: i128 = 0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= *xi as i128;
                }
            }
            acc += t;
        }
        acc
    }
}

/// Multiplication-by-`ω_i` matrices on the basis `ω_1..ω_n` (column `j` holds
/// the coordinates of `ω_i ω_j`).
pub fn multiplication_matrices(spec: &FieldSpec) -> Result<Vec<Matrix>> {
    let n = spec.degree;
    if spec.basis.len() != n || spec.min_poly.len() != n + 1 {
        return Err(Error::InvalidField("shape mismatch".into()));
    }
    // Companion matrix of θ acting on the power basis (column convention).
    let mut comp = vec![vec![rat(0); n]; n];
    for j in 0..n - 1 {
        comp[j + 1][j] = rat(1);
    }
    for i in 0..n {
        comp[i][n - 1] = -BigRational::from_integer(spec.min_poly[i].clone());
    }
    let mut powers = vec![linalg::identity(n)];
    for k in 1..n {
        let next = linalg::mul(&powers[k - 1], &comp);
        powers.push(next);
    }
    let bt = linalg::transpose(&spec.basis);
    let bt_inv = linalg::inverse(&bt).ok_or_else(|| Error::InvalidField("basis matrix is singular".into()))?;
    let mut out = Vec::with_capacity(n);
    for row in &spec.basis {
        let mut power_mult = vec![vec![rat(0); n]; n];
        for (k, c) in row.iter().enumerate() {
            if !c.is_zero() {
                linalg::add_scaled(&mut power_mult, &powers[k], c);
            }
        }
        out.push(linalg::mul(&linalg::mul(&bt_inv, &power_mult), &bt));
    }
    Ok(out)
}

fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    // Heap's algorithm with parity tracking.
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut even = true;
    out.push((a.clone(), even));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            even = !even;
            out.push((a.clone(), even));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Symbolic `det(Σ x_i M_{ω_i})`, with integrality of every coefficient asserted.
pub fn build_norm_form(spec: &FieldSpec) -> Result<NormForm> {
    let mats = multiplication_matrices(spec)?;
    norm_form_from_matrices(&mats)
}

pub(crate) fn norm_form_from_matrices(mats: &[Matrix]) -> Result<NormForm> {
    let n = mats.len();
    let entry = |r: usize, c: usize| -> Poly<BigRational> {
        let mut p = Poly::zero(n);
        for (i, m) in mats.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, m[r][c].clone());
        }
        p
    };
    let entries: Vec<Vec<Poly<BigRational>>> = (0..n).map(|r| (0..n).map(|c| entry(r, c)).collect()).collect();
    let mut det = Poly::zero(n);
    for (perm, even) in permutations(n) {
        let mut term = Poly::constant(n, rat(1));
        for (r, &c) in perm.iter().enumerate() {
            term = &term * &entries[r][c];
            if term.is_zero() {
                break;
            }
        }
        det = if even { &det + &term } else { &det - &term };
    }
    let mut terms = BTreeMap::new();
    for (e, c) in det.terms() {
        if !c.is_integer() {
            return Err(Error::InconsistentBasis(format!("norm form coefficient {c} is not integral")));
        }
        terms.insert(e.clone(), c.to_integer());
    }
    Ok(NormForm { n_vars: n, terms })
}

pub fn evaluate_norm(form: &NormForm, x: &[BigInt]) -> Result<BigInt> {
    form.evaluate(x)
}

/// A validated field with its regular representation and norm form.
#[derive(Clone, Debug)]
pub struct NumberField {
    pub spec: FieldSpec,
    pub mult: Vec<Matrix>,
    pub form: NormForm,
}

impl NumberField {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.check_shape()?;
        let mult = multiplication_matrices(&spec)?;
        // The element 1 must act as the identity.
        let one_coords = Self::coords_of_one(&spec)?;
        let mut one_mat = vec![vec![rat(0); spec.degree]; spec.degree];
        for (m, c) in mult.iter().zip(&one_coords) {
            linalg::add_scaled(&mut one_mat, m, c);
        }
        if one_mat != linalg::identity(spec.degree) {
            return Err(Error::InvalidField("element 1 does not act as the identity".into()));
        }
        for m in &mult {
            if m.iter().flatten().any(|c| !c.is_integer()) {
                return Err(Error::InconsistentBasis("basis is not closed under multiplication over Z".into()));
            }
        }
        let form = norm_form_from_matrices(&mult)?;
        let n = spec.degree;
        let gram: Matrix = (0..n).map(|i| (0..n).map(|j| linalg::trace(&linalg::mul(&mult[i], &mult[j]))).collect()).collect();
        let disc = linalg::det(&gram);
        if disc != BigRational::from_integer(spec.discriminant.clone()) {
            return Err(Error::InvalidField(format!(
                "discriminant mismatch: trace form gives {disc}, spec says {}",
                spec.discriminant
            )));
        }
        Ok(Self { spec, mult, form })
    }

    fn coords_of_one(spec: &FieldSpec) -> Result<Vec<BigRational>> {
        let n = spec.degree;
        let bt = linalg::transpose(&spec.basis);
        let inv = linalg::inverse(&bt).ok_or_else(|| Error::InvalidField("basis matrix is singular".into()))?;
        let mut e0 = vec![rat(0); n];
        e0[0] = rat(1);
        Ok(linalg::mat_vec(&inv, &e0))
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    /// Coordinates of 1 in the basis (integral for a genuine integral basis).
    pub fn one(&self) -> Vec<BigInt> {
        Self::coords_of_one(&self.spec).unwrap().into_iter().map(|c| c.to_integer()).collect()
    }

    /// Matrix of multiplication by the element with coordinates `a`.
    pub fn mult_matrix(&self, a: &[BigInt]) -> Matrix {
        let n = self.degree();
        let mut m = vec![vec![rat(0); n]; n];
        for (mi, ai) in self.mult.iter().zip(a) {
            linalg::add_scaled(&mut m, mi, &BigRational::from_integer(ai.clone()));
        }
        m
    }

    pub fn multiply(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let m = self.mult_matrix(a);
        let bv: Vec<BigRational> = b.iter().map(|x| BigRational::from_integer(x.clone())).collect();
        linalg::mat_vec(&m, &bv).into_iter().map(|c| c.to_integer()).collect()
    }

    /// Norm via the determinant of the multiplication matrix (independent of the form).
    pub fn norm_via_matrix(&self, a: &[BigInt]) -> BigInt {
        linalg::det(&self.mult_matrix(a)).to_integer()
    }

    /// Power-basis coordinates of the element with basis coordinates `a`.
    pub fn to_power_basis(&self, a: &[BigInt]) -> Vec<BigRational> {
        let n = self.degree();
        let mut out = vec![rat(0); n];
        for (row, ai) in self.spec.basis.iter().zip(a) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * BigRational::from_integer(ai.clone());
            }
        }
        out
    }

    /// Basis coordinates of an element given in the power basis, if integral.
    pub fn from_power_basis(&self, v: &[BigRational]) -> Option<Vec<BigInt>> {
        let bt = linalg::transpose(&self.spec.basis);
        let inv = linalg::inverse(&bt)?;
        let c = linalg::mat_vec(&inv, v);
        c.iter().all(|x| x.is_integer()).then(|| c.into_iter().map(|x| x.to_integer()).collect())
    }

    /// Discriminant of the defining polynomial (trace form of the power basis).
    pub fn poly_discriminant(&self) -> BigInt {
        let n = self.degree();
        let ps = FieldSpec {
            degree: n,
            min_poly: self.spec.min_poly.clone(),
            basis: linalg::identity(n),
            discriminant: BigInt::zero(),
        };
        let mult = multiplication_matrices(&ps).expect("power basis");
        let gram: Matrix = (0..n).map(|i| (0..n).map(|j| linalg::trace(&linalg::mul(&mult[i], &mult[j]))).collect()).collect();
        linalg::det(&gram).to_integer()
    }

    /// Splitting type (residue degrees) of an unramified prime not dividing
    /// the index of `Z[θ]`; `None` for primes dividing the polynomial discriminant.
    pub fn residue_degrees(&self, p: u64) -> Option<Vec<usize>> {
        let disc = self.poly_discriminant();
        if (disc % BigInt::from(p)).is_zero() {
            return None;
        }
        let f: Vec<i128> = self.spec.min_poly.iter().map(|c| c.to_i128().expect("small min_poly")).collect();
        factor_degrees(&f, p)
    }

    /// Number of real embeddings (Sturm count on the defining polynomial).
    pub fn real_embeddings(&self) -> usize {
        sturm_real_roots(&self.spec.min_poly)
    }
}

fn poly_rem_rat(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db && !r.is_empty() {
        let k = r.len() - 1 - db;
        let f = r.last().unwrap() / b.last().unwrap();
        for (i, bc) in b.iter().enumerate() {
            r[k + i] -= &f * bc;
        }
        r.pop();
        while r.last().map(|c| c.is_zero()).unwrap_or(false) {
            r.pop();
        }
    }
    r
}

fn sign_changes(seq: &[Vec<BigRational>], at_pos_inf: bool) -> usize {
    let signs: Vec<i32> = seq
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let lead = p.last().unwrap();
            let deg = p.len() - 1;
            let mut s = if lead.is_positive() { 1 } else { -1 };
            if !at_pos_inf && deg % 2 == 1 {
                s = -s;
            }
            s
        })
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn sturm_real_roots(f: &[BigInt]) -> usize {
    let p0: Vec<BigRational> = f.iter().map(|c| BigRational::from_integer(c.clone())).collect();
    let p1: Vec<BigRational> =
        p0.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(BigInt::from(i))).collect();
    let mut seq = vec![p0, p1];
    loop {
        let n = seq.len();
        if seq[n - 1].len() <= 1 {
            break;
        }
        let r = poly_rem_rat(&seq[n - 2], &seq[n - 1]);
        if r.is_empty() {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
    }
    sign_changes(&seq, false) - sign_changes(&seq, true)
}

/// Integer gcd helper for BigInt content.
pub fn content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

/// Ready-made fields used throughout the tests, examples and experiments.
pub mod presets {
    use super::FieldSpec;

    /// Q(i), basis {1, i}.
    pub fn gaussian() -> FieldSpec {
        FieldSpec::new(&[1, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], -4)
    }

    /// Q(√−2), basis {1, √−2}.
    pub fn sqrt_minus_two() -> FieldSpec {
        FieldSpec::new(&[2, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], -8)
    }

    /// Q(√−3), basis {1, (1+√−3)/2} with θ = (1+√−3)/2 a root of x² − x + 1.
    pub fn eisenstein() -> FieldSpec {
        FieldSpec::new(&[1, -1, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], -3)
    }

    /// Q(√−7), θ = (1+√−7)/2 root of x² − x + 2.
    pub fn sqrt_minus_seven() -> FieldSpec {
        FieldSpec::new(&[2, -1, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], -7)
    }

    /// Q(√−11), θ = (1+√−11)/2 root of x² − x + 3.
    pub fn sqrt_minus_eleven() -> FieldSpec {
        FieldSpec::new(&[3, -1, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], -11)
    }

    /// Q(√2), basis {1, √2}.
    pub fn sqrt_two() -> FieldSpec {
        FieldSpec::new(&[-2, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], 8)
    }

    /// Q(√3), basis {1, √3}.
    pub fn sqrt_three() -> FieldSpec {
        FieldSpec::new(&[-3, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], 12)
    }

    /// Q(√5) with θ = √5 and basis {1, (1+√5)/2}.
    pub fn golden() -> FieldSpec {
        FieldSpec::new(&[-5, 0, 1], &[&[(1, 1), (0, 1)], &[(1, 2), (1, 2)]], 5)
    }

    /// Q(∛2), power basis {1, θ, θ²}.
    pub fn cube_root_two() -> FieldSpec {
        FieldSpec::new(&[-2, 0, 0, 1], &[&[(1, 1), (0, 1), (0, 1)], &[(0, 1), (1, 1), (0, 1)], &[(0, 1), (0, 1), (1, 1)]], -108)
    }

    pub fn by_name(name: &str) -> Option<FieldSpec> {
        Some(match name {
            "gaussian" | "Q(i)" => gaussian(),
            "sqrt-2" | "Q(sqrt-2)" => sqrt_minus_two(),
            "eisenstein" | "Q(sqrt-3)" => eisenstein(),
            "sqrt-7" | "Q(sqrt-7)" => sqrt_minus_seven(),
            "sqrt-11" | "Q(sqrt-11)" => sqrt_minus_eleven(),
            "sqrt2" | "Q(sqrt2)" => sqrt_two(),
            "sqrt3" | "Q(sqrt3)" => sqrt_three(),
            "golden" | "Q(sqrt5)" => golden(),
            "cbrt2" | "Q(cbrt2)" => cube_root_two(),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&a| BigInt::from(a)).collect()
    }

    fn int_matrix(m: &Matrix) -> Vec<Vec<i64>> {
        m.iter().map(|r| r.iter().map(|c| c.to_integer().to_i64().unwrap()).collect()).collect()
    }

    #[test]
    fn gaussian_multiplication_matrix() {
        let m = multiplication_matrices(&gaussian()).unwrap();
        assert_eq!(int_matrix(&m[0]), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(int_matrix(&m[1]), vec![vec![0, -1], vec![1, 0]]);
    }

    #[test]
    fn sqrt_two_multiplication_matrix() {
        let m = multiplication_matrices(&sqrt_two()).unwrap();
        assert_eq!(int_matrix(&m[1]), vec![vec![0, 2], vec![1, 0]]);
    }

    #[test]
    fn cube_root_two_matrices_by_direct_multiplication() {
        // θ·(a + bθ + cθ²) = 2c + aθ + bθ², θ²·(…) = 2b + 2cθ + aθ².
        let m = multiplication_matrices(&cube_root_two()).unwrap();
        assert_eq!(int_matrix(&m[1]), vec![vec![0, 0, 2], vec![1, 0, 0], vec![0, 1, 0]]);
        assert_eq!(int_matrix(&m[2]), vec![vec![0, 2, 0], vec![0, 0, 2], vec![1, 0, 0]]);
    }

    #[test]
    fn norm_forms() {
        assert_eq!(build_norm_form(&gaussian()).unwrap().to_string(), "x1^2 + x2^2");
        assert_eq!(build_norm_form(&sqrt_two()).unwrap().to_string(), "x1^2 - 2*x2^2");
        let cubic = build_norm_form(&cube_root_two()).unwrap();
        let expect = NormForm::from_terms(3, &[(&[3, 0, 0], 1), (&[0, 3, 0], 2), (&[0, 0, 3], 4), (&[1, 1, 1], -6)]);
        assert_eq!(cubic, expect);
    }

    #[test]
    fn golden_norm_form() {
        // N(x + y(1+√5)/2) = x² + xy − y²
        let f = build_norm_form(&golden()).unwrap();
        let expect = NormForm::from_terms(2, &[(&[2, 0], 1), (&[1, 1], 1), (&[0, 2], -1)]);
        assert_eq!(f, expect);
    }

    #[test]
    fn evaluation_examples() {
        let g = build_norm_form(&gaussian()).unwrap();
        assert_eq!(g.evaluate_i64(&[3, 4]).unwrap(), BigInt::from(25));
        let s = build_norm_form(&sqrt_two()).unwrap();
        assert_eq!(s.evaluate_i64(&[1, 1]).unwrap(), BigInt::from(-1));
        let c = build_norm_form(&cube_root_two()).unwrap();
        assert_eq!(c.evaluate_i64(&[1, 1, 1]).unwrap(), BigInt::from(1));
        assert!(matches!(c.evaluate_i64(&[1, 1]), Err(Error::LengthMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn fields_validate() {
        for spec in [gaussian(), sqrt_minus_two(), eisenstein(), sqrt_minus_seven(), sqrt_minus_eleven(), sqrt_two(), sqrt_three(), golden(), cube_root_two()] {
            NumberField::new(spec).unwrap();
        }
    }

    #[test]
    fn singular_basis_rejected() {
        let spec = FieldSpec::new(&[1, 0, 1], &[&[(1, 1), (0, 1)], &[(2, 1), (0, 1)]], -4);
        assert!(matches!(multiplication_matrices(&spec), Err(Error::InvalidField(_))));
        assert!(NumberField::new(spec).is_err());
    }

    #[test]
    fn non_integral_basis_rejected() {
        // {1, i/2} is not closed under multiplication over Z.
        let spec = FieldSpec::new(&[1, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 2)]], -1);
        assert!(NumberField::new(spec).is_err());
    }

    #[test]
    fn wrong_discriminant_rejected() {
        let mut spec = gaussian();
        spec.discriminant = BigInt::from(-16);
        assert!(matches!(NumberField::new(spec), Err(Error::InvalidField(_))));
    }

    #[test]
    fn reducible_poly_rejected() {
        let spec = FieldSpec::new(&[-4, 0, 1], &[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]], 16);
        assert!(matches!(NumberField::new(spec), Err(Error::InvalidField(_))));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for spec in [gaussian(), golden(), cube_root_two()] {
            let text = spec.to_json().unwrap();
            let back = FieldSpec::from_json(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn json_accepts_integer_entries() {
        let text = r#"{"degree": 2, "min_poly": [1, 0, 1], "basis": ["1", "0", "0", "2/2"], "discriminant": -4}"#;
        assert_eq!(FieldSpec::from_json(text).unwrap(), gaussian());
    }

    #[test]
    fn multiplicativity_small() {
        let k = NumberField::new(cube_root_two()).unwrap();
        let a = ints(&[1, -2, 3]);
        let b = ints(&[4, 0, -1]);
        let ab = k.multiply(&a, &b);
        let lhs = k.form.evaluate(&ab).unwrap();
        let rhs = k.form.evaluate(&a).unwrap() * k.form.evaluate(&b).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(k.norm_via_matrix(&a), k.form.evaluate(&a).unwrap());
    }

    #[test]
    fn real_embedding_counts() {
        assert_eq!(NumberField::new(gaussian()).unwrap().real_embeddings(), 0);
        assert_eq!(NumberField::new(sqrt_two()).unwrap().real_embeddings(), 2);
        assert_eq!(NumberField::new(cube_root_two()).unwrap().real_embeddings(), 1);
    }

    #[test]
    fn residue_degrees_of_gaussian_primes() {
        let k = NumberField::new(gaussian()).unwrap();
        assert_eq!(k.residue_degrees(13), Some(vec![1, 1]));
        assert_eq!(k.residue_degrees(11), Some(vec![2]));
        assert_eq!(k.residue_degrees(2), None);
        assert_eq!(k.poly_discriminant(), BigInt::from(-4));
    }
}
