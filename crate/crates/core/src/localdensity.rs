//! Local densities `ρ(q, A)`, the lifting rule, local factors `β_p`, the
//! archimedean factor `β_∞` and truncated singular series.
//!
//! `ρ(p^m, ·)` is obtained by one of three routes, all exact:
//! * primes not dividing the polynomial discriminant: a closed form from the
//!   residue degrees of `p` (the local norm is uniform on unit classes);
//! * the remaining primes: a Hensel digit recursion on the form;
//! * exhaustive enumeration of `(Z/q)^n`, kept as the independent oracle.

use std::collections::{HashMap, HashSet};
use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, primes_up_to, valuation};
use crate::error::{Error, Result};
use crate::numberfield::{format_rational, presets, CompiledForm, FieldSpec, NormForm, NumberField};
use crate::repfn::FundamentalDomainQuad;

/// Default cap on `q^n` for exhaustive enumeration.
pub const ENUMERATION_BOUND: u128 = 100_000_000;
/// Largest residue ring `p^m` for which a full Hensel table is built.
const TABLE_BOUND: u64 = 1 << 22;

pub fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn pow_u128(p: u64, e: u32) -> Result<u128> {
    (p as u128).checked_pow(e).ok_or_else(|| Error::InvalidArgument(format!("{p}^{e} overflows")))
}

/// Polynomial with coefficients reduced modulo a prime power, used by the
/// Hensel recursion. Terms are kept sorted so equal polynomials hash equally.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct ModPoly {
    terms: Vec<(Vec<u8>, u64)>,
}

impl ModPoly {
    fn from_form(form: &NormForm, modulus: u64) -> Self {
        let mut terms: Vec<(Vec<u8>, u64)> = form
            .terms
            .iter()
            .map(|(e, c)| {
                let r = (c % BigInt::from(modulus) + BigInt::from(modulus)) % BigInt::from(modulus);
                (e.iter().map(|&k| k as u8).collect(), r.to_u64().unwrap())
            })
            .filter(|(_, c)| *c != 0)
            .collect();
        terms.sort();
        Self { terms }
    }

    fn normalise(map: HashMap<Vec<u8>, u64>) -> Self {
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| *c != 0).collect();
        terms.sort();
        Self { terms }
    }

    fn eval(&self, y: &[u64], modulus: u64) -> u64 {
        let m = modulus as u128;
        let mut acc = 0u128;
        for (e, c) in &self.terms {
            let mut t = *c as u128 % m;
            for (yi, &k) in y.iter().zip(e) {
                for _ in 0..k {
                    t = t * *yi as u128 % m;
                }
            }
            acc = (acc + t) % m;
        }
        acc as u64
    }

    fn constant(&self) -> u64 {
        self.terms.iter().find(|(e, _)| e.iter().all(|&k| k == 0)).map(|t| t.1).unwrap_or(0)
    }

    fn gradient_vanishes(&self, y: &[u64], p: u64) -> bool {
        let n = y.len();
        (0..n).all(|i| {
            let mut acc = 0u128;
            for (e, c) in &self.terms {
                if e[i] == 0 {
                    continue;
                }
                let mut t = (*c as u128 % p as u128) * (e[i] as u128 % p as u128) % p as u128;
                for (j, (yj, &k)) in y.iter().zip(e).enumerate() {
                    let k = if j == i { k - 1 } else { k };
                    for _ in 0..k {
                        t = t * *yj as u128 % p as u128;
                    }
                }
                acc = (acc + t) % p as u128;
            }
            acc == 0
        })
    }

    /// `P(y0 + p z)` as a polynomial in `z`, coefficients mod `modulus`.
    fn shift(&self, y0: &[u64], p: u64, modulus: u64) -> Self {
        let m = modulus as u128;
        let n = y0.len();
        let mut out: HashMap<Vec<u8>, u64> = HashMap::new();
        for (e, c) in &self.terms {
            // Expand ∏_i (y0_i + p z_i)^{e_i}.
            let mut partial: Vec<(Vec<u8>, u128)> = vec![(vec![0; n], *c as u128 % m)];
            for i in 0..n {
                let k = e[i] as u32;
                if k == 0 {
                    continue;
                }
                let mut next = Vec::new();
                for (exp, coef) in &partial {
                    for j in 0..=k {
                        let binom = crate::poly::binomial(k, j) % m;
                        let mut t = coef * binom % m;
                        for _ in 0..(k - j) {
                            t = t * y0[i] as u128 % m;
                        }
                        for _ in 0..j {
                            t = t * p as u128 % m;
                        }
                        if t == 0 {
                            continue;
                        }
                        let mut ne = exp.clone();
                        ne[i] += j as u8;
                        next.push((ne, t));
                    }
                }
                partial = next;
            }
            for (exp, t) in partial {
                let slot = out.entry(exp).or_insert(0);
                *slot = ((*slot as u128 + t) % m) as u64;
            }
        }
        Self::normalise(out)
    }

    /// `(P − c) / p^k` for the constant term `c`; caller guarantees divisibility.
    fn strip(&self, pk: u64, new_modulus: u64) -> Self {
        let mut map = HashMap::new();
        for (e, c) in &self.terms {
            if e.iter().all(|&k| k == 0) {
                continue;
            }
            debug_assert_eq!(c % pk, 0);
            map.insert(e.clone(), (c / pk) % new_modulus);
        }
        Self::normalise(map)
    }
}

type DistKey = (ModPoly, u32);

/// Value distribution of `P` on `(Z/p^k)^n`.
fn hensel_dist(
    poly: &ModPoly,
    p: u64,
    k: u32,
    n: usize,
    memo: &mut HashMap<DistKey, Arc<Vec<u64>>>,
) -> Arc<Vec<u64>> {
    if k == 0 {
        return Arc::new(vec![1]);
    }
    if let Some(v) = memo.get(&(poly.clone(), k)) {
        return v.clone();
    }
    let pk = p.pow(k);
    let pn = p.pow(n as u32);
    let mut dist = vec![0u64; pk as usize];
    let c = poly.constant() % pk;
    let content = poly.terms.iter().all(|(e, coef)| e.iter().all(|&x| x == 0) || coef % p == 0);
    if content {
        let rest = poly.strip(p, pk / p);
        let sub = hensel_dist(&rest, p, k - 1, n, memo);
        for (v, &cnt) in sub.iter().enumerate() {
            if cnt > 0 {
                let idx = (c + p * v as u64) % pk;
                dist[idx as usize] += cnt * pn;
            }
        }
    } else {
        let nonsingular_weight = p.pow((k - 1) * (n as u32 - 1));
        let mut y0 = vec![0u64; n];
        loop {
            let val = poly.eval(&y0, pk);
            if !poly.gradient_vanishes(&y0, p) {
                let base = val % p;
                for t in 0..pk / p {
                    dist[(base + p * t) as usize] += nonsingular_weight;
                }
            } else if k == 1 {
                dist[val as usize] += 1;
            } else {
                let shifted = poly.shift(&y0, p, pk);
                let q = shifted.strip(p * p, (pk / (p * p)).max(1));
                let sub = hensel_dist(&q, p, k - 2, n, memo);
                for (v, &cnt) in sub.iter().enumerate() {
                    if cnt > 0 {
                        let idx = (val + p * p * v as u64) % pk;
                        dist[idx as usize] += cnt * pn;
                    }
                }
            }
            // odometer
            let mut i = 0;
            while i < n {
                y0[i] += 1;
                if y0[i] < p {
                    break;
                }
                y0[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    let out = Arc::new(dist);
    memo.insert((poly.clone(), k), out.clone());
    out
}

/// Value distribution of a compiled form on `(Z/q)^n` by brute force.
pub fn enumerate_distribution(form: &CompiledForm, q: u64) -> Result<Vec<u64>> {
    if q == 0 {
        return Err(Error::InvalidArgument("q = 0".into()));
    }
    let n = form.n_vars;
    let points = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if points > ENUMERATION_BOUND {
        let (p, m) = match factorize(q).as_slice() {
            [(p, m)] => (*p, *m),
            _ => (q, 1),
        };
        return Err(Error::EnumerationBound { p, m, points });
    }
    let dist = (0..q)
        .into_par_iter()
        .fold(
            || vec![0u64; q as usize],
            |mut acc, x0| {
                let mut y = vec![0u64; n];
                y[0] = x0;
                loop {
                    acc[form.eval_mod(&y, q) as usize] += 1;
                    let mut i = 1;
                    while i < n {
                        y[i] += 1;
                        if y[i] < q {
                            break;
                        }
                        y[i] = 0;
                        i += 1;
                    }
                    if i >= n {
                        break;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; q as usize],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(dist)
}

/// Exhaustive `ρ(q, A)`; the oracle for every faster route.
pub fn rho_enumerate(form: &NormForm, q: u64, a: i128) -> Result<u128> {
    let dist = enumerate_distribution(&form.compile(), q)?;
    Ok(dist[a.rem_euclid(q as i128) as usize] as u128)
}

/// `ρ` for one norm form, with per-prime-power memo tables.
pub struct LocalForm {
    pub form: NormForm,
    pub n: usize,
    /// Residue degrees for primes not dividing the polynomial discriminant.
    field: Option<NumberField>,
    poly_disc: Option<BigInt>,
    splitting: RwLock<HashMap<u64, Vec<usize>>>,
    tables: RwLock<HashMap<(u64, u32), Arc<Vec<u64>>>>,
    memo: RwLock<HashMap<u64, HashMap<DistKey, Arc<Vec<u64>>>>>,
}

impl std::fmt::Debug for LocalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LocalForm({})", self.form)
    }
}

impl LocalForm {
    pub fn new(field: &NumberField) -> Self {
        Self {
            form: field.form.clone(),
            n: field.degree(),
            poly_disc: Some(field.poly_discriminant()),
            field: Some(field.clone()),
            splitting: RwLock::new(HashMap::new()),
            tables: RwLock::new(HashMap::new()),
            memo: RwLock::new(HashMap::new()),
        }
    }

    /// A bare form: every prime goes through the Hensel tables.
    pub fn from_form(form: NormForm) -> Self {
        let n = form.n_vars;
        Self {
            form,
            n,
            field: None,
            poly_disc: None,
            splitting: RwLock::new(HashMap::new()),
            tables: RwLock::new(HashMap::new()),
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn from_spec(spec: FieldSpec) -> Result<Self> {
        Ok(Self::new(&NumberField::new(spec)?))
    }

    /// Residue degrees of `p`, when `p` is unramified and prime to the index.
    pub fn residue_degrees(&self, p: u64) -> Option<Vec<usize>> {
        let disc = self.poly_disc.as_ref()?;
        if (disc % BigInt::from(p)).is_zero() {
            return None;
        }
        if let Some(v) = self.splitting.read().unwrap().get(&p) {
            return Some(v.clone());
        }
        let f = self.field.as_ref()?.residue_degrees(p)?;
        self.splitting.write().unwrap().insert(p, f.clone());
        Some(f)
    }

    /// Number of `x` in `(Z/p^m)^n` with `v_p(N(x)) = k`, for `k < m`, good `p`.
    fn closed_form_class(&self, p: u64, m: u32, k: u32, f: &[usize]) -> u128 {
        fn rec(p: u64, m: u32, f: &[usize], left: u32, acc: u128) -> u128 {
            let Some((&fj, rest)) = f.split_first() else {
                return if left == 0 { acc } else { 0 };
            };
            let mut total = 0;
            let mut v = 0u32;
            while fj as u32 * v <= left {
                let q = (p as u128).pow(fj as u32);
                let term = (q - 1) * q.pow(m - v - 1);
                total += rec(p, m, rest, left - fj as u32 * v, acc * term);
                v += 1;
            }
            total
        }
        rec(p, m, f, k, 1)
    }

    fn closed_form(&self, p: u64, m: u32, a: u128, f: &[usize]) -> Result<u128> {
        let pm = pow_u128(p, m)?;
        pow_u128(p, m * self.n as u32)?;
        let a = a % pm;
        if a == 0 {
            let total = pow_u128(p, m * self.n as u32)?;
            let nonzero: u128 = (0..m).map(|k| self.closed_form_class(p, m, k, f)).sum();
            return Ok(total - nonzero);
        }
        let mut k = 0;
        let mut t = a;
        while t.is_multiple_of(p as u128) {
            t /= p as u128;
            k += 1;
        }
        let c = self.closed_form_class(p, m, k, f);
        let phi = (p as u128 - 1) * (p as u128).pow(m - k - 1);
        debug_assert_eq!(c % phi, 0);
        Ok(c / phi)
    }

    /// Full table of `ρ(p^m, ·)` (bad primes, or when no field data is known).
    pub fn table(&self, p: u64, m: u32) -> Result<Arc<Vec<u64>>> {
        if let Some(t) = self.tables.read().unwrap().get(&(p, m)) {
            return Ok(t.clone());
        }
        let pm = p.checked_pow(m).filter(|&v| v <= TABLE_BOUND);
        let points = (p as u128).checked_pow(m * self.n as u32);
        let (Some(pm), Some(points)) = (pm, points) else {
            return Err(Error::EnumerationBound { p, m, points: u128::MAX });
        };
        if points >= 1 << 63 {
            return Err(Error::EnumerationBound { p, m, points });
        }
        let dist = {
            let mut memo_all = self.memo.write().unwrap();
            let memo = memo_all.entry(p).or_default();
            let poly = ModPoly::from_form(&self.form, pm);
            hensel_dist(&poly, p, m, self.n, memo)
        };
        self.tables.write().unwrap().insert((p, m), dist.clone());
        Ok(dist)
    }

    /// `ρ(p^m, A)`.
    pub fn rho_prime_power(&self, p: u64, m: u32, a: i128) -> Result<u128> {
        if m == 0 {
            return Ok(1);
        }
        let pm = pow_u128(p, m)?;
        let ar = a.rem_euclid(pm as i128) as u128;
        if let Some(f) = self.residue_degrees(p) {
            return self.closed_form(p, m, ar, &f);
        }
        let t = self.table(p, m)?;
        Ok(t[ar as usize] as u128)
    }

    /// `ρ(q, A)` via CRT over the prime powers of `q`.
    pub fn rho(&self, q: u64, a: i128) -> Result<u128> {
        if q == 0 {
            return Err(Error::InvalidArgument("q = 0".into()));
        }
        let mut acc: u128 = 1;
        for (p, m) in factorize(q) {
            let v = self.rho_prime_power(p, m, a)?;
            acc = acc.checked_mul(v).ok_or_else(|| Error::InvalidArgument(format!("ρ({q}, ·) overflows u128")))?;
        }
        Ok(acc)
    }

    /// `ρ(q, A) / q^{n−1}` as an exact rational.
    pub fn normalized(&self, q: u64, a: i128) -> Result<BigRational> {
        let num = self.rho(q, a)?;
        Ok(BigRational::new(BigInt::from(num), BigInt::from(q).pow(self.n as u32 - 1)))
    }

    /// `ρ(p², 0)`.
    pub fn rho_p2_zero(&self, p: u64) -> Result<u128> {
        self.rho_prime_power(p, 2, 0)
    }

    /// The square-free sieve factor `1 − ρ(p², 0)/p^{2n}`.
    pub fn sieve_factor(&self, p: u64) -> Result<BigRational> {
        let r = self.rho_p2_zero(p)?;
        Ok(BigRational::one() - ratio(r, pow_u128(p, 2 * self.n as u32)?))
    }

    /// Normalised density stabilised by the lifting rule.
    ///
    /// Below the threshold `m₀ = 2(v_p(A) + v_p(n)) + 1` the level itself is
    /// evaluated; above it the values at `m₀` and `m₀ + 1` must coincide.
    pub fn rho_lifted(&self, p: u64, target_m: u32, a: i128) -> Result<BigRational> {
        let level = |m: u32| -> Result<BigRational> {
            let r = self.rho_prime_power(p, m, a)?;
            Ok(BigRational::new(BigInt::from(r), BigInt::from(p).pow(m * (self.n as u32 - 1))))
        };
        let pm = pow_u128(p, target_m)? as i128;
        if a.rem_euclid(pm) == 0 {
            return level(target_m);
        }
        let va = valuation(a, p).unwrap();
        let vn = valuation(self.n as i128, p).unwrap();
        let m0 = 2 * (va + vn) + 1;
        if target_m < m0 {
            return level(target_m);
        }
        let d0 = level(m0)?;
        let d1 = level(m0 + 1)?;
        if d0 != d1 {
            return Err(Error::LiftingViolated { p, a, m: m0, m_next: m0 + 1 });
        }
        Ok(d0)
    }

    /// Persist all Hensel tables: header `form_hash` then `(p, m, A, ρ)` records.
    pub fn save_tables(&self, path: &Path) -> Result<usize> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.form.form_hash().to_le_bytes())?;
        let tables = self.tables.read().unwrap();
        let mut keys: Vec<_> = tables.keys().copied().collect();
        keys.sort_unstable();
        let mut n = 0;
        for (p, m) in keys {
            for (a, &r) in tables[&(p, m)].iter().enumerate() {
                f.write_all(&p.to_le_bytes())?;
                f.write_all(&[m as u8])?;
                f.write_all(&(a as u64).to_le_bytes())?;
                f.write_all(&r.to_le_bytes())?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Load tables written by [`save_tables`](Self::save_tables); a file for a
    /// different form is ignored.
    pub fn load_tables(&self, path: &Path) -> Result<usize> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || u64::from_le_bytes(bytes[..8].try_into().unwrap()) != self.form.form_hash() {
            return Ok(0);
        }
        let body = &bytes[8..];
        if body.len() % 25 != 0 {
            return Err(Error::Parse("truncated density cache".into()));
        }
        let mut grouped: HashMap<(u64, u32), Vec<u64>> = HashMap::new();
        for rec in body.chunks(25) {
            let p = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let m = rec[8] as u32;
            let a = u64::from_le_bytes(rec[9..17].try_into().unwrap()) as usize;
            let r = u64::from_le_bytes(rec[17..25].try_into().unwrap());
            let t = grouped.entry((p, m)).or_insert_with(|| vec![0; p.pow(m) as usize]);
            if a >= t.len() {
                return Err(Error::Parse(format!("residue {a} out of range for {p}^{m}")));
            }
            t[a] = r;
        }
        let n = grouped.len();
        let mut tables = self.tables.write().unwrap();
        for (k, v) in grouped {
            tables.insert(k, Arc::new(v));
        }
        Ok(n)
    }
}

/// Rational polytope `{x : Ax ≤ b}` intersected with `[−1, 1]^s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    pub s: usize,
    pub rows: Vec<Vec<BigRational>>,
    pub rhs: Vec<BigRational>,
}

impl Polytope {
    pub fn unit_box(s: usize) -> Self {
        Self { s, rows: Vec::new(), rhs: Vec::new() }
    }

    fn all_constraints(&self) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
        let mut rows = self.rows.clone();
        let mut rhs = self.rhs.clone();
        for j in 0..self.s {
            for sign in [1i64, -1] {
                let mut r = vec![BigRational::zero(); self.s];
                r[j] = BigRational::from_integer(BigInt::from(sign));
                rows.push(r);
                rhs.push(BigRational::one());
            }
        }
        (rows, rhs)
    }

    pub fn contains(&self, x: &[BigRational]) -> bool {
        let (rows, rhs) = self.all_constraints();
        rows.iter().zip(&rhs).all(|(r, b)| r.iter().zip(x).fold(BigRational::zero(), |acc, (a, v)| acc + a * v) <= *b)
    }

    pub fn contains_f64(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= 1.0)
            && self.rows.iter().zip(&self.rhs).all(|(r, b)| {
                r.iter().zip(x).map(|(a, v)| a.to_f64().unwrap() * v).sum::<f64>() <= b.to_f64().unwrap() + 1e-15
            })
    }

    /// All vertices, by solving every `s`-subset of tight constraints.
    pub fn vertices(&self) -> Vec<Vec<BigRational>> {
        let (rows, rhs) = self.all_constraints();
        let s = self.s;
        let mut out: Vec<Vec<BigRational>> = Vec::new();
        let mut idx: Vec<usize> = (0..s).collect();
        let k = rows.len();
        if k < s {
            return out;
        }
        loop {
            let m: Vec<Vec<BigRational>> = idx.iter().map(|&i| rows[i].clone()).collect();
            if let Some(inv) = crate::numberfield::linalg::inverse(&m) {
                let b: Vec<BigRational> = idx.iter().map(|&i| rhs[i].clone()).collect();
                let x = crate::numberfield::linalg::mat_vec(&inv, &b);
                if self.contains(&x) && !out.contains(&x) {
                    out.push(x);
                }
            }
            // next combination
            let mut i = s;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] < k - s + i {
                    idx[i] += 1;
                    for j in i + 1..s {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Integer form of the extra constraints: `c · u ≤ floor(T · d)`.
    pub fn integer_constraints(&self, t: i64) -> Vec<(Vec<i64>, i128)> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| {
                let l = r.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
                let lr = BigRational::from_integer(l.clone());
                let c: Vec<i64> = r.iter().map(|v| (v * &lr).to_integer().to_i64().unwrap()).collect();
                let bound = (b * &lr * BigRational::from_integer(BigInt::from(t))).floor().to_integer().to_i128().unwrap();
                (c, bound)
            })
            .collect()
    }

    /// Exact area/length of `{x ∈ 𝔎 : sign f_i(x) = ε_i}` for `s ≤ 2`.
    pub fn sector_volume_exact(&self, forms: &[Vec<i64>], eps: &[i8]) -> Option<BigRational> {
        let (mut rows, mut rhs) = self.all_constraints();
        for (f, &e) in forms.iter().zip(eps) {
            // ε f(x) ≥ 0  ⇔  −ε f(x) ≤ 0
            rows.push(f.iter().map(|&c| BigRational::from_integer(BigInt::from(-(e as i64) * c))).collect());
            rhs.push(BigRational::zero());
        }
        match self.s {
            1 => {
                let (mut lo, mut hi) = (BigRational::from_integer(BigInt::from(-1)), BigRational::one());
                for (r, b) in rows.iter().zip(&rhs) {
                    if r[0].is_positive() {
                        hi = hi.min(b / &r[0]);
                    } else if r[0].is_negative() {
                        lo = lo.max(b / &r[0]);
                    } else if b.is_negative() {
                        return Some(BigRational::zero());
                    }
                }
                Some(if hi > lo { hi - lo } else { BigRational::zero() })
            }
            2 => {
                let one = BigRational::one();
                let mut poly: Vec<[BigRational; 2]> =
                    vec![[-one.clone(), -one.clone()], [one.clone(), -one.clone()], [one.clone(), one.clone()], [-one.clone(), one]];
                for (r, b) in rows.iter().zip(&rhs) {
                    poly = clip(&poly, r, b);
                    if poly.is_empty() {
                        return Some(BigRational::zero());
                    }
                }
                let mut area = BigRational::zero();
                for i in 0..poly.len() {
                    let j = (i + 1) % poly.len();
                    area += &poly[i][0] * &poly[j][1] - &poly[j][0] * &poly[i][1];
                }
                Some(area.abs() / BigRational::from_integer(BigInt::from(2)))
            }
            _ => None,
        }
    }
}

/// Sutherland–Hodgman clip of a convex polygon by `r·x ≤ b`.
fn clip(poly: &[[BigRational; 2]], r: &[BigRational], b: &BigRational) -> Vec<[BigRational; 2]> {
    let val = |p: &[BigRational; 2]| &r[0] * &p[0] + &r[1] * &p[1] - b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = &poly[i];
        let nxt = &poly[(i + 1) % poly.len()];
        let (vc, vn) = (val(cur), val(nxt));
        if !vc.is_positive() {
            out.push(cur.clone());
        }
        if (vc.is_negative() && vn.is_positive()) || (vc.is_positive() && vn.is_negative()) {
            let t = &vc / (&vc - &vn);
            out.push([&cur[0] + &t * (&nxt[0] - &cur[0]), &cur[1] + &t * (&nxt[1] - &cur[1])]);
        }
    }
    out.dedup();
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// A system of linear forms with its congruence and archimedean data.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub s: usize,
    /// `r` integer linear forms in `s` variables.
    pub forms: Vec<Vec<i64>>,
    pub q: u64,
    pub a: Vec<i64>,
    pub polytope: Polytope,
    pub fields: Vec<FieldSpec>,
    /// Prime set `S_i` for each form.
    pub s_sets: Vec<Vec<u64>>,
}

/// Polytope rows and right-hand sides as `"p/q"` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub rows: Vec<Vec<String>>,
    #[serde(default)]
    pub rhs: Vec<String>,
}

impl PolytopeFile {
    pub fn parse(&self, s: usize) -> Result<Polytope> {
        let rows: Vec<Vec<BigRational>> =
            self.rows.iter().map(|r| r.iter().map(|x| parse_q(x)).collect::<Result<_>>()).collect::<Result<_>>()?;
        let rhs: Vec<BigRational> = if self.rhs.is_empty() {
            vec![BigRational::zero(); rows.len()]
        } else {
            self.rhs.iter().map(|x| parse_q(x)).collect::<Result<_>>()?
        };
        if rhs.len() != rows.len() || rows.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidArgument("polytope rows and right-hand sides disagree in shape".into()));
        }
        Ok(Polytope { s, rows, rhs })
    }
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    s: usize,
    forms: Vec<Vec<i64>>,
    #[serde(default = "one_u64")]
    q: u64,
    #[serde(default)]
    a: Option<Vec<i64>>,
    #[serde(default)]
    polytope: Option<PolytopeFile>,
    fields: Vec<serde_json::Value>,
    #[serde(rename = "S", default)]
    s_sets: Option<Vec<Vec<u64>>>,
}

fn one_u64() -> u64 {
    1
}

fn parse_q(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let (n, d) = t.split_once('/').unwrap_or((t, "1"));
    let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// A field given either as a preset name or as an inline field specification.
pub fn field_from_value(v: &serde_json::Value) -> Result<FieldSpec> {
    match v {
        serde_json::Value::String(name) => {
            presets::by_name(name).ok_or_else(|| Error::Parse(format!("unknown field preset {name:?}")))
        }
        other => FieldSpec::from_json(&other.to_string()),
    }
}

pub fn field_to_value(spec: &FieldSpec) -> serde_json::Value {
    serde_json::from_str(&spec.to_json().unwrap()).unwrap()
}

impl LinearSystem {
    pub fn new(forms: Vec<Vec<i64>>, fields: Vec<FieldSpec>, s_sets: Vec<Vec<u64>>) -> Self {
        let s = forms.first().map(|f| f.len()).unwrap_or(0);
        Self { s, forms, q: 1, a: vec![0; s], polytope: Polytope::unit_box(s), fields, s_sets }
    }

    pub fn with_congruence(mut self, q: u64, a: Vec<i64>) -> Self {
        self.q = q;
        self.a = a;
        self
    }

    pub fn with_polytope(mut self, p: Polytope) -> Self {
        self.polytope = p;
        self
    }

    pub fn r(&self) -> usize {
        self.forms.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text)?;
        let r = f.forms.len();
        let polytope = match f.polytope {
            None => Polytope::unit_box(f.s),
            Some(p) => p.parse(f.s)?,
        };
        let fields = f.fields.iter().map(field_from_value).collect::<Result<Vec<_>>>()?;
        let sys = Self {
            s: f.s,
            forms: f.forms,
            q: f.q,
            a: f.a.unwrap_or_else(|| vec![0; f.s]),
            polytope,
            fields,
            s_sets: f.s_sets.unwrap_or_else(|| vec![Vec::new(); r]),
        };
        sys.check_shape()?;
        Ok(sys)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let f = SystemFile {
            s: self.s,
            forms: self.forms.clone(),
            q: self.q,
            a: Some(self.a.clone()),
            polytope: Some(PolytopeFile {
                rows: self.polytope.rows.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
                rhs: self.polytope.rhs.iter().map(format_rational).collect(),
            }),
            fields: self.fields.iter().map(field_to_value).collect(),
            s_sets: Some(self.s_sets.clone()),
        };
        serde_json::to_value(f).unwrap()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_shape(&self) -> Result<()> {
        let r = self.forms.len();
        if r == 0 || self.s == 0 {
            return Err(Error::InvalidArgument("system needs at least one form and one variable".into()));
        }
        for f in &self.forms {
            if f.len() != self.s {
                return Err(Error::LengthMismatch { expected: self.s, got: f.len() });
            }
        }
        if self.fields.len() != r {
            return Err(Error::LengthMismatch { expected: r, got: self.fields.len() });
        }
        if self.s_sets.len() != r {
            return Err(Error::LengthMismatch { expected: r, got: self.s_sets.len() });
        }
        if self.a.len() != self.s {
            return Err(Error::LengthMismatch { expected: self.s, got: self.a.len() });
        }
        if self.q == 0 {
            return Err(Error::InvalidArgument("q = 0".into()));
        }
        if self.polytope.s != self.s || self.polytope.rows.iter().any(|row| row.len() != self.s) {
            return Err(Error::InvalidArgument("polytope dimension mismatch".into()));
        }
        Ok(())
    }

    /// `f_i(a)` as an integer.
    pub fn form_at(&self, i: usize, u: &[i64]) -> i128 {
        self.forms[i].iter().zip(u).map(|(&c, &x)| c as i128 * x as i128).sum()
    }

    /// Checks every hypothesis on the system; the error names the failing clause.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        let r = self.r();
        for i in 0..r {
            if self.forms[i].iter().all(|&c| c == 0) {
                return Err(Error::Hypothesis(format!("form {} is zero", i + 1)));
            }
            for j in i + 1..r {
                let proportional = (0..self.s).all(|k| {
                    (0..self.s).all(|l| {
                        self.forms[i][k] as i128 * self.forms[j][l] as i128 == self.forms[i][l] as i128 * self.forms[j][k] as i128
                    })
                });
                if proportional {
                    return Err(Error::Hypothesis(format!("forms {} and {} are proportional", i + 1, j + 1)));
                }
            }
        }
        let verts = self.polytope.vertices();
        if verts.is_empty() {
            return Err(Error::EmptyPolytope);
        }
        for (i, f) in self.forms.iter().enumerate() {
            for v in &verts {
                let val = f.iter().zip(v).fold(BigRational::zero(), |acc, (&c, x)| acc + BigRational::from_integer(BigInt::from(c)) * x);
                if val.abs() > BigRational::one() {
                    return Err(Error::Hypothesis(format!(
                        "|f_{}| = {} > 1 at a vertex of the body",
                        i + 1,
                        format_rational(&val.abs())
                    )));
                }
            }
        }
        for (i, s) in self.s_sets.iter().enumerate() {
            let fa = self.form_at(i, &self.a);
            for &p in s {
                let vq = valuation(self.q as i128, p).unwrap();
                let ok = match valuation(fa, p) {
                    Some(v) => v < vq,
                    None => false,
                };
                if !ok {
                    return Err(Error::Hypothesis(format!(
                        "v_{p}(f_{}(a)) < v_{p}(q) fails: f_{}(a) = {fa}, q = {}",
                        i + 1,
                        i + 1,
                        self.q
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A validated system with its per-form density tables.
pub struct PreparedSystem {
    pub system: LinearSystem,
    pub locals: Vec<Arc<LocalForm>>,
    pub fields: Vec<NumberField>,
}

impl PreparedSystem {
    pub fn new(system: LinearSystem) -> Result<Self> {
        system.validate()?;
        let fields = system.fields.iter().cloned().map(NumberField::new).collect::<Result<Vec<_>>>()?;
        let mut cache: Vec<(FieldSpec, Arc<LocalForm>)> = Vec::new();
        let mut locals = Vec::new();
        for k in &fields {
            let lf = match cache.iter().find(|(s, _)| *s == k.spec) {
                Some((_, lf)) => lf.clone(),
                None => {
                    let lf = Arc::new(LocalForm::new(k));
                    cache.push((k.spec.clone(), lf.clone()));
                    lf
                }
            };
            locals.push(lf);
        }
        Ok(Self { system, locals, fields })
    }

    pub fn domains(&self) -> Result<Vec<FundamentalDomainQuad>> {
        self.fields.iter().map(FundamentalDomainQuad::new).collect()
    }
}

fn rank_mod_p(rows: &[Vec<i64>], p: u64) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&c| (c as i128).rem_euclid(p as i128)).collect()).collect();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    let p = p as i128;
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = crate::arith::inv_mod(m[rank][c], p).unwrap();
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c] * inv % p;
                for k in 0..cols {
                    m[r][k] = (m[r][k] - f * m[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Subgroup of `(Z/p^M)^r` generated by the columns of the form matrix.
fn image_subgroup(forms: &[Vec<i64>], modulus: u64, limit: usize) -> Result<Vec<Vec<u64>>> {
    let r = forms.len();
    let s = forms[0].len();
    let mut set: HashSet<Vec<u64>> = HashSet::new();
    set.insert(vec![0; r]);
    for j in 0..s {
        let gen: Vec<u64> = forms.iter().map(|f| (f[j] as i128).rem_euclid(modulus as i128) as u64).collect();
        let mut next = HashSet::new();
        for h in &set {
            let mut cur = h.clone();
            loop {
                if !next.insert(cur.clone()) {
                    break;
                }
                cur = cur.iter().zip(&gen).map(|(a, g)| (a + g) % modulus).collect();
            }
            if next.len() > limit {
                return Err(Error::EnumerationBound { p: modulus, m: 1, points: next.len() as u128 });
            }
        }
        set = next;
    }
    let mut v: Vec<_> = set.into_iter().collect();
    v.sort();
    Ok(v)
}

/// Exact local factor with the level at which it stabilised.
#[derive(Clone, Debug)]
pub struct LocalFactor {
    pub p: u64,
    pub value: BigRational,
    /// Product of the square-free correction factors.
    pub prefactor: BigRational,
    pub stabilized_at: u32,
    /// Whether `p | q` (reported separately from the decay fit).
    pub divides_q: bool,
}

/// `β_p` for a prepared system.
pub fn beta_p(p: u64, sys: &PreparedSystem) -> Result<LocalFactor> {
    let system = &sys.system;
    let s = system.s;
    if s > 3 {
        return Err(Error::InvalidArgument(format!("s = {s} > 3 is not supported")));
    }
    let e = valuation(system.q as i128, p).unwrap();
    for (i, set) in system.s_sets.iter().enumerate() {
        if set.contains(&p) {
            let ok = valuation(system.form_at(i, &system.a), p).map(|v| v < e).unwrap_or(false);
            if !ok {
                return Err(Error::Hypothesis(format!("v_{p}(f_{}(a)) < v_{p}(q) fails", i + 1)));
            }
        }
    }
    let mut prefactor = BigRational::one();
    for (i, lf) in sys.locals.iter().enumerate() {
        if !system.s_sets[i].contains(&p) {
            prefactor *= lf.sieve_factor(p)?;
        }
    }
    // The sum runs over u ≡ a (mod p^e) but is normalised by p^{ms}.
    let congruence_density = BigRational::new(BigInt::one(), BigInt::from(p).pow(e * s as u32));
    let r = system.r();
    let (avg, level) = if rank_mod_p(&system.forms, p) == r {
        // Surjective onto each fibre: the average factorises exactly.
        let mut acc = BigRational::one();
        for (i, lf) in sys.locals.iter().enumerate() {
            let pe = p.pow(e);
            acc *= lf.normalized(pe, system.form_at(i, &system.a))?;
        }
        (acc, e)
    } else {
        let m_max = if s <= 2 { 6 } else { 4 };
        let level_value = |m: u32| -> Result<BigRational> {
            let big_m = m - e;
            let modulus = p.pow(big_m);
            let h = image_subgroup(&system.forms, modulus, 10_000_000)?;
            let pe = p.pow(e) as i128;
            let mut sum = BigRational::zero();
            for hv in &h {
                let mut term = BigRational::one();
                for (i, lf) in sys.locals.iter().enumerate() {
                    let t = system.form_at(i, &system.a) + pe * hv[i] as i128;
                    let rho = lf.rho_prime_power(p, m, t)?;
                    term *= BigRational::new(BigInt::from(rho), BigInt::from(p).pow(m * (lf.n as u32 - 1)));
                }
                sum += term;
            }
            Ok(sum / BigRational::from_integer(BigInt::from(h.len())))
        };
        let mut prev = level_value(e + 1)?;
        let mut found = None;
        for m in e + 2..=m_max.max(e + 2) {
            let cur = level_value(m)?;
            if cur == prev {
                found = Some((cur, m - 1));
                break;
            }
            prev = cur;
        }
        found.ok_or(Error::NotStabilized { p, m_max })?
    };
    Ok(LocalFactor {
        p,
        value: &prefactor * &congruence_density * avg,
        prefactor,
        stabilized_at: level,
        divides_q: system.q.is_multiple_of(p),
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Kappa {
    pub plus: Estimate,
    pub minus: Estimate,
}

const MC_CHUNK: u64 = 1 << 16;

/// Fraction of `n` seeded uniform samples satisfying `pred`, chunked so the
/// result does not depend on the thread count.
fn mc_fraction<F>(n: u64, seed: u64, dim: usize, pred: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let chunks = n.div_ceil(MC_CHUNK);
    let (s1, s2) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut x = vec![0.0; dim];
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..len {
                for v in x.iter_mut() {
                    *v = rng.gen::<f64>();
                }
                let g = pred(&x);
                a += g;
                b += g * g;
            }
            (a, b)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let mean = s1 / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// `κ^±` by rejection sampling over a bounding box of the domain.
pub fn kappa_monte_carlo(dom: &FundamentalDomainQuad, samples: u64, seed: u64) -> Result<Kappa> {
    let [(x0, x1), (y0, y1)] = dom.bounding_box()?;
    let area = (x1 - x0) * (y1 - y0);
    let q = dom.data.clone();
    let est = |sign: f64, stream_seed: u64| {
        let (m, se) = mc_fraction(samples, stream_seed, 2, |u| {
            let x = x0 + u[0] * (x1 - x0);
            let y = y0 + u[1] * (y1 - y0);
            let nv = sign * (q.a as f64 * x * x + q.b as f64 * x * y + q.c as f64 * y * y);
            if nv > 0.0 && nv <= 1.0 && dom.in_domain_f64(x, y) {
                1.0
            } else {
                0.0
            }
        });
        Estimate { value: m * area, std_error: se * area }
    };
    Ok(Kappa { plus: est(1.0, seed), minus: est(-1.0, seed ^ 0x9e37_79b9_7f4a_7c15) })
}

/// Closed-form `κ^±` for a quadratic domain.
pub fn kappa_exact(dom: &FundamentalDomainQuad) -> Kappa {
    let e = |v: f64| Estimate { value: v, std_error: 0.0 };
    Kappa { plus: e(dom.kappa_exact(true)), minus: e(dom.kappa_exact(false)) }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SectorVolume {
    pub signs: Vec<i8>,
    pub volume: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BetaInfinity {
    pub estimate: f64,
    pub std_error: f64,
    pub sectors: Vec<SectorVolume>,
    pub kappas: Vec<Kappa>,
    pub samples: u64,
    pub seed: u64,
}

fn sign_vectors(r: usize) -> Vec<Vec<i8>> {
    (0..1u32 << r).map(|mask| (0..r).map(|i| if mask >> i & 1 == 0 { 1 } else { -1 }).collect()).collect()
}

fn kappa_of(k: &Kappa, sign: i8) -> Estimate {
    if sign > 0 {
        k.plus
    } else {
        k.minus
    }
}

/// `β_∞ = Σ_ε vol(𝔎 ∩ f^{-1}(R_ε)) ∏ κ_i^{ε_i}` by Monte Carlo.
pub fn beta_infty(system: &LinearSystem, domains: &[FundamentalDomainQuad], mc_samples: u64, seed: u64) -> Result<BetaInfinity> {
    if system.polytope.vertices().is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let kappas = domains
        .iter()
        .enumerate()
        .map(|(i, d)| kappa_monte_carlo(d, mc_samples, seed.wrapping_add(1 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    assemble_beta_infty(system, kappas, mc_samples, seed)
}

/// Same assembly with caller-supplied `κ` values (e.g. exact ones).
pub fn assemble_beta_infty(system: &LinearSystem, kappas: Vec<Kappa>, mc_samples: u64, seed: u64) -> Result<BetaInfinity> {
    let s = system.s;
    let r = system.r();
    let box_vol = (1u64 << s) as f64;
    let signs = sign_vectors(r);
    let poly = &system.polytope;
    let sign_of = |u: &[f64]| -> Option<Vec<i8>> {
        let x: Vec<f64> = u.iter().map(|v| 2.0 * v - 1.0).collect();
        if !poly.contains_f64(&x) {
            return None;
        }
        let mut out = Vec::with_capacity(r);
        for f in &system.forms {
            let v: f64 = f.iter().zip(&x).map(|(&c, xv)| c as f64 * xv).sum();
            if v == 0.0 {
                return None;
            }
            out.push(if v > 0.0 { 1 } else { -1 });
        }
        Some(out)
    };
    let mut sectors = Vec::new();
    for eps in &signs {
        let (m, se) = mc_fraction(mc_samples, seed, s, |u| if sign_of(u).as_deref() == Some(eps) { 1.0 } else { 0.0 });
        sectors.push(SectorVolume { signs: eps.clone(), volume: Estimate { value: m * box_vol, std_error: se * box_vol } });
    }
    let weight = |eps: &[i8]| -> f64 { eps.iter().zip(&kappas).map(|(&e, k)| kappa_of(k, e).value).product() };
    // Sampling part of the variance: β = 2^s E[g(U)], g = ∏κ on the sector of U.
    let (gm, gse) = mc_fraction(mc_samples, seed, s, |u| sign_of(u).map(|e| weight(&e)).unwrap_or(0.0));
    let estimate = gm * box_vol;
    let mut var = (gse * box_vol).powi(2);
    for (i, k) in kappas.iter().enumerate() {
        for sign in [1i8, -1] {
            let se = kappa_of(k, sign).std_error;
            if se == 0.0 {
                continue;
            }
            let deriv: f64 = sectors
                .iter()
                .filter(|sv| sv.signs[i] == sign)
                .map(|sv| {
                    sv.volume.value
                        * sv.signs.iter().zip(&kappas).enumerate().filter(|(j, _)| *j != i).map(|(_, (&e, kk))| kappa_of(kk, e).value).product::<f64>()
                })
                .sum();
            var += (deriv * se).powi(2);
        }
    }
    Ok(BetaInfinity { estimate, std_error: var.sqrt(), sectors, kappas, samples: mc_samples, seed })
}

/// `β_∞` from exact sector volumes and closed-form `κ` (only for `s ≤ 2`).
pub fn beta_infty_exact(system: &LinearSystem, domains: &[FundamentalDomainQuad]) -> Option<f64> {
    let kappas: Vec<Kappa> = domains.iter().map(kappa_exact).collect();
    let mut total = 0.0;
    for eps in sign_vectors(system.r()) {
        let vol = system.polytope.sector_volume_exact(&system.forms, &eps)?;
        let w: f64 = eps.iter().zip(&kappas).map(|(&e, k)| kappa_of(k, e).value).product();
        total += vol.to_f64()? * w;
    }
    Some(total)
}

/// Truncated singular series with its empirical decay constant and tail bracket.
#[derive(Clone, Debug)]
pub struct SingularSeries {
    pub factors: Vec<LocalFactor>,
    pub cutoff: u64,
    /// `max p²|β_p − 1|` over `p ≤ cutoff`, `p ∤ q`.
    pub c_hat: f64,
    pub partial_product: f64,
    /// `[∏(1 − Ĉ/p²), ∏(1 + Ĉ/p²)]` over `cutoff < p ≤ tail_limit`.
    pub tail: (f64, f64),
    pub tail_limit: u64,
    /// Least prime from which every `β_p` with `p ∤ q` is positive.
    pub positive_from: Option<u64>,
}

impl SingularSeries {
    pub fn bracket(&self) -> (f64, f64) {
        (self.partial_product * self.tail.0, self.partial_product * self.tail.1)
    }
}

pub const TAIL_LIMIT: u64 = 1_000_000;

/// `∏(1 ± c/p²)` over `lo < p ≤ hi`.
pub fn tail_bracket(c: f64, lo: u64, hi: u64) -> (f64, f64) {
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for p in primes_up_to(hi) {
        if p <= lo {
            continue;
        }
        let t = c / (p as f64 * p as f64);
        a += (1.0 - t).ln();
        b += (1.0 + t).ln();
    }
    (a.exp(), b.exp())
}

pub fn singular_series(sys: &PreparedSystem, cutoff: u64) -> Result<SingularSeries> {
    let mut needed = factorize(sys.system.q.max(1)).into_iter().map(|(p, _)| p).max().unwrap_or(1);
    for s in &sys.system.s_sets {
        needed = needed.max(s.iter().copied().max().unwrap_or(1));
    }
    if cutoff < needed {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} is below the largest prime {needed} in q or S")));
    }
    let primes = primes_up_to(cutoff);
    let factors = primes.par_iter().map(|&p| beta_p(p, sys)).collect::<Result<Vec<_>>>()?;
    let mut c_hat = 0.0f64;
    let mut log_prod = 0.0f64;
    let mut zero = false;
    for f in &factors {
        let v = f.value.to_f64().unwrap();
        if v == 0.0 {
            zero = true;
        } else {
            log_prod += v.ln();
        }
        if !f.divides_q {
            c_hat = c_hat.max((f.p as f64).powi(2) * (v - 1.0).abs());
        }
    }
    let mut positive_from = None;
    for f in factors.iter().rev() {
        if f.divides_q {
            continue;
        }
        if f.value.is_positive() {
            positive_from = Some(f.p);
        } else {
            break;
        }
    }
    let tail = tail_bracket(c_hat, cutoff, TAIL_LIMIT);
    Ok(SingularSeries {
        factors,
        cutoff,
        c_hat,
        partial_product: if zero { 0.0 } else { log_prod.exp() },
        tail,
        tail_limit: TAIL_LIMIT,
        positive_from,
    })
}

/// `∏_{w < p ≤ cutoff} (1 − ρ(p², 0)/p^{2n})` with tail bracket, for one form.
pub fn sieve_product(lf: &LocalForm, exclude_upto: f64, skip: &[u64], cutoff: u64) -> Result<(f64, (f64, f64))> {
    let mut log_prod = 0.0;
    let mut c_hat = 0.0f64;
    for p in primes_up_to(cutoff) {
        if (p as f64) <= exclude_upto || skip.contains(&p) {
            continue;
        }
        let t = lf.rho_p2_zero(p)? as f64 / (p as f64).powi(2 * lf.n as i32);
        log_prod += (1.0 - t).ln();
        c_hat = c_hat.max(t * (p as f64).powi(2));
    }
    Ok((log_prod.exp(), tail_bracket(c_hat, cutoff, TAIL_LIMIT)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf(spec: FieldSpec) -> LocalForm {
        LocalForm::from_spec(spec).unwrap()
    }

    #[test]
    fn rho_examples() {
        let g = lf(presets::gaussian());
        assert_eq!(g.rho(1, 0).unwrap(), 1);
        assert_eq!(g.rho(5, 1).unwrap(), 4);
        assert_eq!(g.rho(2, 1).unwrap(), 2);
        assert_eq!(g.rho(16, 1).unwrap(), 32);
        assert!(g.rho(0, 0).is_err());
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for spec in [presets::gaussian(), presets::sqrt_two(), presets::golden(), presets::eisenstein()] {
            let l = lf(spec);
            for q in [3u64, 5, 7, 9, 11, 13, 25, 27, 49, 121, 125] {
                let dist = enumerate_distribution(&l.form.compile(), q).unwrap();
                for (a, &c) in dist.iter().enumerate() {
                    assert_eq!(l.rho(q, a as i128).unwrap(), c as u128, "q = {q}, A = {a}");
                }
            }
        }
    }

    #[test]
    fn cubic_routes_match_enumeration() {
        let l = lf(presets::cube_root_two());
        for q in [2u64, 3, 4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 31, 32] {
            let dist = enumerate_distribution(&l.form.compile(), q).unwrap();
            for (a, &c) in dist.iter().enumerate() {
                assert_eq!(l.rho(q, a as i128).unwrap(), c as u128, "q = {q}, A = {a}");
            }
        }
    }

    #[test]
    fn hensel_matches_enumeration_for_bad_primes() {
        let bare = LocalForm::from_form(build(presets::gaussian()));
        for q in [2u64, 4, 8, 16, 32, 64, 3, 9, 27, 81, 5, 25] {
            let dist = enumerate_distribution(&bare.form.compile(), q).unwrap();
            for (a, &c) in dist.iter().enumerate() {
                assert_eq!(bare.rho(q, a as i128).unwrap(), c as u128, "q = {q}, A = {a}");
            }
        }
    }

    fn q(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn build(spec: FieldSpec) -> NormForm {
        crate::numberfield::build_norm_form(&spec).unwrap()
    }

    #[test]
    fn gaussian_square_zero_closed_forms() {
        let g = lf(presets::gaussian());
        assert_eq!(g.rho_p2_zero(2).unwrap(), 4);
        for p in primes_up_to(200).into_iter().skip(1) {
            let expect = if p % 4 == 1 { 3 * p * p - 2 * p } else { p * p };
            assert_eq!(g.rho_p2_zero(p).unwrap(), expect as u128, "p = {p}");
        }
    }

    #[test]
    fn lifting_examples() {
        let g = lf(presets::gaussian());
        let d1 = g.rho_lifted(5, 1, 1).unwrap();
        assert_eq!(d1, ratio(4, 5));
        assert_eq!(g.rho_lifted(5, 3, 1).unwrap(), d1);
        let direct = ratio(g.rho(25, 1).unwrap(), 25);
        assert_eq!(direct, d1);
        assert_eq!(g.rho_lifted(3, 1, 1).unwrap(), g.rho_lifted(3, 3, 1).unwrap());
        assert_eq!(g.rho_lifted(2, 5, 1).unwrap(), ratio(2, 1));
    }

    #[test]
    fn table_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.bin");
        let g = lf(presets::gaussian());
        g.table(2, 5).unwrap();
        g.table(3, 3).unwrap();
        assert_eq!(g.save_tables(&path).unwrap(), 32 + 27);
        let h = lf(presets::gaussian());
        assert_eq!(h.load_tables(&path).unwrap(), 2);
        assert_eq!(*h.table(2, 5).unwrap(), *g.table(2, 5).unwrap());
        let other = lf(presets::sqrt_two());
        assert_eq!(other.load_tables(&path).unwrap(), 0);
    }

    fn gaussian_u_system(q: u64, a: i64) -> PreparedSystem {
        PreparedSystem::new(LinearSystem::new(vec![vec![1]], vec![presets::gaussian()], vec![vec![]]).with_congruence(q, vec![a])).unwrap()
    }

    #[test]
    fn beta_p_single_form() {
        let sys = gaussian_u_system(1, 0);
        for p in [5u64, 13, 17] {
            let b = beta_p(p, &sys).unwrap();
            let expect = BigRational::one() - ratio((3 * p * p - 2 * p) as u128, (p as u128).pow(4));
            assert_eq!(b.value, expect);
        }
        // Direct average oracle at levels 3 and 4 for p = 5.
        let l = &sys.locals[0];
        for m in [3u32, 4] {
            let pm = 5u64.pow(m);
            let avg: BigRational = (0..pm).map(|u| ratio(l.rho(pm, u as i128).unwrap(), pm as u128)).sum::<BigRational>()
                / BigRational::from_integer(BigInt::from(pm));
            assert_eq!(avg, BigRational::one());
        }
    }

    #[test]
    fn beta_p_with_congruence() {
        // q = 4, a = 1, S = {2}: β_2 = (1/4)·ρ(4, 1)/4.
        let sys = PreparedSystem::new(
            LinearSystem::new(vec![vec![1]], vec![presets::gaussian()], vec![vec![2]]).with_congruence(4, vec![1]),
        )
        .unwrap();
        let b = beta_p(2, &sys).unwrap();
        assert_eq!(b.prefactor, BigRational::one());
        assert_eq!(b.value, ratio(8, 4) / BigRational::from_integer(BigInt::from(4)));
        assert!(b.divides_q);
    }

    #[test]
    fn beta_p_non_full_rank_matches_brute_force() {
        // f1 = u1, f2 = u1 + 3u2 over Q(i) × Q(i): rank 1 mod 3.
        let sys = PreparedSystem::new(LinearSystem::new(
            vec![vec![1, 0], vec![1, 3]],
            vec![presets::gaussian(), presets::gaussian()],
            vec![vec![], vec![]],
        )
        .with_polytope(Polytope {
            s: 2,
            rows: vec![vec![q(1), q(3)], vec![q(-1), q(-3)]],
            rhs: vec![q(1), q(1)],
        }))
        .unwrap();
        let b = beta_p(3, &sys).unwrap();
        let l = &sys.locals[0];
        let m = 3u32;
        let pm = 27u64;
        let mut sum = BigRational::zero();
        for u1 in 0..pm {
            for u2 in 0..pm {
                let t1 = u1 as i128;
                let t2 = (u1 + 3 * u2) as i128;
                sum += ratio(l.rho(pm, t1).unwrap(), pm as u128) * ratio(l.rho(pm, t2).unwrap(), pm as u128);
            }
        }
        let _ = m;
        let avg = sum / BigRational::from_integer(BigInt::from(pm * pm));
        let pref = l.sieve_factor(3).unwrap();
        assert_eq!(b.value, &pref * &pref * avg);
    }

    #[test]
    fn hypothesis_violation_detected() {
        let sys = LinearSystem::new(vec![vec![1]], vec![presets::gaussian()], vec![vec![2]]).with_congruence(4, vec![4]);
        assert!(matches!(sys.validate(), Err(Error::Hypothesis(_))));
        let prop = LinearSystem::new(vec![vec![1, 2], vec![2, 4]], vec![presets::gaussian(), presets::gaussian()], vec![vec![], vec![]]);
        assert!(matches!(prop.validate(), Err(Error::Hypothesis(_))));
        let big = LinearSystem::new(vec![vec![1, 1]], vec![presets::gaussian()], vec![vec![]]);
        assert!(matches!(big.validate(), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn sector_volumes() {
        let sys = LinearSystem::new(vec![vec![1, 0]], vec![presets::gaussian()], vec![vec![]]);
        let two = BigRational::from_integer(BigInt::from(2));
        assert_eq!(sys.polytope.sector_volume_exact(&sys.forms, &[1]).unwrap(), two);
        assert_eq!(sys.polytope.sector_volume_exact(&sys.forms, &[-1]).unwrap(), two);
        let k = presets::gaussian();
        let d = FundamentalDomainQuad::from_spec(k).unwrap();
        let b = beta_infty(&sys, std::slice::from_ref(&d), 200_000, 7).unwrap();
        assert!((b.sectors[0].volume.value - 2.0).abs() < 4.0 * b.sectors[0].volume.std_error + 1e-9);
        let exact = beta_infty_exact(&sys, &[d]).unwrap();
        assert!((exact - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((b.estimate - exact).abs() < 4.0 * b.std_error);
    }

    #[test]
    fn kappa_matches_closed_forms() {
        for spec in [presets::gaussian(), presets::sqrt_two(), presets::golden(), presets::eisenstein()] {
            let d = FundamentalDomainQuad::from_spec(spec).unwrap();
            let k = kappa_monte_carlo(&d, 400_000, 11).unwrap();
            let e = kappa_exact(&d);
            assert!((k.plus.value - e.plus.value).abs() <= 4.0 * k.plus.std_error + 1e-12, "{k:?} vs {e:?}");
            assert!((k.minus.value - e.minus.value).abs() <= 4.0 * k.minus.std_error + 1e-12, "{k:?} vs {e:?}");
        }
    }

    #[test]
    fn system_json_round_trip() {
        let text = r#"{"s": 2, "forms": [[1, 0], [0, 1]], "q": 4, "a": [1, 2],
            "polytope": {"rows": [["1", "1"]], "rhs": ["3/2"]},
            "fields": ["gaussian", "sqrt2"], "S": [[2], [2]]}"#;
        let sys = LinearSystem::from_json(text).unwrap();
        assert_eq!(sys.polytope.rhs[0], BigRational::new(BigInt::from(3), BigInt::from(2)));
        let again = LinearSystem::from_json(&sys.to_json_value().to_string()).unwrap();
        assert_eq!(again.forms, sys.forms);
        assert_eq!(again.fields, sys.fields);
        assert_eq!(again.polytope, sys.polytope);
    }

    #[test]
    fn series_for_gaussian() {
        let sys = gaussian_u_system(1, 0);
        let ser = singular_series(&sys, 100).unwrap();
        assert!(ser.c_hat.is_finite() && ser.c_hat <= 3.0);
        assert!(ser.factors.iter().all(|f| f.value.is_positive()));
        assert!(ser.tail.0 < 1.0 && ser.tail.1 > 1.0);
        assert_eq!(ser.positive_from, Some(2));
    }
}
