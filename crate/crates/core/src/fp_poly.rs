//! Univariate polynomials over a prime field F_p and distinct-degree
//! factorisation, enough to read off the splitting type of a prime.

use crate::arith::{inv_mod, mul_mod};

/// Coefficients low degree first, normalised (no trailing zeros).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpPoly {
    p: u64,
    c: Vec<u64>,
}

impl FpPoly {
    pub fn new(p: u64, coeffs: &[i128]) -> Self {
        let c = coeffs.iter().map(|&a| a.rem_euclid(p as i128) as u64).collect();
        let mut out = Self { p, c };
        out.trim();
        out
    }

    fn trim(&mut self) {
        while self.c.last() == Some(&0) {
            self.c.pop();
        }
    }

    pub fn degree(&self) -> Option<usize> {
        (!self.c.is_empty()).then(|| self.c.len() - 1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    fn x(p: u64) -> Self {
        Self { p, c: vec![0, 1] }
    }

    fn sub(&self, other: &Self) -> Self {
        let n = self.c.len().max(other.c.len());
        let p = self.p;
        let c = (0..n)
            .map(|i| {
                let a = self.c.get(i).copied().unwrap_or(0);
                let b = other.c.get(i).copied().unwrap_or(0);
                (a + p - b) % p
            })
            .collect();
        let mut out = Self { p, c };
        out.trim();
        out
    }

    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self { p: self.p, c: vec![] };
        }
        let p = self.p;
        let mut c = vec![0u64; self.c.len() + other.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in other.c.iter().enumerate() {
                c[i + j] = (c[i + j] + mul_mod(a, b, p)) % p;
            }
        }
        let mut out = Self { p, c };
        out.trim();
        out
    }

    /// (quotient, remainder)
    fn divrem(&self, d: &Self) -> (Self, Self) {
        let p = self.p;
        let dd = d.degree().expect("division by zero polynomial");
        let lead_inv = inv_mod(d.c[dd] as i128, p as i128).expect("p prime") as u64;
        let mut r = self.c.clone();
        let mut q = vec![0u64; self.c.len().saturating_sub(dd).max(1)];
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1 - dd;
            let coef = mul_mod(*r.last().unwrap(), lead_inv, p);
            q[k] = coef;
            for (i, &dc) in d.c.iter().enumerate() {
                r[k + i] = (r[k + i] + p - mul_mod(coef, dc, p)) % p;
            }
            while r.last() == Some(&0) {
                r.pop();
            }
        }
        let mut qq = Self { p, c: q };
        qq.trim();
        let mut rr = Self { p, c: r };
        rr.trim();
        (qq, rr)
    }

    fn rem(&self, d: &Self) -> Self {
        self.divrem(d).1
    }

    fn monic(&self) -> Self {
        match self.degree() {
            None => self.clone(),
            Some(d) => {
                let inv = inv_mod(self.c[d] as i128, self.p as i128).unwrap() as u64;
                Self { p: self.p, c: self.c.iter().map(|&a| mul_mod(a, inv, self.p)).collect() }
            }
        }
    }

    fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// base^e mod self
    fn powmod(&self, base: &Self, mut e: u64) -> Self {
        let mut acc = Self { p: self.p, c: vec![1] }.rem(self);
        let mut b = base.rem(self);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b).rem(self);
            }
            b = b.mul(&b).rem(self);
            e >>= 1;
        }
        acc
    }
}

/// Degrees of the irreducible factors of a squarefree `f` over F_p, sorted.
///
/// Returns `None` when `f` is not squarefree modulo `p` (gcd with its
/// derivative is nontrivial) or when the reduction drops degree.
pub fn factor_degrees(f: &[i128], p: u64) -> Option<Vec<usize>> {
    let poly = FpPoly::new(p, f);
    let n = poly.degree()?;
    if n + 1 != f.len() {
        return None;
    }
    let deriv: Vec<i128> = f.iter().enumerate().skip(1).map(|(i, &a)| a * i as i128).collect();
    let dpoly = FpPoly::new(p, &deriv);
    if dpoly.is_zero() || poly.gcd(&dpoly).degree() != Some(0) {
        return None;
    }
    let mut rest = poly.monic();
    let x = FpPoly::x(p);
    let mut h = x.clone();
    let mut degrees = Vec::new();
    let mut d = 0usize;
    while let Some(deg) = rest.degree() {
        if deg == 0 {
            break;
        }
        d += 1;
        if 2 * d > deg {
            degrees.push(deg);
            break;
        }
        h = rest.powmod(&h, p);
        let g = rest.gcd(&h.sub(&x));
        let gd = g.degree().unwrap_or(0);
        if gd > 0 {
            for _ in 0..gd / d {
                degrees.push(d);
            }
            rest = rest.divrem(&g).0;
            h = h.rem(&rest);
        }
    }
    degrees.sort_unstable();
    Some(degrees)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_splitting() {
        // x^2 + 1
        let f = [1i128, 0, 1];
        assert_eq!(factor_degrees(&f, 5), Some(vec![1, 1]));
        assert_eq!(factor_degrees(&f, 7), Some(vec![2]));
        assert_eq!(factor_degrees(&f, 2), None);
    }

    #[test]
    fn cube_root_two() {
        // x^3 - 2: mod 5 has one root (3) and an irreducible quadratic; mod 31 splits completely.
        let f = [-2i128, 0, 0, 1];
        assert_eq!(factor_degrees(&f, 5), Some(vec![1, 2]));
        assert_eq!(factor_degrees(&f, 31), Some(vec![1, 1, 1]));
        assert_eq!(factor_degrees(&f, 7), Some(vec![3]));
    }

    #[test]
    fn matches_root_count_brute_force() {
        let f = [3i128, -1, 4, 1, 1]; // x^4 + x^3 + 4x^2 - x + 3
        for p in [11u64, 13, 17, 19, 23, 29, 31, 37] {
            if let Some(deg) = factor_degrees(&f, p) {
                let roots = (0..p as i128)
                    .filter(|&x| f.iter().rev().fold(0i128, |acc, &c| (acc * x + c).rem_euclid(p as i128)) == 0)
                    .count();
                assert_eq!(deg.iter().filter(|&&d| d == 1).count(), roots, "p = {p}");
                assert_eq!(deg.iter().sum::<usize>(), 4);
            }
        }
    }
}
