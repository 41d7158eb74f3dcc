//! Small-integer number theory: sieving, factorisation, valuations.
//!
//! Factorisation is deterministic trial division up to [`TRIAL_LIMIT`] followed
//! by Pollard's rho (Brent variant) on whatever cofactor remains. Primality of
//! the cofactor is decided with Miller–Rabin on a base set that is exact for
//! every 64-bit input.

use num_integer::Integer;

pub const TRIAL_LIMIT: u64 = 1_000_000;

/// All primes `<= limit`.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Sieve of the Möbius function on `0..=limit` (entry 0 is 0).
pub fn mobius_sieve(limit: usize) -> Vec<i8> {
    let mut mu = vec![1i8; limit + 1];
    if limit == 0 {
        mu[0] = 0;
        return mu;
    }
    mu[0] = 0;
    let mut composite = vec![false; limit + 1];
    for p in 2..=limit {
        if composite[p] {
            continue;
        }
        let mut j = p;
        while j <= limit {
            if j > p {
                composite[j] = true;
            }
            mu[j] = -mu[j];
            j += p;
        }
        let sq = p.saturating_mul(p);
        let mut j = sq;
        while j <= limit {
            mu[j] = 0;
            j += sq;
        }
    }
    mu
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_brent(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut ys = 2u64;
        let mut r = 1u64;
        let m = 128u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += m;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// Prime factorisation of `n >= 1` as sorted `(p, e)` pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    assert!(n >= 1, "factorize(0)");
    let mut out: Vec<(u64, u32)> = Vec::new();
    let push = |p: u64, out: &mut Vec<(u64, u32)>| match out.iter_mut().find(|(q, _)| *q == p) {
        Some(slot) => slot.1 += 1,
        None => out.push((p, 1)),
    };
    let mut d = 2u64;
    while d <= TRIAL_LIMIT && d.saturating_mul(d) <= n {
        while n.is_multiple_of(d) {
            push(d, &mut out);
            n /= d;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        let mut rest = Vec::new();
        split_into(n, &mut rest);
        for p in rest {
            push(p, &mut out);
        }
    }
    out.sort_unstable();
    out
}

/// p-adic valuation of a nonzero integer; `None` for zero (v_p(0) = ∞).
pub fn valuation(n: i128, p: u64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let p = p as i128;
    let mut n = n;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Some(v)
}

/// Valuation of `a` modulo `p^m`, capped at `m` (so `0 mod p^m` maps to `m`).
pub fn valuation_capped(a: u64, p: u64, m: u32) -> u32 {
    if a == 0 {
        return m;
    }
    let mut a = a;
    let mut v = 0;
    while v < m && a.is_multiple_of(p) {
        a /= p;
        v += 1;
    }
    v
}

pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square_u128(n: u128) -> Option<u128> {
    let r = isqrt_u128(n);
    (r * r == n).then_some(r)
}

pub fn upow(base: u64, exp: u32) -> u128 {
    (base as u128).pow(exp)
}

/// `p^e`, checked against u64 overflow.
pub fn checked_pow_u64(p: u64, e: u32) -> Option<u64> {
    p.checked_pow(e)
}

pub fn rem_euclid_u(a: i128, m: u64) -> u64 {
    a.rem_euclid(m as i128) as u64
}

/// True when every prime factor of `n` is at most `bound`.
pub fn is_smooth(n: u64, bound: f64) -> bool {
    n >= 1 && factorize(n).iter().all(|&(p, _)| (p as f64) <= bound)
}

/// Extended gcd over i128: returns (g, x, y) with ax + by = g >= 0.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        let q = a.div_euclid(b);
        (g, y, x - q * y)
    }
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i128, m: i128) -> Option<i128> {
    let (g, x, _) = ext_gcd(a.rem_euclid(m), m);
    (g == 1).then(|| x.rem_euclid(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_and_primality_agree() {
        let ps = primes_up_to(10_000);
        assert_eq!(ps.len(), 1229);
        for n in 0..10_000u64 {
            assert_eq!(is_prime(n), ps.binary_search(&n).is_ok(), "n = {n}");
        }
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007u64 * 998_244_353));
    }

    #[test]
    fn factorize_products() {
        assert_eq!(factorize(1), vec![]);
        assert_eq!(factorize(12), vec![(2, 2), (3, 1)]);
        let big = 999_983u64 * 1_000_003;
        assert_eq!(factorize(big), vec![(999_983, 1), (1_000_003, 1)]);
        let n = 2u64.pow(5) * 3 * 1_000_000_007;
        assert_eq!(factorize(n), vec![(2, 5), (3, 1), (1_000_000_007, 1)]);
    }

    #[test]
    fn mobius_matches_factorisation() {
        let mu = mobius_sieve(2000);
        for n in 1..=2000u64 {
            let f = factorize(n);
            let expect = if f.iter().any(|&(_, e)| e > 1) {
                0
            } else if f.len().is_multiple_of(2) {
                1
            } else {
                -1
            };
            assert_eq!(mu[n as usize], expect, "n = {n}");
        }
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(0, 2), None);
        assert_eq!(valuation(-18, 3), Some(2));
        assert_eq!(valuation_capped(0, 5, 4), 4);
        assert_eq!(valuation_capped(50, 5, 4), 2);
    }

    #[test]
    fn modular_inverse() {
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(6, 9), None);
        assert_eq!(inv_mod(-3, 7), Some(2));
    }
}
