use std::collections::BTreeSet;

use proptest::prelude::*;

use normsieve::numberfield::{presets, NumberField};
use normsieve::repfn::{count_r, count_r_star, ideal_count_oracle, FundamentalDomainQuad, RepCache, RepTable};

fn mobius(mut n: u64) -> i64 {
    let mut mu = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn r_matches_ideal_counts_on_sqrt_minus_two() {
    let field = NumberField::new(presets::sqrt_minus_two()).unwrap();
    let dom = FundamentalDomainQuad::new(&field).unwrap();
    for m in 1..=10_000i64 {
        assert_eq!(count_r(m, &dom).unwrap(), ideal_count_oracle(m as u64, &field).unwrap(), "m = {m}");
    }
}

#[test]
fn r_vanishes_at_zero_and_on_negatives_for_imaginary_fields() {
    let dom = FundamentalDomainQuad::from_spec(presets::gaussian()).unwrap();
    assert_eq!(count_r(0, &dom).unwrap(), 0);
    assert!((1..200).all(|m| count_r(-m, &dom).unwrap() == 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn r_star_is_the_mobius_sieve_of_r(m in 1i64..200_000, s in prop::sample::subsequence(vec![2u64, 3, 5, 7], 0..=4), which in 0usize..3) {
        let spec = [presets::gaussian(), presets::sqrt_two(), presets::eisenstein()][which].clone();
        let dom = FundamentalDomainQuad::from_spec(spec).unwrap();
        let rad_s: u64 = s.iter().product();
        let mut sieve = 0i64;
        let mut d = 1u64;
        while d * d <= m as u64 {
            if (m as u64).is_multiple_of(d * d) && gcd(d, rad_s) == 1 {
                sieve += mobius(d);
            }
            d += 1;
        }
        prop_assert!(sieve == 0 || sieve == 1);
        let r = count_r(m, &dom).unwrap();
        prop_assert_eq!(count_r_star(m, &s, &dom).unwrap() as i64, sieve * r as i64);
        if which == 1 {
            prop_assert_eq!(count_r_star(-m, &s, &dom).unwrap() as i64, sieve * count_r(-m, &dom).unwrap() as i64);
        }
    }
}

#[test]
fn sqrt_two_orbits_have_exactly_one_counted_representative() {
    let dom = FundamentalDomainQuad::from_spec(presets::sqrt_two()).unwrap();
    // (3 + 2√2)^{±1} on coordinates in the basis {1, √2}.
    let up = |(x, y): (i128, i128)| (3 * x + 4 * y, 2 * x + 3 * y);
    let down = |(x, y): (i128, i128)| (3 * x - 4 * y, -2 * x + 3 * y);
    let bound = 600i128;
    for m in -200i128..=200 {
        if m == 0 {
            continue;
        }
        let counted: BTreeSet<(i64, i64)> = dom.representatives(m as i64).into_iter().collect();
        assert_eq!(counted.len() as u64, count_r(m as i64, &dom).unwrap());
        let mut hit = BTreeSet::new();
        for x in -bound..=bound {
            for y in -bound..=bound {
                if x * x - 2 * y * y != m {
                    continue;
                }
                let mut in_window = Vec::new();
                for sign in [1i128, -1] {
                    let mut a = (sign * x, sign * y);
                    for _ in 0..8 {
                        a = down(a);
                    }
                    for _ in 0..17 {
                        if dom.in_window(a.0 as i64, a.1 as i64) {
                            in_window.push((a.0 as i64, a.1 as i64));
                        }
                        a = up(a);
                    }
                }
                assert_eq!(in_window.len(), 1, "m = {m}, ({x}, {y}) -> {in_window:?}");
                assert!(counted.contains(&in_window[0]), "m = {m}: {:?} not counted", in_window[0]);
                hit.insert(in_window[0]);
            }
        }
        assert_eq!(hit, counted, "m = {m}");
    }
}

#[test]
fn summatory_r_approaches_pi_over_four() {
    let dom = FundamentalDomainQuad::from_spec(presets::gaussian()).unwrap();
    let table = RepTable::build(&dom, 200_000);
    let mut acc = 0u64;
    let mut errs = Vec::new();
    for m in 1..=200_000i64 {
        acc += table.get(m);
        if [1_000, 10_000, 200_000].contains(&m) {
            errs.push((acc as f64 / m as f64 - std::f64::consts::FRAC_PI_4).abs());
        }
    }
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 5e-3, "{errs:?}");
}

#[test]
fn cache_agrees_with_recomputation_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.cache");
    let dom = FundamentalDomainQuad::from_spec(presets::sqrt_two()).unwrap();
    let ms: Vec<i64> = (-300..=300).step_by(7).filter(|&m| m != 0).collect();
    let first = RepCache::open(&path, &dom.field_id);
    for &m in &ms {
        assert_eq!(first.get_r(m, &dom).unwrap(), count_r(m, &dom).unwrap());
        assert_eq!(first.get_r_star(m, &[2], &dom).unwrap(), count_r_star(m, &[2], &dom).unwrap());
    }
    first.flush().unwrap();
    drop(first);
    let again = RepCache::open(&path, &dom.field_id);
    for &m in &ms {
        assert_eq!(again.get_r(m, &dom).unwrap(), count_r(m, &dom).unwrap());
    }
    // A different field id never reads these entries.
    let other = FundamentalDomainQuad::from_spec(presets::gaussian()).unwrap();
    let foreign = RepCache::open(&path, &other.field_id);
    assert_eq!(foreign.get_r(5, &other).unwrap(), 2);
}
