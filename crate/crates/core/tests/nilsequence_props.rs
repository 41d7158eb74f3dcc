use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use normsieve::nilsequence::{
    character_average, discrepancy, distance, equidistribution_certificate, heisenberg_inv, heisenberg_mul,
    reduce_heisenberg, reduce_heisenberg_exact, slice_to_one_param, subsequence_affine, test_suite, Certificate, Coef,
    DiscrepancyConfig, ManifoldKind, Nilmanifold, PolySequence, RPoly,
};

fn rational() -> impl Strategy<Value = BigRational> {
    (-10_000i64..10_000, 1i64..500).prop_map(|(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
}

proptest! {
    #[test]
    fn heisenberg_reduction_is_a_right_coset_move(g0 in rational(), g1 in rational(), g2 in rational()) {
        let g = [g0, g1, g2];
        let (r, gamma) = reduce_heisenberg_exact(&g);
        let zero = BigRational::zero();
        let one = BigRational::from_integer(BigInt::from(1));
        prop_assert!(r.iter().all(|c| *c >= zero && *c < one), "{:?}", r);
        let gamma_q: [BigRational; 3] = gamma.map(BigRational::from_integer);
        prop_assert_eq!(heisenberg_mul(&r, &heisenberg_inv(&gamma_q)), g.clone());
        let (rf, _) = reduce_heisenberg(g.clone().map(|c| c.to_f64().unwrap()));
        for (a, b) in rf.iter().zip(&r) {
            let b = b.to_f64().unwrap();
            prop_assert!((a - b).abs() < 1e-9 || (a - b).abs() > 1.0 - 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn smoothness_terms_scale_exactly(c1 in -5.0f64..5.0, c2 in -5.0f64..5.0, c3 in -5.0f64..5.0, n in 1u64..5000) {
        let seq = PolySequence::torus(vec![vec![Coef::Real(0.5), Coef::Real(c1), Coef::Real(c2), Coef::Real(c3)]]).unwrap();
        let p: &RPoly = &seq.coords[0];
        let base = p.smoothness_terms(&[n]);
        let doubled = p.smoothness_terms(&[2 * n]);
        prop_assert_eq!(base.len(), doubled.len());
        for ((e, v), (e2, v2)) in base.iter().zip(&doubled) {
            prop_assert_eq!(e, e2);
            prop_assert_eq!(*v2, v * 2f64.powi(e.iter().sum::<u32>() as i32));
        }
    }
}

#[test]
fn test_functions_are_periodic_and_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for manifold in [Nilmanifold::torus(2, 1), Nilmanifold::heisenberg()] {
        let kind = manifold.kind;
        let dim = if kind == ManifoldKind::Heisenberg { 3 } else { 2 };
        for f in test_suite(&manifold) {
            for _ in 0..2000 {
                let p: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                // Identified boundary points.
                let mut a = p.clone();
                a[0] = 0.0;
                let mut b = a.clone();
                b[0] = 1.0;
                assert!((f.eval(&a) - f.eval(&b)).abs() < 1e-12, "{}", f.name);
                let mut a = p.clone();
                a[1] = 1.0;
                let mut b = p.clone();
                b[1] = 0.0;
                if kind == ManifoldKind::Heisenberg {
                    b[2] = (p[2] - p[0]).rem_euclid(1.0);
                }
                assert!((f.eval(&a) - f.eval(&b)).abs() < 1e-9, "{}", f.name);

                let q: Vec<f64> = p.iter().map(|v| (v + rng.gen_range(-0.05..0.05f64)).rem_euclid(1.0)).collect();
                let d = distance(kind, &p, &q);
                if d > 1e-9 {
                    assert!((f.eval(&p) - f.eval(&q)).abs() <= f.lipschitz * d * (1.0 + 1e-9), "{}", f.name);
                }
            }
        }
    }
}

#[test]
fn witnesses_obstruct_equidistribution() {
    let cfg = DiscrepancyConfig::default();
    let mut witnesses = 0;
    for q in 2i64..=12 {
        for a in 1..q {
            for b in [0i64, 1] {
                let seq = PolySequence::torus(vec![vec![Coef::rational(0, 1), Coef::rational(a, q), Coef::rational(b, 2 * q)]]).unwrap();
                let cert = equidistribution_certificate(&seq, &[2000], 0.02, None, &cfg).unwrap();
                let r = cert.report();
                assert!((0.0..=2.0).contains(&r.delta_estimate));
                if let Certificate::Witness { witness, report } = &cert {
                    assert_eq!(report.witness.as_ref(), Some(witness));
                    if witness.norm <= 0.1 {
                        witnesses += 1;
                        let avg = character_average(&seq, &witness.eta, &[2000]);
                        assert!(avg > 0.3, "a/q = {a}/{q}, eta {:?}: {avg}", witness.eta);
                    }
                }
            }
        }
    }
    assert!(witnesses > 50, "{witnesses}");
}

// Subsequences lose a power of δ; allow δ up to δ_parent^{1/3}.
const LOSS_EXPONENT: f64 = 1.0 / 3.0;

#[test]
fn most_dilated_subsequences_stay_equidistributed() {
    let cfg = DiscrepancyConfig::default();
    let seq = PolySequence::torus(vec![vec![Coef::Real(0.0), Coef::Real(std::f64::consts::SQRT_2)]]).unwrap();
    let n = 100_000;
    let parent = discrepancy(&seq, &[n], &cfg).unwrap().delta_estimate;
    let limit = parent.powf(LOSS_EXPONENT);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in [10u64, 20, 40] {
        // W(N) = 16 at this scale, so coprime to W means odd.
        let ds: Vec<u64> = (k..2 * k).filter(|d| d % 2 == 1).collect();
        let bad = ds
            .iter()
            .filter(|&&d| {
                let offset = rng.gen_range(0..(d * d) as i64);
                let sub = subsequence_affine(&seq, d, &[offset]).unwrap();
                discrepancy(&sub, &[n], &cfg).unwrap().delta_estimate > limit
            })
            .count();
        assert!(bad as f64 <= 0.05 * ds.len() as f64, "K = {k}: {bad}/{} above {limit:e}", ds.len());
    }
}

#[test]
fn most_slices_stay_equidistributed() {
    let cfg = DiscrepancyConfig::default();
    let seq = PolySequence::from_json(
        r#"{"kind":"torus","dim":1,"params":2,"coords":[{"1,0":1.4142135623730951,"0,1":1.7320508075688772,"1,1":2.23606797749979}]}"#,
    )
    .unwrap();
    let parent = discrepancy(&seq, &[1000, 1000], &cfg).unwrap().delta_estimate;
    let limit = parent.powf(LOSS_EXPONENT);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let samples = 200;
    let bad = (0..samples)
        .filter(|_| {
            let slice = slice_to_one_param(&seq, &[rng.gen_range(0..1000)]).unwrap();
            discrepancy(&slice, &[1000], &cfg).unwrap().delta_estimate > limit
        })
        .count();
    assert!(bad as f64 <= 0.05 * samples as f64, "{bad}/{samples} slices above {limit:e}");
}
