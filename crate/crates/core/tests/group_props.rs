use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sealedbid_core::groups::{Bls12Suite, MockSuite, PairingSuite};

fn point<S: PairingSuite>(s: &S, seed: u64) -> S::G1 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    s.g1_mul(&s.random_nonzero_scalar(&mut rng), &s.g1_generator())
}

fn group_laws<S: PairingSuite>(s: &S, seeds: (u64, u64, u64)) {
    let (a, b, c) = (point(s, seeds.0), point(s, seeds.1), point(s, seeds.2));
    assert_eq!(s.g1_add(&s.g1_add(&a, &b), &c), s.g1_add(&a, &s.g1_add(&b, &c)));
    assert_eq!(s.g1_add(&a, &b), s.g1_add(&b, &a));
    assert_eq!(s.g1_add(&a, &s.g1_identity()), a);
    let q = s.scalar_from_biguint(&s.order());
    assert!(s.scalar_is_zero(&q));
    // q·P computed as (q-1)·P + P, since q itself reduces to zero.
    let q_minus_one = s.scalar_from_biguint(&(s.order() - BigUint::from(1u8)));
    assert_eq!(s.g1_add(&s.g1_mul(&q_minus_one, &a), &a), s.g1_identity());
}

fn round_trip<S: PairingSuite>(s: &S, seed: u64) {
    let p = point(s, seed);
    let enc = s.g1_encode(&p);
    assert_eq!(enc.len(), s.g1_encoding_len());
    assert_eq!(s.g1_decode(&enc).unwrap(), p);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5a5a);
    let p2 = s.g2_mul(&s.random_nonzero_scalar(&mut rng), &s.g2_generator());
    assert_eq!(s.g2_decode(&s.g2_encode(&p2)).unwrap(), p2);
    let k = s.scalar_from_u64(seed);
    assert_eq!(s.scalar_decode(&s.scalar_encode(&k)).unwrap(), k);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mock_group_laws(seeds in any::<(u64, u64, u64)>()) {
        group_laws(&MockSuite::new(1_000_003).unwrap(), seeds);
    }

    #[test]
    fn mock_encoding_round_trip(seed in any::<u64>()) {
        round_trip(&MockSuite::new((1 << 61) - 1).unwrap(), seed);
    }

    #[test]
    fn production_group_laws(seeds in any::<(u64, u64, u64)>()) {
        group_laws(&Bls12Suite::new(), seeds);
    }

    #[test]
    fn production_encoding_round_trip(seed in any::<u64>()) {
        round_trip(&Bls12Suite::new(), seed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn production_bilinearity(a in 1u64.., b in 1u64..) {
        let s = Bls12Suite::new();
        let (sa, sb) = (s.scalar_from_u64(a), s.scalar_from_u64(b));
        let lhs = s.pairing(&s.g1_mul(&sa, &s.g1_generator()), &s.g2_mul(&sb, &s.g2_generator()));
        let base = s.pairing(&s.g1_generator(), &s.g2_generator());
        prop_assert_eq!(lhs, s.gt_pow(&base, &s.scalar_mul(&sa, &sb)));
    }
}

#[test]
fn pairing_is_non_degenerate_on_both_backends() {
    let p = Bls12Suite::new();
    assert_ne!(p.pairing(&p.g1_generator(), &p.g2_generator()), p.gt_identity());
    let m = MockSuite::new(101).unwrap();
    assert_ne!(m.pairing(&m.g1_generator(), &m.g2_generator()), m.gt_identity());
}
