use groupauth::poly::{interpolate, Polynomial, SharePoint};
use groupauth::shamir::{generate_shares, reconstruct_secret, DealerConfig};
use groupauth::{FieldParams, DEFAULT_MODULUS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn big() -> FieldParams {
    FieldParams::new(DEFAULT_MODULUS).unwrap()
}

proptest! {
    #[test]
    fn field_ops_agree_with_u128(a in 0..DEFAULT_MODULUS, b in 0..DEFAULT_MODULUS) {
        let f = big();
        let p = DEFAULT_MODULUS as u128;
        let (x, y) = (f.element(a), f.element(b));
        prop_assert_eq!((x + y).value() as u128, (a as u128 + b as u128) % p);
        prop_assert_eq!((x * y).value() as u128, (a as u128 * b as u128) % p);
        prop_assert_eq!(((x - y) + y).value(), a);
        if a != 0 {
            prop_assert_eq!((x * x.inv().unwrap()).value(), 1);
        }
    }

    #[test]
    fn interpolation_round_trips(coeffs in prop::collection::vec(0..DEFAULT_MODULUS, 1..8), start in 1u64..1_000_000) {
        let f = big();
        let poly = Polynomial::from_u64s(f, &coeffs);
        let points: Vec<SharePoint> = (0..coeffs.len() as u64)
            .map(|i| {
                let x = f.element(start + i);
                SharePoint::new(x, poly.eval(x).unwrap()).unwrap()
            })
            .collect();
        prop_assert_eq!(interpolate(&points).unwrap(), poly);
    }

    #[test]
    fn any_t_shares_reconstruct(seed in any::<u64>(), t in 2usize..6, extra in 1usize..5, skip in 0usize..4) {
        let cfg = DealerConfig::new(t, t + extra, big()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let secret = big().random_element(&mut rng);
        let set = generate_shares(&cfg, secret, &mut rng).unwrap();
        let start = skip.min(extra);
        prop_assert_eq!(reconstruct_secret(&set.shares[start..start + t], t).unwrap(), secret);
    }
}
