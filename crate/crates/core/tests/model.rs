mod common;

use misalloc::model::DemandCurve;
use proptest::prelude::*;
use rand::Rng;

fn curve(seed: u64) -> (DemandCurve, f64) {
    common::random_demand(&mut common::rng(seed), 0.8)
}

#[test]
fn inverse_demand_is_nonincreasing() {
    let mut rng = common::rng(40);
    for k in 0..10_000u64 {
        let (c, q_max) = curve(k);
        let a = rng.gen_range(0.0..q_max);
        let b = rng.gen_range(a..=q_max);
        assert!(c.eval(a).unwrap() >= c.eval(b).unwrap(), "{c:?} at {a}, {b}");
    }
}

#[test]
fn hill_surplus_matches_arctan() {
    let mut rng = common::rng(41);
    for _ in 0..100 {
        let (m, s) = (rng.gen_range(1.0..5.0), rng.gen_range(0.3..3.0));
        let c = DemandCurve::hill(m, s, 2.0).unwrap();
        let a = rng.gen_range(0.0..5.0);
        let b = rng.gen_range(0.0..5.0);
        let exact = m * s * ((b / s).atan() - (a / s).atan());
        assert!((c.gross_surplus(a, b).unwrap() - exact).abs() <= 1e-8);
    }
}

proptest! {
    #[test]
    fn generalized_inverse_recovers_price(seed in any::<u64>(), t in 0.01f64..0.99) {
        let (c, q_max) = curve(seed);
        let lo = c.eval(q_max).unwrap();
        let hi = c.choke_price();
        let p = lo + t * (hi - lo);
        let q = c.generalized_inverse(p);
        prop_assume!(q > 0.0 && q < q_max);
        prop_assert!((c.eval(q).unwrap() - p).abs() <= 1e-8);
        prop_assert!(c.generalized_inverse(hi + 0.1) == 0.0);
    }

    #[test]
    fn surplus_is_additive(seed in any::<u64>(), x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
        let (c, q_max) = curve(seed);
        let (a, b, d) = (x * q_max, y * q_max, z * q_max);
        let whole = c.gross_surplus(a, d).unwrap();
        let split = c.gross_surplus(a, b).unwrap() + c.gross_surplus(b, d).unwrap();
        prop_assert!((whole - split).abs() <= 1e-9);
        prop_assert!(c.gross_surplus(a, a).unwrap() == 0.0);
    }

    #[test]
    fn consumer_surplus_nets_out_the_price(seed in any::<u64>(), x in 0.0f64..1.0, p in 0.0f64..2.0) {
        let (c, q_max) = curve(seed);
        let q = x * q_max;
        let cs = c.consumer_surplus(q, p).unwrap();
        prop_assert!((cs - (c.gross_surplus(0.0, q).unwrap() - p * q)).abs() <= 1e-12);
    }

    #[test]
    fn curves_round_trip_through_json(seed in any::<u64>()) {
        let (c, _) = curve(seed);
        let back: DemandCurve = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn out_of_domain_quantities_are_errors() {
    let c = DemandCurve::piecewise(vec![(0.0, 3.0), (1.0, 1.0)]).unwrap();
    assert!(c.eval(1.5).is_err());
    assert!(c.eval(-0.1).is_err());
    assert!(c.gross_surplus(0.0, 2.0).is_err());
    assert!((c.eval(0.5).unwrap() - 2.0).abs() < 1e-15);
    assert!((c.generalized_inverse(2.0) - 0.5).abs() < 1e-12);
}
