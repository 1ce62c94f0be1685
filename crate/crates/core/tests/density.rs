use logconvex::density::DensityError;
use logconvex::Density;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn eval_examples() {
    assert_eq!(Density::quadratic(1.0).eval(1.0, 1).unwrap(), 2.0);
    assert_eq!(Density::constant(0.0).eval(3.7, 1).unwrap(), 0.0);
    let p = Density::plateau(2.0, 1.0);
    assert_eq!(p.eval(1.5, 0).unwrap(), 0.0);
    assert_eq!(p.eval(1.5, 2).unwrap(), 0.0);
    assert_eq!(p.eval(3.0, 0).unwrap(), 1.0);
    assert_eq!(p.eval(3.0, 2).unwrap(), 6.0);
    assert!(matches!(p.eval(-1.0, 0), Err(DensityError::NegativeRadius(_))));
    assert!(matches!(p.eval(1.0, 4), Err(DensityError::Order(4))));
    let c = Density::cosh(1.0);
    assert!((c.eval(1.0, 0).unwrap() - (1f64.cosh() - 1.0)).abs() < 1e-15);
    assert_eq!(c.eval(0.0, 1).unwrap(), 0.0);
}

#[test]
fn plateau_radius_examples() {
    assert_eq!(Density::quadratic(1.0).plateau_radius().value(), 0.0);
    assert_eq!(Density::plateau(2.0, 1.0).plateau_radius().value(), 2.0);
    assert!(Density::constant(0.0).plateau_radius().is_infinite());
    // The value separates the flat core from the strictly increasing part.
    for d in Density::builtins() {
        let rp = d.plateau_radius();
        if rp.is_infinite() {
            continue;
        }
        for k in 0..200 {
            let r = 5.0 * k as f64 / 199.0;
            if r <= rp.value() {
                assert_eq!(d.dg(r), 0.0, "{d} at {r}");
            } else {
                assert!(d.dg(r) > 0.0, "{d} at {r}");
            }
        }
    }
}

#[test]
fn convexity_examples() {
    assert!(Density::quadratic(1.0).validate_convexity(10.0, 1000).unwrap().passed);
    assert!(Density::cosh(1.0).validate_convexity(5.0, 100).unwrap().passed);
    let concave = Density::custom(vec![0.0, 0.0, -1.0]).unwrap();
    let rep = concave.validate_convexity(1.0, 10).unwrap();
    assert!(!rep.passed);
    assert_eq!(rep.violations.len(), 10);
    for d in Density::builtins() {
        assert!(d.validate_convexity(6.0, 500).unwrap().passed, "{d}");
    }
}

/// Central difference of order `k` against the analytic order `k + 1`.
#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let extra = [Density::custom(vec![0.5, 0.0, 1.0, 0.0, 0.25]).unwrap(), Density::cosh(0.3)];
    for d in Density::builtins().iter().chain(extra.iter()) {
        for _ in 0..100 {
            let mut r: f64 = rng.gen_range(0.1..5.0);
            // The hinge has a jump in its third derivative.
            if let Some(rp) = Some(d.plateau_radius().value()).filter(|v| *v > 0.0 && v.is_finite()) {
                if (r - rp).abs() < 10.0 * h {
                    r += 20.0 * h;
                }
            }
            for k in 0..=2u8 {
                let fd = (d.eval(r + h, k).unwrap() - d.eval(r - h, k).unwrap()) / (2.0 * h);
                let an = d.eval(r, k + 1).unwrap();
                let err = (fd - an).abs() / an.abs().max(1.0);
                assert!(err < 1e-5, "{d} order {k} at {r}: {fd} vs {an}");
            }
        }
    }
}

#[test]
fn weight_is_exponential_of_log_density() {
    let d = Density::quadratic(1.0);
    assert!((d.weight(1.0) - 1f64.exp()).abs() < 1e-15);
    assert_eq!(Density::constant(0.0).weight(7.0), 1.0);
}

#[test]
fn shorthand_and_json_agree() {
    for d in Density::builtins() {
        let short: Density = d.to_string().parse().unwrap();
        let json: Density = serde_json::to_string(&d).unwrap().parse().unwrap();
        assert_eq!(short, d);
        assert_eq!(json, d);
    }
    assert!("custom:0,1".parse::<Density>().is_err());
    assert!("quadratic:-1".parse::<Density>().is_err());
}

fn any_builtin() -> impl Strategy<Value = Density> {
    prop_oneof![
        (0.0..3.0f64).prop_map(Density::quadratic),
        (0.0..3.0f64).prop_map(Density::cosh),
        (0.1..3.0f64, 0.0..3.0f64).prop_map(|(r, a)| Density::plateau(r, a)),
        (-2.0..2.0f64).prop_map(Density::constant),
    ]
}

proptest! {
    #[test]
    fn log_density_is_nondecreasing(d in any_builtin(), r in 0.0..8.0f64) {
        prop_assert!(d.eval(r, 1).unwrap() >= 0.0);
        prop_assert!(d.eval(r, 2).unwrap() >= 0.0);
    }

    #[test]
    fn log_density_is_monotone(d in any_builtin(), a in 0.0..6.0f64, b in 0.0..6.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.g(lo) <= d.g(hi));
    }

    #[test]
    fn shorthand_round_trips(d in any_builtin()) {
        let back: Density = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }
}
