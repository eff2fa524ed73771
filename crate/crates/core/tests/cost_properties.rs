use proptest::prelude::*;
use stixelflow::cost::{amdahl, compare_profiles, emr_fraction, profile_cost, DeploymentProfile, RateBasis};

fn profile(name: &str, rate: f64, override_usd: Option<f64>) -> DeploymentProfile {
    DeploymentProfile {
        name: name.into(),
        region: "r".into(),
        rate_basis: RateBasis::PerInstanceHour,
        compute_rate: rate,
        cores_per_instance: Some(16),
        orchestration_fee: 0.05,
        software_fee: 0.01,
        headline_cost_override: override_usd,
    }
}

proptest! {
    #[test]
    fn amdahl_bounded_and_monotone(p in 0.0f64..=1.0, s in 0.01f64..1000.0, dp in 0.0f64..0.5, ds in 0.0f64..100.0) {
        let a = amdahl(p, s).unwrap();
        prop_assert!(a <= s.max(1.0) + 1e-12);
        if s >= 1.0 {
            prop_assert!(a <= s + 1e-12);
            prop_assert!(amdahl((p + dp).min(1.0), s).unwrap() >= a - 1e-12);
        }
        prop_assert!(amdahl(p, s + ds).unwrap() >= a - 1e-12);
    }

    #[test]
    fn emr_share_grows_as_compute_gets_cheaper(fee in 0.01f64..2.0, rate in 0.01f64..5.0, cut in 0.001f64..0.99) {
        prop_assert!(emr_fraction(rate * cut, fee).unwrap() > emr_fraction(rate, fee).unwrap());
    }

    #[test]
    fn cost_is_linear_in_core_hours(rate in 0.0f64..10.0, hours in 0.5f64..1e5) {
        let p = profile("p", rate, None);
        let one = profile_cost(&p, hours).unwrap();
        let two = profile_cost(&p, 2.0 * hours).unwrap();
        prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
    }

    #[test]
    fn ratios_survive_uniform_scaling(costs in proptest::collection::vec(1u32..100_000, 1..8), k in 1u32..50) {
        let plain: Vec<DeploymentProfile> =
            costs.iter().enumerate().map(|(i, c)| profile(&format!("p{i}"), 0.0, Some(f64::from(*c) / 100.0))).collect();
        let scaled: Vec<DeploymentProfile> =
            costs.iter().enumerate().map(|(i, c)| profile(&format!("p{i}"), 0.0, Some(f64::from(c * k) / 100.0))).collect();
        let a = compare_profiles(&plain, 1600.0, 3).unwrap();
        let b = compare_profiles(&scaled, 1600.0, 3).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(&x.name, &y.name);
            prop_assert!((x.ratio - y.ratio).abs() < 1e-12);
            prop_assert!(x.ratio >= 1.0);
        }
        prop_assert_eq!(a.cheapest().unwrap().ratio, 1.0);
    }
}

#[test]
fn amdahl_equals_factor_only_when_everything_improves() {
    assert_eq!(amdahl(1.0, 6.0).unwrap(), 6.0);
    assert!(amdahl(0.999, 6.0).unwrap() < 6.0);
}
