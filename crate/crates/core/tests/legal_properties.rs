use std::collections::BTreeMap;

use causal_core::effect::{pde, EffectEstimate, MeasureKind};
use causal_core::legal::{
    allocate_liability, apportion_joint_exposures, assigned_share, but_for_verdict, taxi_posterior, AllocationMode,
    ApportionScheme, ButForVerdict, LegalConfig, TaxiCompany, TaxiScenario, BARE_STATISTICS_WARNING,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn excess_units_fractions_are_exact() {
    let r = apportion_joint_exposures(6.0, 11.0, 51.0, ApportionScheme::ExcessUnits).unwrap();
    let units: Vec<i64> = ["a", "s", "interaction"].iter().map(|k| r.units[*k] as i64).collect();
    assert_eq!(units, [5, 10, 50]);
    let total: i64 = units.iter().sum();
    assert_eq!(total, 65);
    let a = Ratio::new(units[0] + units[2], total);
    let s = Ratio::new(units[1] + units[2], total);
    assert_eq!(a, Ratio::new(11, 13));
    assert_eq!(r.involved_fraction["a"], 55.0 / 65.0);
    assert_eq!(Ratio::from_float(r.involved_fraction["a"]), Ratio::from_float(55.0 / 65.0));
    assert_eq!(r.involved_fraction["s"], *s.numer() as f64 / *s.denom() as f64);
}

fn scenario(rng: &mut ChaCha8Rng) -> TaxiScenario {
    let k = rng.random_range(1..6);
    TaxiScenario::new(
        (0..k)
            .map(|i| TaxiCompany {
                label: format!("c{i}"),
                fleet_size: rng.random_range(1..500),
                negligence_rate: rng.random_range(0.01..1.0),
                exposure_rate: rng.random_range(0.01..1.0),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn taxi_posterior_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = scenario(&mut rng);
        let base = taxi_posterior(&s).unwrap();
        let sum: f64 = base.posterior.iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let (kn, ke) = (rng.random_range(1e-3..1e3), rng.random_range(1e-3..1e3));
        let mut scaled = s.clone();
        for c in &mut scaled.companies {
            c.negligence_rate *= kn;
            c.exposure_rate *= ke;
        }
        let other = taxi_posterior(&scaled).unwrap();
        for ((_, p), (_, q)) in base.posterior.iter().zip(&other.posterior) {
            worst = worst.max((p - q).abs());
        }
        assert_eq!(base.balance_verdict, other.balance_verdict);
    }
    assert!(worst < 1e-12, "max deviation {worst:e}");
}

fn rr(point: f64) -> EffectEstimate {
    EffectEstimate {
        kind: MeasureKind::RelativeRisk,
        point,
        lcl: point / 2.0,
        ucl: point * 2.0,
        confidence_level: 0.95,
        p_value: 0.01,
        corrected: false,
        se: 0.35,
    }
}

proptest! {
    #[test]
    fn assigned_share_is_pde(x in 1.0f64..1e6) {
        prop_assert_eq!(assigned_share(x).unwrap(), pde(x).unwrap());
    }

    #[test]
    fn but_for_agrees_with_pde(x in 1e-3f64..1e3) {
        let v = but_for_verdict(&rr(x), &LegalConfig::default()).unwrap();
        prop_assert_eq!(v.verdict == ButForVerdict::Satisfied, pde(x).unwrap() > 0.5);
    }

    #[test]
    fn allocation_sums_to_damages(
        weights in prop::collection::vec(0.0f64..1e6, 1..12),
        damages in 0u64..10_000_000_000,
        mode in 0usize..3,
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let map: BTreeMap<String, f64> = weights.iter().enumerate().map(|(i, &w)| (format!("p{i:02}"), w)).collect();
        let mode = [AllocationMode::MarketShare, AllocationMode::WeightedTortfeasor, AllocationMode::Equal][mode];
        let out = allocate_liability(&map, damages, mode).unwrap();
        prop_assert_eq!(out.values().sum::<u64>(), damages);
        if mode != AllocationMode::Equal {
            for (k, w) in &map {
                if *w == 0.0 {
                    prop_assert_eq!(out[k], 0);
                }
            }
        }
    }

    #[test]
    fn synergy_units_are_nonnegative_and_sum(rr_a in 1.0f64..50.0, rr_s in 1.0f64..50.0, extra in 0.0f64..100.0) {
        let rr_as = rr_a + rr_s - 1.0 + extra;
        let r = apportion_joint_exposures(rr_a, rr_s, rr_as, ApportionScheme::SynergyPartition).unwrap();
        prop_assert!(r.units.values().all(|&u| u >= 0.0));
        let sum: f64 = r.units.values().sum();
        prop_assert!((sum - (rr_as - 1.0)).abs() <= 1e-12 * rr_as);
        prop_assert!((sum - r.total_units).abs() <= 1e-12 * rr_as);
    }
}

#[test]
fn equal_rates_give_exact_fleet_share() {
    for rate in [0.1, 0.3, 0.7, 1.0 / 3.0, 1e-9, 42.0] {
        let company = |label: &str, fleet_size| TaxiCompany {
            label: label.into(),
            fleet_size,
            negligence_rate: rate,
            exposure_rate: rate * 3.0,
        };
        let s = TaxiScenario::new(vec![company("blue", 3), company("yellow", 1)]).unwrap();
        let post = taxi_posterior(&s).unwrap();
        assert_eq!(post.posterior[0], ("blue".to_string(), 0.75), "rate {rate}");
        assert_eq!(post.posterior[1].1, 0.25);
        assert_eq!(post.warnings, [BARE_STATISTICS_WARNING]);
    }
}
