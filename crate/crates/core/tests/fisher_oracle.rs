use causal_core::effect::fisher_exact_two_sided;
use causal_core::sim::exact_fisher_oracle;
use causal_core::study::TwoByTwoTable;

#[test]
fn exact_path_matches_enumeration_up_to_total_40() {
    let mut worst = (0.0f64, TwoByTwoTable::cohort(0, 0, 0, 0));
    let mut count = 0u64;
    for n in 0..=40u64 {
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let t = TwoByTwoTable::cohort(a, b, c, n - a - b - c);
                    let diff = (fisher_exact_two_sided(&t) - exact_fisher_oracle(&t).unwrap()).abs();
                    if diff > worst.0 {
                        worst = (diff, t);
                    }
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 135_751);
    assert!(worst.0 < 1e-12, "max deviation {:e} at {}", worst.0, worst.1);
}
