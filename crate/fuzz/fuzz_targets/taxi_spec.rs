#![no_main]

use causal_core::legal::{taxi_posterior, TaxiScenario};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = TaxiScenario::from_json(data) {
        if let Ok(p) = taxi_posterior(&s) {
            let sum: f64 = p.posterior.iter().map(|(_, q)| q).sum();
            assert!(p.posterior.iter().all(|(_, q)| (0.0..=1.0).contains(q)));
            assert!((sum - 1.0).abs() < 1e-9, "posterior sums to {sum}");
        }
    }
});
