#![no_main]

use causal_core::sim::{parse_truth_file, simulate_confounded_cohort, SimMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tf) = parse_truth_file(data) {
        // Cap the cohort so a single input cannot stall the fuzzer.
        let c = tf.truth.cohort;
        if c.n_exposed.saturating_add(c.n_unexposed) <= 1_000_000 {
            let _ = simulate_confounded_cohort(&tf.truth, SimMode::Expected);
            let _ = simulate_confounded_cohort(&tf.truth, SimMode::Random);
        }
    }
});
