#![no_main]

use causal_core::study::parse_study_file;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything that parses must survive a serialize/parse round trip.
    if let Ok(bundle) = parse_study_file(data) {
        let again = parse_study_file(bundle.to_json().as_bytes()).expect("own output parses");
        assert_eq!(again, bundle);
    }
});
