#![no_main]

use causal_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = parse_config(data) {
        let json = serde_json::to_vec(&cfg).expect("config serializes");
        assert_eq!(parse_config(&json).expect("own output parses"), cfg);
    }
});
