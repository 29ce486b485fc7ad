#![no_main]

use causal_cli::args::Format;
use causal_cli::report::{parse_report, render_report};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = parse_report(data) {
        let json = render_report(&r, Format::Json);
        let again = parse_report(&json).expect("own output parses");
        assert_eq!(render_report(&again, Format::Json), json);
        let _ = render_report(&r, Format::Human);
    }
});
