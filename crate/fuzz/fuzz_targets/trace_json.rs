#![no_main]

use impute_core::harness::{convergence_report, parse_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = parse_trace(&String::from_utf8_lossy(data)) {
        let _ = convergence_report(&[("fuzz".to_string(), &trace)]);
    }
});
