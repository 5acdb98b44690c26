#![no_main]

use impute_core::harness::parse_selection_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_selection_log(&String::from_utf8_lossy(data));
});
