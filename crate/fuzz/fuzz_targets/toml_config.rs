#![no_main]

use impute_core::harness::ExperimentSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(spec) = ExperimentSpec::from_toml_str(&text) {
        let _ = spec.validate();
        let _ = spec.to_toml_string();
    }
});
