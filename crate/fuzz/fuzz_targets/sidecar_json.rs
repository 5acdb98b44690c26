//! Column-kind sidecar documents; accepted ones must survive a round trip.

#![no_main]

use impute_core::data::Sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(sidecar) = Sidecar::from_json(&text) {
        let again = serde_json::to_string(&sidecar).unwrap();
        assert_eq!(Sidecar::from_json(&again).unwrap(), sidecar);
    }
});
