#![no_main]

use impute_core::data::read_mask_csv_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok((names, mask)) = read_mask_csv_str(&text) {
        assert_eq!(mask.shape().1, names.len());
    }
});
