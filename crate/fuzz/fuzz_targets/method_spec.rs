//! Method strings such as `knn(k=5)`. Accepted single methods must print
//! back to a string that parses to the same method.

#![no_main]

use impute_core::harness::{parse_method_list, Method};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(m) = text.parse::<Method>() {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    let _ = parse_method_list(&text);
});
