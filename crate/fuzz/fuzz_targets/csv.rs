//! Arbitrary bytes as a headed data CSV. Accepted input must yield a
//! dataset whose mask agrees with its shape.

#![no_main]

use impute_core::data::{read_csv_bytes, CsvOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_csv_bytes(data, &CsvOptions::default()) {
        assert_eq!(ds.mask().shape(), (ds.n_rows(), ds.n_cols()));
    }
});
