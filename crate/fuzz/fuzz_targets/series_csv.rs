#![no_main]

use libfuzzer_sys::fuzz_target;
use tradenet::io::{parse_series_csv, read_losses_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(series) = parse_series_csv(s, "fuzz", "date", "value", "fuzz") {
            let losses = read_losses_csv(&series.losses_csv(), "fuzz").unwrap();
            assert!(losses.iter().all(|&l| l > 0.0));
        }
    }
});
