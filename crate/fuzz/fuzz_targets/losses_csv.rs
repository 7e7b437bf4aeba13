#![no_main]

use libfuzzer_sys::fuzz_target;
use tradenet::io::{read_losses_csv, read_returns_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = read_losses_csv(s, "fuzz");
        let _ = read_returns_csv(s, "fuzz");
    }
});
