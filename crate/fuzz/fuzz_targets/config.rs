#![no_main]

use libfuzzer_sys::fuzz_target;
use tradenet::io::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        // Anything accepted must survive a trip through both writers.
        if let Ok(cfg) = parse_config(s, "fuzz") {
            assert_eq!(parse_config(&cfg.to_flat(), "flat").unwrap(), cfg);
            assert_eq!(parse_config(&cfg.to_json(), "json").unwrap(), cfg);
        }
    }
});
