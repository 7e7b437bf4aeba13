#![no_main]

use libfuzzer_sys::fuzz_target;
use tradenet::io::parse_edge_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(el) = parse_edge_list(s, "fuzz") {
            let text = el.to_text();
            let back = parse_edge_list(&text, "fuzz").unwrap();
            assert_eq!(back.to_text(), text);
        }
    }
});
