#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = deltastar::parse_int_grid(text) {
        assert!(!v.is_empty() && v.len() <= 10_000);
    }
    if let Ok(v) = deltastar::parse_float_grid(text) {
        assert!(!v.is_empty() && v.iter().all(|x| x.is_finite()));
    }
});
