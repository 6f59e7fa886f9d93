#![no_main]

use deltastar::{CoefficientProfile, Profile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<Profile>() {
        let again: Profile = p.to_string().parse().expect("display output parses");
        assert_eq!(again, p);
        let _ = p.eval(0.3);
    }
    let _ = text.parse::<CoefficientProfile>();
});
