#![no_main]

use deltastar::ResidualReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ResidualReport::from_json(text) {
        assert_eq!(r.pass, r.checks.iter().all(|c| c.pass));
        ResidualReport::from_json(&r.to_json()).expect("serialized report parses");
    }
});
