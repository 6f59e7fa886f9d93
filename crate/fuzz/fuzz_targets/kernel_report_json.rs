#![no_main]

use deltastar::KernelReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = KernelReport::from_json(text) {
        KernelReport::from_json(&r.to_json()).expect("serialized report parses");
    }
});
