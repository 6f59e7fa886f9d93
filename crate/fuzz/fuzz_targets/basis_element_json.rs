#![no_main]

use deltastar::{BasisElement, Field, QuadrantPoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = BasisElement::from_json(text) {
        let n = e.edges();
        if let Ok(p) = QuadrantPoint::natural(1, n, 0.5, 1.5) {
            let _ = e.value(&p);
        }
        let _ = BasisElement::from_json(&e.to_json()).expect("serialized element parses");
    }
});
