#![no_main]

use latcr_core::experiment::{parse_db, parse_quantity, Scenario, SCENARIO_KEYS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(x) = parse_quantity(text) {
        assert!(x.is_finite());
    }
    if let Ok(x) = parse_db(text) {
        assert!(!x.is_nan() && x != f64::INFINITY);
    }
    let mut s = Scenario::default();
    for key in SCENARIO_KEYS {
        let _ = s.set(key, text);
    }
});
