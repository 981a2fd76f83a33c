#![no_main]

use latcr_core::experiment::parse_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = parse_grid(text) {
        assert!(!g.is_empty());
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g.iter().all(|x| !x.is_nan() && *x != f64::INFINITY));
    }
});
