#![no_main]

use latcr_core::experiment::{ExperimentSpec, Preset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = Preset::parse(text) {
        for (k, _, line) in p.entries() {
            assert!(!k.is_empty());
            assert!(line >= 1);
        }
    }
    // Large grids are legal but slow; keep iterations short.
    if text.len() < 2048 && !text.contains("sim_every") {
        if let Ok(spec) = ExperimentSpec::from_preset(text, &[]) {
            assert!(!spec.grid.is_empty());
            assert!(spec.grid.windows(2).all(|w| w[1] > w[0]));
            assert!(!spec.curves.is_empty());
        }
    }
});
