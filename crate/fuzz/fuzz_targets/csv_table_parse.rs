#![no_main]

use latcr_core::experiment::ResultTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(t) = ResultTable::from_csv(text) else {
        return;
    };
    assert!(t.rows.iter().all(|r| r.len() == t.columns.len()));
    // Numbers are rounded on the first write; after that the text is a
    // fixed point.
    let once = ResultTable::from_csv(&t.to_csv()).expect("written table parses");
    let text = once.to_csv();
    let twice = ResultTable::from_csv(&text).expect("rewritten table parses");
    assert_eq!(twice.to_csv(), text);
});
