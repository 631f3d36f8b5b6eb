#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::tables::parse_score_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_score_table(text) {
        assert!(rows.iter().all(|(id, s)| !id.is_empty() && !s.is_nan()));
    }
});
