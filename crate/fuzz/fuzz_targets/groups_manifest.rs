#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::tables::parse_groups;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(groups) = parse_groups(text) {
        for pair in groups.windows(2) {
            assert!(pair[0].end <= pair[1].start);
        }
        assert!(groups.iter().all(|g| g.start < g.end));
    }
});
