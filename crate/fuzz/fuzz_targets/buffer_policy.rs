#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::incremental::BufferPolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(policy) = text.parse::<BufferPolicy>() {
        assert_eq!(policy.to_string().parse::<BufferPolicy>().unwrap(), policy);
    }
});
