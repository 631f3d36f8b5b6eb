#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::bank::BankMeta;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = BankMeta::from_json(text) {
        let again = BankMeta::from_json(&meta.to_json()).expect("written meta parses");
        assert_eq!(again.to_json(), meta.to_json());
    }
});
