#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::rate::SampleRate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rate) = text.parse::<SampleRate>() {
        assert!(rate.numer() >= 1 && rate.numer() <= rate.denom());
        assert!(rate.floor_of(rate.denom()) == rate.numer());
    }
});
