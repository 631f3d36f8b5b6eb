#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::array_io::{encode_header, parse_header};

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = parse_header(data) {
        assert!(h.data_offset <= data.len());
        // Whatever parsed must survive a canonical re-encode.
        let again =
            parse_header(&encode_header(h.dtype, &h.shape)).expect("canonical header parses");
        assert_eq!(again.dtype, h.dtype);
        assert_eq!(again.shape, h.shape);
    }
});
