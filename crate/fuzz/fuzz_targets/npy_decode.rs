#![no_main]

use libfuzzer_sys::fuzz_target;
use streambank::array_io::{encode_array, NpyArray};

fuzz_target!(|data: &[u8]| {
    if let Ok(arr) = NpyArray::from_bytes(data) {
        assert!(arr.values.iter().all(|v| v.is_finite()));
        let bytes = encode_array(arr.header.dtype, &arr.header.shape, &arr.values);
        let again = NpyArray::from_bytes(&bytes).expect("re-encoded array decodes");
        assert_eq!(again.values, arr.values);
    }
});
