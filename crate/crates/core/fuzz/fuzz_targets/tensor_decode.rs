#![no_main]

use libfuzzer_sys::fuzz_target;
use sa2net::tensor::io::{decode_tensor, encode_any};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_tensor(data) {
        let mut again = Vec::new();
        encode_any(&t, &mut again);
        assert_eq!(again, data);
    }
});
