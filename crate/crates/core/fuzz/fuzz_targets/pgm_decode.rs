#![no_main]

use libfuzzer_sys::fuzz_target;
use sa2net::data::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_pgm::<f64>(data) {
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let bytes = encode_pgm(&t).expect("decoded values are in range");
        let _ = decode_pgm::<f32>(&bytes).expect("encoded greymap decodes");
    }
});
