#![no_main]

use libfuzzer_sys::fuzz_target;
use sa2net::model::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::<f32>::decode(data) {
        let bytes = ck.encode();
        let back = Checkpoint::<f32>::decode(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(back.encode(), bytes);
    }
});
