#![no_main]

use libfuzzer_sys::fuzz_target;
use sa2net::data::{gen_sample, SynthSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = SynthSpec::parse(text) else { return };
    // keep each run cheap
    if spec.height * spec.width * spec.channels > 1 << 14 || spec.cell_count.1 > 64 {
        return;
    }
    let s = gen_sample::<f32>(&spec, 0).expect("valid spec generates");
    assert!(s.mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
    assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
});
