#![no_main]

use libfuzzer_sys::fuzz_target;
use sa2net::kv::KvFile;
use sa2net::model::ModelConfig;
use sa2net::train::TrainConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(kv) = KvFile::parse(text) else { return };
    if let Ok(back) = KvFile::parse(&kv.render()) {
        assert_eq!(back, kv);
    }
    let _ = ModelConfig::from_kv(&kv);
    let _ = TrainConfig::from_kv(&kv, 8);
    let _ = ModelConfig::from_canonical(text);
});
