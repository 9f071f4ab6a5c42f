#![no_main]

use libfuzzer_sys::fuzz_target;
use qksd::bench_config::BenchConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = BenchConfig::from_json(text) {
            let again = serde_json::to_string(&cfg).map(|t| BenchConfig::from_json(&t));
            assert!(matches!(again, Ok(Ok(_))));
        }
    }
});
