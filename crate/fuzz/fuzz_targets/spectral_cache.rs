#![no_main]

use libfuzzer_sys::fuzz_target;
use qksd::exact::{decode_cache, encode_cache};

fuzz_target!(|data: &[u8]| {
    if let Ok((key, sd)) = decode_cache(data) {
        assert_eq!(encode_cache(key, &sd), data);
    }
});
