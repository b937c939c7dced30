#![no_main]

use anisoldp::snapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = snapshot::decode_raw(data) {
        // the layout is a plain byte copy, so encoding must round-trip
        assert_eq!(snapshot::encode(&raw), data);
        if let Ok(field) = snapshot::decode(data) {
            assert!(field.check_invariants().is_ok());
        }
    }
});
