#![no_main]

use anisoldp_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        let echo = cfg.to_toml();
        let again = RunConfig::parse(&echo).expect("echoed config must parse");
        assert_eq!(again.to_toml(), echo);
    }
});
