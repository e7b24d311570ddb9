#![no_main]

use libfuzzer_sys::fuzz_target;

use aoi_cli::config::RunConfig;

// The flat key=value config parser must never panic, and any config it
// accepts must round-trip through its own serialization.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_kv(s) {
        let again = RunConfig::from_kv(&cfg.to_kv()).expect("serialized config must re-parse");
        assert_eq!(cfg, again);
    }
});
