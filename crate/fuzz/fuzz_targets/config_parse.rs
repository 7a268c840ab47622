#![no_main]

use libfuzzer_sys::fuzz_target;
use plaque_fsi::io::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };
    // accepted configs must survive a round trip and build their initial data
    let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).expect("re-parse");
    assert_eq!(again.hash(), cfg.hash());
    let d = cfg.domain().expect("validated geometry");
    if d.nx * d.ny() <= 4096 {
        let _ = cfg.initial_data(&d);
    }
});
