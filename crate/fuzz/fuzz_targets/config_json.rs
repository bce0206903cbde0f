#![no_main]
use libfuzzer_sys::fuzz_target;
use nanoloc::config::SimConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = SimConfig::from_json_str(text) {
        // anything accepted must survive a round trip and build its derived state
        let again = SimConfig::from_json_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(again, config);
        if config.grid_rows.saturating_mul(config.grid_cols) <= 10_000 {
            let _ = config.topology().unwrap();
        }
    }
});
