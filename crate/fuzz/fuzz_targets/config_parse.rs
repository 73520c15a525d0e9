#![no_main]

use glsphere_cli::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let again = cfg.to_toml_string().expect("valid configs serialize");
        assert_eq!(ExperimentConfig::from_toml_str(&again).expect("round trip parses"), cfg);
    }
});
