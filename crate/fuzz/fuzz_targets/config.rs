#![no_main]

use drxlab::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::parse(text) {
            // A parsed config must already satisfy its own schema.
            cfg.validate().expect("parse returned an invalid config");
        }
    }
});
