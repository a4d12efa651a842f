#![no_main]

use libfuzzer_sys::fuzz_target;
use review_lottery::experiments::{parse_config, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(entries) = parse_config(text) {
            let _ = ExperimentConfig::resolve(None, &entries, &[]);
        }
    }
});
