#![no_main]

use libfuzzer_sys::fuzz_target;
use review_lottery::experiments::{parse_override, Experiment, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(entry) = parse_override(text) {
            let _ = ExperimentConfig::resolve(Some(Experiment::Nash), &[], &[entry]);
        }
    }
});
