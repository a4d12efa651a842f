#![no_main]

use libfuzzer_sys::fuzz_target;
use review_lottery::experiments::{parse_config, ExperimentConfig};

// Any config that resolves must render to text that resolves to itself.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(entries) = parse_config(text) else { return };
    let Ok(cfg) = ExperimentConfig::resolve(None, &entries, &[]) else { return };
    let rendered = cfg.render();
    let again = ExperimentConfig::resolve(None, &parse_config(&rendered).expect("rendered config parses"), &[])
        .expect("rendered config resolves");
    assert_eq!(again, cfg);
    assert_eq!(again.hash(), cfg.hash());
    assert_eq!(again.render(), rendered);
});
