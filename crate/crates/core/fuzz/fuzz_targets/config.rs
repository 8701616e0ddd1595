#![no_main]

use forcecast::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            let again = RunConfig::parse(&cfg.to_text()).expect("serialized config parses");
            assert_eq!(again, cfg);
            let _ = forcecast::config::net_config(&cfg);
            let _ = forcecast::config::train_config(&cfg, true);
        }
    }
});
