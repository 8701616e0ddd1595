#![no_main]

use forcecast::io::manifest::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(streams) = parse_manifest(text) {
            let again = parse_manifest(&streams.to_jsonl()).expect("serialized manifest parses");
            assert_eq!(again, streams);
        }
    }
});
