#![no_main]

use forcecast::nn::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::decode(data) {
        // compare encodings rather than values so NaN payloads still round-trip
        let bytes = ck.encode().expect("decoded checkpoint encodes");
        let again = Checkpoint::decode(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(again.encode().expect("encodes"), bytes);
    }
});
