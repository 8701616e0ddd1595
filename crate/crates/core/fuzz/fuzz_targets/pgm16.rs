#![no_main]

use forcecast::io::image::{decode_pgm16, encode_pgm16};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm16(data) {
        let again = decode_pgm16(&encode_pgm16(&img)).expect("re-encoded image decodes");
        assert_eq!(again, img);
    }
});
