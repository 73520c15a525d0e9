#![no_main]

use glsphere_cli::snapshot::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode(data) {
        // Anything accepted must re-encode to the same bytes.
        assert_eq!(encode(&snap), data);
    }
});
