#![no_main]

use active_diffusion::net::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ck) = Checkpoint::from_json(text) {
            let _ = ck.net();
            let _ = ck.trainer();
        }
    }
});
