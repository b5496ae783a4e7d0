#![no_main]

use active_diffusion::datasets::{format_lattice, parse_lattice};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(l) = parse_lattice(text) {
            assert_eq!(parse_lattice(&format_lattice(&l)).unwrap(), l);
        }
    }
});
