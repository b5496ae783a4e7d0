#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(x) = active_diffusion::datasets::parse_csv_2d(data) {
        assert_eq!(x.ncols(), 2);
        assert!(x.iter().all(|v| v.is_finite()));
    }
});
