#![no_main]

use active_diffusion::mixture::GaussianMixture;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = serde_json::from_slice::<GaussianMixture>(data) {
        let _ = m.covariance();
    }
});
