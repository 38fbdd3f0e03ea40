#![no_main]

use forge_twin::nn::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_bytes(data) {
        assert_eq!(
            Checkpoint::from_bytes(&ck.to_bytes()).expect("re-decode"),
            ck
        );
    }
});
