#![no_main]

use forge_twin::harness::csvio::read_schedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_schedule(data, 3, 4e5) {
        assert!(!rows.is_empty());
        assert!(rows.iter().flatten().all(|p| (0.0..=4e5).contains(p)));
    }
});
