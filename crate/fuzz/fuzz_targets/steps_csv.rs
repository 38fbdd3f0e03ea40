#![no_main]

use forge_twin::harness::csvio::read_steps;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_steps(data);
});
