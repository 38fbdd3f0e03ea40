#![no_main]

use forge_twin::harness::csvio::{read_records, write_records, MetricsRow};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_records::<MetricsRow, _>(data) {
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).expect("write");
        let _ = read_records::<MetricsRow, _>(buf.as_slice()).expect("re-read");
    }
});
