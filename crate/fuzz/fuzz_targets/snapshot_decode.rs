#![no_main]

use isobgk::discretization::Snapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = Snapshot::decode(data) {
        // Anything that decodes must re-encode to the same bytes.
        assert_eq!(snap.encode(), data);
    }
});
