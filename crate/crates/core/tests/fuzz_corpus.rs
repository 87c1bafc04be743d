//! Replays the checked-in fuzz seeds through the same properties the fuzz
//! targets assert, so the corpus stays meaningful without cargo-fuzz.

use std::path::PathBuf;

use isobgk::config::RunConfig;
use isobgk::discretization::Snapshot;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn snapshot_seeds_decode_or_fail_cleanly() {
    for (name, bytes) in seeds("snapshot_decode") {
        match Snapshot::decode(&bytes) {
            Ok(s) => {
                assert!(name.contains("valid"), "{name} should not decode");
                assert_eq!(s.encode(), bytes, "{name}");
            }
            Err(e) => assert!(!name.contains("valid"), "{name} should decode: {e}"),
        }
    }
}

#[test]
fn config_seeds_parse_or_fail_cleanly() {
    for (name, bytes) in seeds("config_parse") {
        let text = String::from_utf8(bytes).unwrap();
        let bad = name.contains("bad") || name.contains("unknown") || name.contains("not_json");
        match RunConfig::from_json_str(&text) {
            Ok(cfg) => {
                assert!(!bad, "{name} should be rejected");
                assert_eq!(
                    RunConfig::from_json_str(&cfg.to_json_string()).unwrap(),
                    cfg
                );
            }
            Err(e) => assert!(bad, "{name}: {e}"),
        }
    }
}
