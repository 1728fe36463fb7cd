#![no_main]

use libfuzzer_sys::fuzz_target;

// CSV ingestion must reject malformed input with an error, never a panic,
// for both the labeled and the features-only readers.
fuzz_target!(|data: &[u8]| {
    let _ = labelset::ingest::parse_labeled_csv(data, "y", None);
    let classes = vec!["a".to_string(), "b".to_string()];
    let _ = labelset::ingest::parse_labeled_csv(data, "y", Some(&classes));
    let _ = labelset::ingest::parse_features_csv(data, None);
    let _ = labelset::ingest::parse_features_csv(data, Some("y"));
});
