#![no_main]

use labelset::persist::ThresholdArtifact;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(artifact) = ThresholdArtifact::from_text(text) {
        let rendered = artifact.to_text();
        let reparsed = ThresholdArtifact::from_text(&rendered).expect("rendered artifact parses");
        assert_eq!(artifact, reparsed);
    }
});
