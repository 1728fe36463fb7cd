#![no_main]

use labelset::persist::ModelArtifact;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Accepted inputs must serialize to a stable fixed point: parsing the
    // rendered form succeeds and renders identically.
    if let Ok(artifact) = ModelArtifact::from_text(text) {
        let rendered = artifact.to_text();
        let reparsed = ModelArtifact::from_text(&rendered).expect("rendered artifact parses");
        assert_eq!(rendered, reparsed.to_text());
    }
});
