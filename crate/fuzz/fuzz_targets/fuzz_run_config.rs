#![no_main]

use labelset_cli::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_text(text) {
        // Round trip and argv reconstruction must hold for anything accepted.
        let rendered = config.to_text();
        let reparsed = RunConfig::from_text(&rendered).expect("rendered config parses");
        assert_eq!(config, reparsed);
        let _ = config.to_argv();
    }
});
