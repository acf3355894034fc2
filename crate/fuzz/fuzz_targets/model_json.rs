#![no_main]

use curator::embed::Embedder;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = curator::embed::EmbedderModel::from_json(text) {
            let _ = m.embed_text("the quick brown fox");
        }
    }
});
