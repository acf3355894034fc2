#![no_main]

use curator::corpus::{split_sentences, tokenize, Document, TokenizeMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let doc = Document::new("d", "x", text);
        for s in split_sentences(&doc) {
            assert!(!s.text.trim().is_empty());
            let _ = tokenize(&s.text, TokenizeMode::Analysis);
        }
        let _ = tokenize(text, TokenizeMode::Sequence);
    }
});
