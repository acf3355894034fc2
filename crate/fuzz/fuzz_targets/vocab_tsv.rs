#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = curator::vocab::DomainVocabulary::from_tsv("fuzz", 10_000, text) {
            let again = curator::vocab::DomainVocabulary::from_tsv("fuzz", 10_000, &v.to_tsv()).unwrap();
            assert_eq!(again, v);
        }
    }
});
