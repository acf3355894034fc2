#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((rows, dim, values)) = curator::embed::decode_emb(data) {
        assert_eq!(rows * dim, values.len());
        let ids = (0..rows).map(|i| i.to_string()).collect();
        let m = curator::embed::EmbeddingMatrix::from_bytes(data, ids).unwrap();
        assert_eq!(m.to_bytes(), data);
    }
});
