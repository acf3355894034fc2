//! Every checked-in fuzz seed must be accepted by its decoder.

use std::fs;
use std::path::PathBuf;

use curator::config::PipelineConfig;
use curator::corpus::{split_sentences, Document};
use curator::embed::{decode_emb, EmbedderModel};
use curator::io;
use curator::vocab::DomainVocabulary;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text_seeds(target: &str) -> Vec<(String, String)> {
    seeds(target)
        .into_iter()
        .map(|(n, b)| (n, String::from_utf8(b).unwrap()))
        .collect()
}

#[test]
fn jsonl_seeds_parse() {
    type Check = fn(&str, &str) -> Result<usize, curator::Error>;
    let targets: [(&str, Check); 7] = [
        ("documents", |s, t| io::parse_documents(s, t).map(|v| v.len())),
        ("sentences", |s, t| io::parse_sentences(s, t).map(|v| v.len())),
        ("sequences", |s, t| io::parse_sequences(s, t).map(|v| v.len())),
        ("masked", |s, t| io::parse_masked(s, t).map(|v| v.len())),
        ("selection", |s, t| io::parse_selection(s, t).map(|v| v.len())),
        ("corpus", |s, t| io::parse_corpus(s, t).map(|v| v.len())),
        ("id_list", |s, t| io::parse_id_list(s, t).map(|v| v.len())),
    ];
    for (target, check) in targets {
        for (name, text) in text_seeds(target) {
            let n = check(&name, &text).unwrap_or_else(|e| panic!("{e}"));
            assert!(n > 0, "{name}");
        }
    }
}

#[test]
fn vocab_seeds_round_trip() {
    for (name, text) in text_seeds("vocab_tsv") {
        let v = DomainVocabulary::from_tsv("seed", 10_000, &text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(DomainVocabulary::from_tsv("seed", 10_000, &v.to_tsv()).unwrap(), v);
    }
}

#[test]
fn emb_seeds_decode() {
    for (name, bytes) in seeds("emb_decode") {
        let (rows, dim, values) = decode_emb(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(rows * dim, values.len());
    }
}

#[test]
fn model_and_config_seeds_load() {
    for (name, text) in text_seeds("model_json") {
        EmbedderModel::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in text_seeds("config_json") {
        PipelineConfig::from_json(&name, &text).unwrap_or_else(|e| panic!("{e}"));
    }
}

#[test]
fn text_seeds_split() {
    for (name, text) in text_seeds("split_tokenize") {
        let s = split_sentences(&Document::new("d", "x", text));
        assert!(s.len() >= 2, "{name}: {s:?}");
    }
}
