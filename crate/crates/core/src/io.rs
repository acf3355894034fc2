//! File formats: JSON-lines records, plain id lists, and atomic writes.
//!
//! Parsers take the whole input as text plus a source name used in error
//! messages, so they can be driven directly by fuzzers.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::{escape_sentinel, tokenize, Document, PackedSequence, SentenceRecord, TokenizeMode};
use crate::error::{Error, Result};
use crate::mask::MaskedSequence;
use crate::select::{CorpusEntry, SelectionLine};

/// Deserializes one JSON value per non-empty line.
pub fn parse_jsonl<T: DeserializeOwned>(source: &str, text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|e| Error::parse(source, n + 1, e.to_string()))?;
        out.push(v);
    }
    Ok(out)
}

/// Inverse of [`parse_jsonl`]: one compact object per LF-terminated line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Line numbers of non-empty lines, aligned with [`parse_jsonl`] output.
fn record_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, _)| n + 1)
        .collect()
}

/// `documents.jsonl`: ids non-empty and unique, text non-blank.
pub fn parse_documents(source: &str, text: &str) -> Result<Vec<Document>> {
    let docs: Vec<Document> = parse_jsonl(source, text)?;
    let lines = record_lines(text);
    let mut ids = HashSet::new();
    for (d, &line) in docs.iter().zip(&lines) {
        if d.id.is_empty() {
            return Err(Error::parse(source, line, "field `id` is empty"));
        }
        if !ids.insert(d.id.as_str()) {
            return Err(Error::parse(source, line, format!("field `id`: duplicate `{}`", d.id)));
        }
        if d.text.trim().is_empty() {
            return Err(Error::parse(source, line, "field `text` is blank"));
        }
    }
    Ok(docs)
}

/// `sentences.jsonl`: ids must follow `doc_id#idx`, token counts must match.
pub fn parse_sentences(source: &str, text: &str) -> Result<Vec<SentenceRecord>> {
    let recs: Vec<SentenceRecord> = parse_jsonl(source, text)?;
    let lines = record_lines(text);
    let mut ids = HashSet::new();
    for (r, &line) in recs.iter().zip(&lines) {
        if r.sent_id != format!("{}#{}", r.doc_id, r.idx) {
            return Err(Error::parse(
                source,
                line,
                format!("field `sent_id`: `{}` is not `doc_id#idx`", r.sent_id),
            ));
        }
        if !ids.insert(r.sent_id.as_str()) {
            return Err(Error::parse(source, line, format!("field `sent_id`: duplicate `{}`", r.sent_id)));
        }
        let n = tokenize(&r.text, TokenizeMode::Sequence).len();
        if r.token_count != n {
            return Err(Error::parse(
                source,
                line,
                format!("field `token_count`: {} but text has {n} tokens", r.token_count),
            ));
        }
    }
    Ok(recs)
}

/// `sequences.jsonl`; literal sentinel tokens are escaped on the way in.
pub fn parse_sequences(source: &str, text: &str) -> Result<Vec<PackedSequence>> {
    let mut seqs: Vec<PackedSequence> = parse_jsonl(source, text)?;
    for s in &mut seqs {
        let toks = std::mem::take(&mut s.tokens);
        s.tokens = toks.into_iter().map(escape_sentinel).collect();
    }
    Ok(seqs)
}

pub fn parse_masked(source: &str, text: &str) -> Result<Vec<MaskedSequence>> {
    let recs: Vec<MaskedSequence> = parse_jsonl(source, text)?;
    for (m, line) in recs.iter().zip(record_lines(text)) {
        m.validate()
            .map_err(|e| Error::parse(source, line, e.to_string()))?;
    }
    Ok(recs)
}

pub fn parse_selection(source: &str, text: &str) -> Result<Vec<SelectionLine>> {
    let lines: Vec<SelectionLine> = parse_jsonl(source, text)?;
    for (l, n) in lines.iter().zip(record_lines(text)) {
        if l.k == 0 {
            return Err(Error::parse(source, n, "field `k` must be >= 1"));
        }
        if l.neighbors.iter().any(|nb| nb.score.is_some_and(|s| !s.is_finite())) {
            return Err(Error::parse(source, n, "field `score` is not finite"));
        }
    }
    Ok(lines)
}

pub fn parse_corpus(source: &str, text: &str) -> Result<Vec<CorpusEntry>> {
    parse_jsonl(source, text)
}

/// One id per line (`pool.txt`, embedding id sidecars).
pub fn parse_id_list(source: &str, text: &str) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            return Err(Error::parse(source, n + 1, "empty id"));
        }
        if !seen.insert(line) {
            return Err(Error::parse(source, n + 1, format!("duplicate id `{line}`")));
        }
        out.push(line.to_string());
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    parse_documents(&path.display().to_string(), &read_text(path)?)
}

pub fn load_sentences(path: &Path) -> Result<Vec<SentenceRecord>> {
    parse_sentences(&path.display().to_string(), &read_text(path)?)
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Writes through `f` into a temporary sibling, then renames into place.
pub fn write_atomic_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |w| w.write_all(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_parse_and_validate() {
        let ok = "{\"id\":\"a\",\"domain\":\"x\",\"text\":\"hi\"}\n\n{\"id\":\"b\",\"domain\":\"x\",\"text\":\"yo\"}\n";
        assert_eq!(parse_documents("f", ok).unwrap().len(), 2);

        let dup = "{\"id\":\"a\",\"domain\":\"x\",\"text\":\"hi\"}\n{\"id\":\"a\",\"domain\":\"x\",\"text\":\"yo\"}\n";
        let e = parse_documents("f", dup).unwrap_err().to_string();
        assert!(e.contains("f:2") && e.contains("duplicate"), "{e}");

        let missing = "{\"id\":\"a\",\"text\":\"hi\"}\n";
        let e = parse_documents("f", missing).unwrap_err().to_string();
        assert!(e.contains("f:1") && e.contains("domain"), "{e}");

        let blank = "{\"id\":\"a\",\"domain\":\"x\",\"text\":\"  \"}\n";
        assert!(parse_documents("f", blank).unwrap_err().to_string().contains("text"));
    }

    #[test]
    fn sentences_check_ids_and_counts() {
        let r = SentenceRecord::new("d", 0, "two words");
        let text = to_jsonl(std::slice::from_ref(&r));
        assert_eq!(parse_sentences("s", &text).unwrap(), vec![r.clone()]);
        let mut bad = r.clone();
        bad.token_count = 5;
        assert!(parse_sentences("s", &to_jsonl(&[bad])).unwrap_err().to_string().contains("token_count"));
        let mut bad = r;
        bad.sent_id = "x".into();
        assert!(parse_sentences("s", &to_jsonl(&[bad])).is_err());
    }

    #[test]
    fn sequences_escape_sentinel() {
        let text = "{\"seq_id\":\"s\",\"doc_id\":\"d\",\"tokens\":[\"a\",\"<mask>\"]}\n";
        let s = parse_sequences("q", text).unwrap();
        assert_eq!(s[0].tokens, ["a", "\\<mask>"]);
    }

    #[test]
    fn id_lists() {
        assert_eq!(parse_id_list("p", "a\nb\n").unwrap(), ["a", "b"]);
        assert!(parse_id_list("p", "a\na\n").is_err());
        assert!(parse_id_list("p", "a\n\nb").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("curator-io-{}", std::process::id()));
        let p = dir.join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        fs::remove_dir_all(dir).unwrap();
    }
}
