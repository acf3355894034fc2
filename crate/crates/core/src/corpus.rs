//! Documents, sentence splitting, tokenization, sequence packing,
//! deduplication and sampling.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Literal used for masked positions in generated training streams.
pub const MASK_TOKEN: &str = "<mask>";
/// How a literal `<mask>` token found in corpus text is written after ingest.
pub const ESCAPED_MASK_TOKEN: &str = "\\<mask>";

pub const DEFAULT_MAX_LEN: usize = 512;

const SAMPLE_LABEL: &str = "corpus/sample";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub domain: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, domain: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            domain: domain.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sent_id: String,
    pub doc_id: String,
    pub idx: usize,
    pub text: String,
    pub token_count: usize,
}

impl SentenceRecord {
    pub fn new(doc_id: &str, idx: usize, text: &str) -> Self {
        SentenceRecord {
            sent_id: format!("{doc_id}#{idx}"),
            doc_id: doc_id.to_string(),
            idx,
            text: text.to_string(),
            token_count: tokenize(text, TokenizeMode::Sequence).len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedSequence {
    pub seq_id: String,
    pub doc_id: String,
    pub tokens: Vec<String>,
}

// ---------------------------------------------------------------------------
// Sentence splitting
// ---------------------------------------------------------------------------

/// Lowercased abbreviations (without the final period) that never end a
/// sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "cf",
    "al", "fig", "figs", "eq", "eqs", "no", "nos", "vol", "pp", "ed", "eds", "inc", "ltd", "co",
    "corp", "dept", "univ", "approx", "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "ave", "gen", "col", "lt", "sgt", "capt", "rev", "gov",
    "sen", "rep", "u.s", "ph.d",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}' | '(' | '[')
}

/// Word immediately before byte offset `dot` (exclusive), leading
/// punctuation stripped.
fn word_before(text: &str, dot: usize) -> &str {
    let head = &text[..dot];
    let start = head
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    head[start..].trim_start_matches(|c: char| !c.is_alphanumeric())
}

fn is_guarded(word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    let first = chars.next().unwrap();
    // initials such as "J. Smith"
    if chars.next().is_none() && first.is_uppercase() {
        return true;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Byte ranges of sentences in `text`, already trimmed.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    let push = |spans: &mut Vec<(usize, usize)>, s: usize, e: usize| {
        let piece = &text[s..e];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            spans.push((s + lead, s + lead + trimmed.len()));
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map(|&(p, _)| p).unwrap_or(text.len());
        // need whitespace, then a capital or an opening quote
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < chars.len()
            && (chars[k].1.is_uppercase() || is_opener(chars[k].1))
            && !(c == '.' && j == i + 1 && is_guarded(word_before(text, pos)));
        if boundary {
            push(&mut spans, start, end);
            start = end;
        }
        i = j;
    }
    if start < text.len() {
        push(&mut spans, start, text.len());
    }
    spans
}

/// Rule-based sentence splitter. Empty or whitespace-only text yields no
/// records.
pub fn split_sentences(doc: &Document) -> Vec<SentenceRecord> {
    sentence_spans(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(idx, (s, e))| SentenceRecord::new(&doc.id, idx, &doc.text[s..e]))
        .collect()
}

/// Splits every document in parallel; output keeps input document order.
pub fn split_corpus(docs: &[Document]) -> Vec<SentenceRecord> {
    docs.par_iter()
        .map(split_sentences)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    /// Lowercased words for counting: edge punctuation stripped, numbers and
    /// punctuation-only tokens dropped.
    Analysis,
    /// Whitespace tokens, case and punctuation preserved.
    Sequence,
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::Sequence => text.split_whitespace().map(str::to_string).collect(),
        TokenizeMode::Analysis => text
            .split_whitespace()
            .filter_map(|raw| {
                let lower = raw.to_lowercase();
                let tok = lower.trim_matches(|c: char| !c.is_alphanumeric());
                if tok.is_empty() || tok.chars().all(char::is_numeric) {
                    None
                } else {
                    Some(tok.to_string())
                }
            })
            .collect(),
    }
}

/// Replaces tokens that collide with the mask sentinel.
pub fn escape_sentinel(tok: String) -> String {
    if tok == MASK_TOKEN {
        ESCAPED_MASK_TOKEN.to_string()
    } else {
        tok
    }
}

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

fn truncate_unit(mut toks: Vec<String>, max_len: usize, rng: &mut Rng) -> Vec<String> {
    let excess = toks.len() - max_len;
    if rng.coin() {
        toks.drain(..excess);
    } else {
        toks.truncate(max_len);
    }
    toks
}

/// Packs one document's sentences greedily into sequences of at most
/// `max_len` tokens.
pub fn pack_document(doc: &Document, max_len: usize, seed: u64) -> Vec<PackedSequence> {
    assert!(max_len >= 1, "max_len must be positive");
    let mut rng = Rng::for_key(seed, &doc.id);
    let mut chunks: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for (s, e) in sentence_spans(&doc.text) {
        let toks: Vec<String> = tokenize(&doc.text[s..e], TokenizeMode::Sequence)
            .into_iter()
            .map(escape_sentinel)
            .collect();
        if toks.len() > max_len {
            if !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
            }
            chunks.push(truncate_unit(toks, max_len, &mut rng));
        } else if current.len() + toks.len() > max_len {
            chunks.push(std::mem::replace(&mut current, toks));
        } else {
            current.extend(toks);
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
        .into_iter()
        .enumerate()
        .map(|(n, tokens)| PackedSequence {
            seq_id: format!("{}:{n}", doc.id),
            doc_id: doc.id.clone(),
            tokens,
        })
        .collect()
}

pub fn pack_sequences(docs: &[Document], max_len: usize, seed: u64) -> Result<Vec<PackedSequence>> {
    if max_len == 0 {
        return Err(Error::InvalidParam("max_len must be >= 1".into()));
    }
    let seed = derive_seed(seed, "corpus/pack");
    Ok(docs
        .par_iter()
        .map(|d| pack_document(d, max_len, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

// ---------------------------------------------------------------------------
// Dedup and sampling
// ---------------------------------------------------------------------------

/// Exact dedup on trimmed text; the first occurrence wins.
pub fn dedup_sentences(records: &[SentenceRecord]) -> Vec<SentenceRecord> {
    let mut seen: HashSet<&str> = HashSet::with_capacity(records.len());
    records
        .iter()
        .filter(|r| seen.insert(r.text.trim()))
        .cloned()
        .collect()
}

/// Draws `n` distinct indices from `0..len` with a partial Fisher–Yates
/// shuffle over a sparse swap table; returned ascending.
pub fn sample_indices(len: usize, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: len,
        });
    }
    let mut swapped: HashMap<usize, usize> = HashMap::new();
    let mut picked = Vec::with_capacity(n);
    for i in 0..n {
        let j = i + rng.below((len - i) as u64) as usize;
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        picked.push(at_j);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// The generator `sample` draws from for a given user seed.
pub fn sample_rng(seed: u64) -> Rng {
    Rng::new(derive_seed(seed, SAMPLE_LABEL))
}

/// Uniform sample without replacement, in original order.
pub fn sample<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>> {
    let idx = sample_indices(items.len(), n, &mut sample_rng(seed))?;
    Ok(idx.into_iter().map(|i| items[i].clone()).collect())
}

pub fn sample_documents(corpus: &[Document], n: usize, seed: u64) -> Result<Vec<Document>> {
    if n == 0 {
        return Err(Error::InvalidParam("sample size must be >= 1".into()));
    }
    sample(corpus, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::new("d", "x", text)
    }

    fn texts(recs: &[SentenceRecord]) -> Vec<&str> {
        recs.iter().map(|r| r.text.as_str()).collect()
    }

    #[test]
    fn splits_on_terminal_periods() {
        let r = split_sentences(&doc("A b. C d."));
        assert_eq!(texts(&r), ["A b.", "C d."]);
        assert_eq!(r[0].sent_id, "d#0");
        assert_eq!(r[1].idx, 1);
    }

    #[test]
    fn abbreviation_guard() {
        let r = split_sentences(&doc("Dr. Smith ran. He won!"));
        assert_eq!(texts(&r), ["Dr. Smith ran.", "He won!"]);
        let r = split_sentences(&doc("See e.g. Table 3 here. Then J. Doe left."));
        assert_eq!(texts(&r), ["See e.g. Table 3 here.", "Then J. Doe left."]);
    }

    #[test]
    fn no_terminal_punctuation_is_one_sentence() {
        let r = split_sentences(&doc("no terminal punctuation"));
        assert_eq!(texts(&r), ["no terminal punctuation"]);
    }

    #[test]
    fn empty_text_gives_no_records() {
        assert!(split_sentences(&doc("   \n\t ")).is_empty());
        assert!(split_sentences(&doc("")).is_empty());
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        let r = split_sentences(&doc("It was 3 p.m. today. Fine"));
        assert_eq!(texts(&r), ["It was 3 p.m. today.", "Fine"]);
    }

    #[test]
    fn quotes_and_closers() {
        let r = split_sentences(&doc("He said \"stop.\" Then \"Go!\" she said?! \"Yes.\""));
        assert_eq!(
            texts(&r),
            ["He said \"stop.\"", "Then \"Go!\" she said?!", "\"Yes.\""]
        );
    }

    #[test]
    fn token_counts_are_whitespace_tokens() {
        let r = split_sentences(&doc("One two three. Four five."));
        assert_eq!(r[0].token_count, 3);
        assert_eq!(r[1].token_count, 2);
    }

    #[test]
    fn tokenize_modes() {
        assert_eq!(
            tokenize("The CAT, 42 sat.", TokenizeMode::Analysis),
            ["the", "cat", "sat"]
        );
        assert_eq!(
            tokenize("The CAT, 42 sat.", TokenizeMode::Sequence),
            ["The", "CAT,", "42", "sat."]
        );
        assert!(tokenize("", TokenizeMode::Analysis).is_empty());
        assert!(tokenize("", TokenizeMode::Sequence).is_empty());
        assert_eq!(
            tokenize("-- (Über) ... 1,000 ¾", TokenizeMode::Analysis),
            ["über", "1,000"]
        );
    }

    fn words(n: usize, prefix: &str) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn small_doc_packs_into_one_sequence() {
        let d = Document::new("d1", "x", words(10, "w"));
        let seqs = pack_sequences(&[d], 512, 1).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].tokens.len(), 10);
        assert_eq!(seqs[0].seq_id, "d1:0");
    }

    #[test]
    fn greedy_packing_matches_hand_simulation() {
        // 400 + 400 > 512 and 400 + 230 > 512, so each sentence stands alone.
        let text = format!(
            "{}. {}. {}.",
            words(400, "a"),
            format!("B{}", words(400, "b")),
            format!("C{}", words(230, "c"))
        );
        let d = Document::new("d1", "x", text);
        let seqs = pack_sequences(&[d], 512, 1).unwrap();
        let lens: Vec<usize> = seqs.iter().map(|s| s.tokens.len()).collect();
        assert_eq!(lens, [400, 400, 230]);

        // 100 + 300 fits, + 200 does not; 200 + 50 fits.
        let text = format!(
            "{}. B{}. C{}. D{}.",
            words(100, "a"),
            words(300, "b"),
            words(200, "c"),
            words(50, "d")
        );
        let seqs = pack_sequences(&[Document::new("d2", "x", text)], 512, 1).unwrap();
        let lens: Vec<usize> = seqs.iter().map(|s| s.tokens.len()).collect();
        assert_eq!(lens, [400, 250]);
    }

    #[test]
    fn overlong_sentence_truncates_reproducibly() {
        let d = Document::new("long", "x", words(600, "t"));
        let a = pack_sequences(std::slice::from_ref(&d), 512, 99).unwrap();
        let b = pack_sequences(std::slice::from_ref(&d), 512, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].tokens.len(), 512);
        let first = a[0].tokens[0].as_str();
        assert!(first == "t0" || first == "t88");
        // both sides are reachable across seeds
        let mut sides = HashSet::new();
        for seed in 0..32 {
            let s = pack_sequences(std::slice::from_ref(&d), 512, seed).unwrap();
            sides.insert(s[0].tokens[0].clone());
        }
        assert_eq!(sides.len(), 2);
    }

    #[test]
    fn sentinel_is_escaped_when_packing() {
        let d = Document::new("m", "x", "a <mask> b");
        let s = pack_sequences(&[d], 16, 0).unwrap();
        assert_eq!(s[0].tokens, ["a", ESCAPED_MASK_TOKEN, "b"]);
    }

    #[test]
    fn zero_max_len_rejected() {
        assert!(pack_sequences(&[doc("a")], 0, 0).is_err());
    }

    fn recs(texts: &[&str]) -> Vec<SentenceRecord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| SentenceRecord::new("d", i, t))
            .collect()
    }

    #[test]
    fn dedup_keeps_first() {
        let out = dedup_sentences(&recs(&["a", "b", "a"]));
        assert_eq!(texts(&out), ["a", "b"]);
        assert_eq!(out[0].idx, 0);
        let distinct = recs(&["x", "y", "z"]);
        assert_eq!(dedup_sentences(&distinct), distinct);
        let out = dedup_sentences(&recs(&[" a ", "a"]));
        assert_eq!(out.len(), 1);
    }

    fn corpus(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document::new(format!("d{i}"), "x", format!("text {i}")))
            .collect()
    }

    #[test]
    fn full_sample_is_the_corpus() {
        let c = corpus(5);
        assert_eq!(sample_documents(&c, 5, 3).unwrap(), c);
    }

    #[test]
    fn oversized_sample_errors() {
        assert!(matches!(
            sample_documents(&corpus(3), 4, 0),
            Err(Error::SampleTooLarge {
                requested: 4,
                available: 3
            })
        ));
    }

    /// Dense Fisher–Yates prefix over an explicit index array.
    fn fisher_yates_prefix(len: usize, n: usize, rng: &mut Rng) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = i + rng.below((len - i) as u64) as usize;
            idx.swap(i, j);
        }
        let mut out = idx[..n].to_vec();
        out.sort_unstable();
        out
    }

    #[test]
    fn sample_matches_dense_fisher_yates_oracle() {
        let c = corpus(5);
        let got = sample_documents(&c, 2, 7).unwrap();
        let want: Vec<Document> = fisher_yates_prefix(5, 2, &mut sample_rng(7))
            .into_iter()
            .map(|i| c[i].clone())
            .collect();
        assert_eq!(got, want);
        assert_eq!(got, sample_documents(&c, 2, 7).unwrap());
        for seed in 0..200 {
            for (len, n) in [(10, 3), (50, 50), (100, 1), (33, 17)] {
                assert_eq!(
                    sample_indices(len, n, &mut sample_rng(seed)).unwrap(),
                    fisher_yates_prefix(len, n, &mut sample_rng(seed))
                );
            }
        }
    }
}
