//! Synthetic mini-corpus: four domains with distinct topical lexicons over a
//! shared function-word layer, plus a small task set and a curated pool
//! drawn from the same distribution as the task.

use std::collections::BTreeSet;

use crate::corpus::Document;
use crate::rng::{derive_seed, Rng};

pub const DEMO_DOMAINS: [&str; 4] = ["biomed", "cs", "news", "reviews"];
pub const POOL_DOMAIN: &str = "biomed";

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "in", "to", "a", "with", "was", "for", "is", "on", "by", "were", "that",
    "from", "at", "as", "this",
];
const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cl", "dr",
    "gr", "pl", "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "eo", "ou"];

fn suffixes(domain: &str) -> &'static [&'static str] {
    match domain {
        "biomed" => &["ase", "itis", "ine", "oma", "ocyte"],
        "cs" => &["ware", "net", "ix", "ops", "byte"],
        "news" => &["ton", "ville", "burg", "ard", "ham"],
        "reviews" => &["ful", "ish", "ly", "less", "some"],
        _ => &["or", "an", "el"],
    }
}

fn pick<'a>(rng: &mut Rng, items: &'a [&'a str]) -> &'a str {
    items[rng.below(items.len() as u64) as usize]
}

fn stem(rng: &mut Rng) -> String {
    let n = 2 + rng.below(2);
    (0..n).map(|_| format!("{}{}", pick(rng, ONSETS), pick(rng, VOWELS))).collect()
}

/// Deterministic lexicon of `n` distinct words for `label`.
fn lexicon(seed: u64, label: &str, n: usize, suffix: &[&str]) -> Vec<String> {
    let mut rng = Rng::new(derive_seed(seed, label));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = if suffix.is_empty() {
            stem(&mut rng)
        } else {
            format!("{}{}", stem(&mut rng), pick(&mut rng, suffix))
        };
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Skewed index: low indices are much more frequent.
fn zipfish(rng: &mut Rng, n: usize) -> usize {
    let u = rng.next_f64();
    ((u * u * u) * n as f64) as usize
}

struct Style {
    topic: Vec<String>,
    general: Vec<String>,
}

impl Style {
    fn new(seed: u64, domain: &str, general: &[String]) -> Self {
        Style {
            topic: lexicon(seed, &format!("demo/topic/{domain}"), 400, suffixes(domain)),
            general: general.to_vec(),
        }
    }

    fn sentence(&self, rng: &mut Rng, topic_limit: usize) -> String {
        let len = 8 + rng.below(11) as usize;
        let mut words: Vec<String> = Vec::with_capacity(len);
        for _ in 0..len {
            let r = rng.next_f64();
            let w = if r < 0.30 {
                pick(rng, FUNCTION_WORDS).to_string()
            } else if r < 0.78 {
                let lim = topic_limit.min(self.topic.len());
                self.topic[zipfish(rng, lim)].clone()
            } else if r < 0.97 {
                self.general[zipfish(rng, self.general.len())].clone()
            } else {
                format!("{}", 1 + rng.below(99))
            };
            words.push(w);
        }
        let mut first = words[0].chars();
        let head: String = first.next().map(|c| c.to_uppercase().collect::<String>()).unwrap_or_default();
        words[0] = head + first.as_str();
        let end = if rng.below(20) == 0 { "?" } else { "." };
        format!("{}{end}", words.join(" "))
    }

    fn document(&self, rng: &mut Rng, sentences: usize, topic_limit: usize) -> String {
        (0..sentences)
            .map(|_| self.sentence(rng, topic_limit))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn docs(seed: u64, domain: &str, style: &Style, n: usize, sents: (usize, usize), topic_limit: usize, tag: &str) -> Vec<Document> {
    let mut rng = Rng::new(derive_seed(seed, &format!("demo/docs/{tag}")));
    (0..n)
        .map(|i| {
            let s = sents.0 + rng.below((sents.1 - sents.0 + 1) as u64) as usize;
            Document::new(format!("{tag}-{i:05}"), domain, style.document(&mut rng, s, topic_limit))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MiniCorpus {
    /// `(domain, documents)`; the first entry is the candidate-pool domain.
    pub domains: Vec<(String, Vec<Document>)>,
    pub task: Vec<Document>,
    pub curated: Vec<Document>,
}

/// Builds the mini-corpus. The pool domain yields over 10^4 sentences and
/// the task set 300 one-sentence documents.
pub fn mini_corpus(seed: u64) -> MiniCorpus {
    let general = lexicon(seed, "demo/general", 300, &[]);
    let domains = DEMO_DOMAINS
        .iter()
        .map(|&d| {
            let style = Style::new(seed, d, &general);
            let n = if d == POOL_DOMAIN { 2600 } else { 500 };
            (d.to_string(), docs(seed, d, &style, n, (3, 6), 400, d))
        })
        .collect();
    // task text leans on the most frequent quarter of the pool lexicon
    let task_style = Style::new(seed, POOL_DOMAIN, &general);
    let task = docs(seed, "task", &task_style, 300, (1, 1), 100, "task");
    let curated = docs(seed, "curated", &task_style, 200, (2, 4), 100, "curated");
    MiniCorpus {
        domains,
        task,
        curated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{dedup_sentences, split_corpus};

    #[test]
    fn deterministic_and_large_enough() {
        let a = mini_corpus(1);
        let b = mini_corpus(1);
        assert_eq!(a.task, b.task);
        assert_eq!(a.domains[0].1, b.domains[0].1);
        let pool = dedup_sentences(&split_corpus(&a.domains[0].1));
        assert!(pool.len() >= 10_000, "{}", pool.len());
        assert!(split_corpus(&a.task).len() >= 200);
        assert_ne!(mini_corpus(2).task, a.task);
    }
}
