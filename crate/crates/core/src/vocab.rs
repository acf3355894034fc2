//! Top-K domain vocabularies and their pairwise overlap.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document, TokenizeMode};
use crate::error::{Error, Result};
use crate::rng::fnv1a64;

pub const DEFAULT_VOCAB_K: usize = 10_000;
pub const DEFAULT_SAMPLE_DOCS: usize = 50_000;
/// Sample size for domains with much shorter documents (reviews).
pub const SHORT_DOC_SAMPLE_DOCS: usize = 150_000;

/// Bundled English stopword list, one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
/// FNV-1a 64 of [`DEFAULT_STOPWORDS`]; changes to the list must update this.
pub const DEFAULT_STOPWORDS_FNV1A64: u64 = 0x0202_4cde_651f_bd52;

pub type Stopwords = HashSet<String>;

pub fn parse_stopwords(text: &str) -> Stopwords {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

pub fn default_stopwords() -> Stopwords {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// Unigram counts; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermCounts(pub HashMap<String, u64>);

impl TermCounts {
    pub fn add_text(&mut self, text: &str, stopwords: &Stopwords) {
        for tok in tokenize(text, TokenizeMode::Analysis) {
            if !stopwords.contains(&tok) {
                *self.0.entry(tok).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(mut self, other: TermCounts) -> TermCounts {
        let (mut big, small) = if self.0.len() >= other.0.len() {
            (std::mem::take(&mut self.0), other.0)
        } else {
            (other.0, std::mem::take(&mut self.0))
        };
        for (t, c) in small {
            *big.entry(t).or_insert(0) += c;
        }
        TermCounts(big)
    }

    pub fn from_docs(docs: &[Document], stopwords: &Stopwords) -> TermCounts {
        docs.par_iter()
            .fold(TermCounts::default, |mut acc, d| {
                acc.add_text(&d.text, stopwords);
                acc
            })
            .reduce(TermCounts::default, TermCounts::merge)
    }

    /// Entries by descending count, ties broken by ascending term.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.0.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainVocabulary {
    pub domain: String,
    pub k: usize,
    /// Frequency-descending.
    pub terms: Vec<String>,
    pub counts: Vec<u64>,
    pub sample_docs: usize,
}

impl DomainVocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `term\tcount` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (t, c) in self.terms.iter().zip(&self.counts) {
            let _ = writeln!(out, "{t}\t{c}");
        }
        out
    }

    /// Reads a vocabulary file back. Order must be frequency-descending.
    pub fn from_tsv(domain: &str, k: usize, text: &str) -> Result<DomainVocabulary> {
        let mut terms = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (term, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(domain, n + 1, "expected `term<TAB>count`"))?;
            if term.is_empty() {
                return Err(Error::parse(domain, n + 1, "empty term"));
            }
            let count: u64 = count
                .parse()
                .map_err(|e| Error::parse(domain, n + 1, format!("bad count: {e}")))?;
            if counts.last().is_some_and(|&prev| prev < count) {
                return Err(Error::parse(domain, n + 1, "counts not descending"));
            }
            terms.push(term.to_string());
            counts.push(count);
        }
        if terms.len() > k {
            return Err(Error::parse(
                domain,
                k + 1,
                format!("{} terms exceed k = {k}", terms.len()),
            ));
        }
        let unique: HashSet<&str> = terms.iter().map(String::as_str).collect();
        if unique.len() != terms.len() {
            return Err(Error::parse(domain, 0, "duplicate term"));
        }
        Ok(DomainVocabulary {
            domain: domain.to_string(),
            k,
            terms,
            counts,
            sample_docs: 0,
        })
    }
}

pub fn build_vocabulary(
    domain: &str,
    sample: &[Document],
    k: usize,
    stopwords: &Stopwords,
) -> Result<DomainVocabulary> {
    if k == 0 {
        return Err(Error::InvalidParam("vocabulary k must be >= 1".into()));
    }
    let counts = TermCounts::from_docs(sample, stopwords);
    let (terms, counts) = counts
        .ranked()
        .into_iter()
        .take(k)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    Ok(DomainVocabulary {
        domain: domain.to_string(),
        k,
        terms,
        counts,
        sample_docs: sample.len(),
    })
}

/// Percentage of shared terms, `100 * |a ∩ b| / k`, where `k` is the
/// vocabulary size. Undersized vocabularies use their larger cardinality as
/// the denominator so that `overlap(a, a)` is always 100.
pub fn overlap(a: &DomainVocabulary, b: &DomainVocabulary) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::VocabSizeMismatch {
            left: a.k,
            right: b.k,
        });
    }
    let denom = a.len().max(b.len());
    if denom == 0 {
        return Ok(100.0);
    }
    let set: HashSet<&str> = a.terms.iter().map(String::as_str).collect();
    let shared = b.terms.iter().filter(|t| set.contains(t.as_str())).count();
    Ok(100.0 * shared as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub domains: Vec<String>,
    pub pct: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    pub fn index_of(&self, domain: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == domain)
    }

    /// Header row and first column carry domain names; one decimal place.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("domain");
        for d in &self.domains {
            out.push('\t');
            out.push_str(d);
        }
        out.push('\n');
        for (d, row) in self.domains.iter().zip(&self.pct) {
            out.push_str(d);
            for v in row {
                let _ = write!(out, "\t{v:.1}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn overlap_matrix(vocabs: &[DomainVocabulary]) -> Result<OverlapMatrix> {
    if vocabs.len() < 2 {
        return Err(Error::TooFew {
            what: "vocabularies",
            needed: 2,
            got: vocabs.len(),
        });
    }
    let pct = vocabs
        .iter()
        .map(|a| vocabs.iter().map(|b| overlap(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(OverlapMatrix {
        domains: vocabs.iter().map(|v| v.domain.clone()).collect(),
        pct,
    })
}

/// The domain sharing the least vocabulary with `target`; ties go to the
/// lexicographically smallest name.
pub fn pick_irrelevant_domain(m: &OverlapMatrix, target: &str) -> Result<String> {
    let t = m
        .index_of(target)
        .ok_or_else(|| Error::UnknownDomain(target.to_string()))?;
    if m.domains.len() < 2 {
        return Err(Error::TooFew {
            what: "domains",
            needed: 2,
            got: m.domains.len(),
        });
    }
    let best = (0..m.domains.len())
        .filter(|&j| j != t)
        .min_by(|&a, &b| {
            m.pct[t][a]
                .total_cmp(&m.pct[t][b])
                .then_with(|| m.domains[a].cmp(&m.domains[b]))
        })
        .expect("at least one other domain");
    Ok(m.domains[best].clone())
}

pub fn stopwords_checksum(text: &str) -> u64 {
    fnv1a64(text.as_bytes())
}
