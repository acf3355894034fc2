//! Additive-smoothing n-gram language models and the cross-domain loss
//! matrix built from them.
//!
//! Each document is tokenized (analysis mode) and padded with `order - 1`
//! start symbols and `order - 1` end symbols. Every non-start position is a
//! prediction event with probability
//!
//! ```text
//! P(w | ctx) = (c(ctx, w) + alpha) / (c(ctx) + alpha * (V + 1))
//! ```
//!
//! where `V` counts the distinct predicted symbols seen in training and the
//! extra class is UNK. Unseen contexts therefore fall back to the uniform
//! distribution over `V + 1` classes.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document, TokenizeMode};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.1;

const BOS: u32 = u32::MAX - 1;
const UNK: u32 = u32::MAX;
const EOS_TOKEN: &str = "</s>";

type Context = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramLM {
    pub domain: String,
    pub order: usize,
    pub alpha: f64,
    vocab: HashMap<String, u32>,
    counts: HashMap<Context, HashMap<u32, u64>>,
    totals: HashMap<Context, u64>,
}

fn padded_events<'a>(
    tokens: &'a [String],
    order: usize,
    mut id_of: impl FnMut(&'a str) -> u32,
) -> Vec<(Context, u32)> {
    let mut ids: Vec<u32> = vec![BOS; order - 1];
    ids.extend(tokens.iter().map(|t| id_of(t)));
    if order > 1 {
        let eos = id_of(EOS_TOKEN);
        ids.extend(std::iter::repeat_n(eos, order - 1));
    }
    (order - 1..ids.len())
        .map(|i| (ids[i + 1 - order..i].to_vec(), ids[i]))
        .collect()
}

/// Sum of values after sorting, added pairwise so the result does not depend
/// on input order.
pub fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    fn pairwise(v: &[f64]) -> f64 {
        if v.len() <= 8 {
            return v.iter().fold(0.0, |a, b| a + b);
        }
        let mid = v.len() / 2;
        pairwise(&v[..mid]) + pairwise(&v[mid..])
    }
    pairwise(&values)
}

pub fn train_ngram(domain: &str, corpus: &[Document], order: usize, alpha: f64) -> Result<NgramLM> {
    if order == 0 {
        return Err(Error::InvalidParam("order must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!("alpha must be positive, got {alpha}")));
    }
    if corpus.is_empty() {
        return Err(Error::Empty("language model training corpus"));
    }
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut counts: HashMap<Context, HashMap<u32, u64>> = HashMap::new();
    let mut totals: HashMap<Context, u64> = HashMap::new();
    for doc in corpus {
        let toks = tokenize(&doc.text, TokenizeMode::Analysis);
        let events = padded_events(&toks, order, |t| {
            let next = vocab.len() as u32;
            *vocab.entry(t.to_string()).or_insert(next)
        });
        for (ctx, w) in events {
            *counts.entry(ctx.clone()).or_default().entry(w).or_insert(0) += 1;
            *totals.entry(ctx).or_insert(0) += 1;
        }
    }
    if totals.is_empty() {
        return Err(Error::Empty("language model training corpus (no tokens)"));
    }
    Ok(NgramLM {
        domain: domain.to_string(),
        order,
        alpha,
        vocab,
        counts,
        totals,
    })
}

impl NgramLM {
    /// Distinct predicted symbols seen in training (UNK excluded).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn id(&self, tok: &str) -> u32 {
        self.vocab.get(tok).copied().unwrap_or(UNK)
    }

    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let total = self.totals.get(ctx).copied().unwrap_or(0) as f64;
        let c = self
            .counts
            .get(ctx)
            .and_then(|m| m.get(&w))
            .copied()
            .unwrap_or(0) as f64;
        (c + self.alpha) / (total + self.alpha * (self.vocab.len() as f64 + 1.0))
    }

    /// `P(word | context)`; `context` must hold `order - 1` tokens, with
    /// `None` standing for the start symbol.
    pub fn prob(&self, context: &[Option<&str>], word: &str) -> f64 {
        let ctx: Vec<u32> = context
            .iter()
            .map(|t| t.map_or(BOS, |t| self.id(t)))
            .collect();
        self.prob_ids(&ctx, self.id(word))
    }

    /// Total probability mass over vocabulary plus UNK for a context.
    pub fn context_mass(&self, context: &[Option<&str>]) -> f64 {
        let ctx: Vec<u32> = context
            .iter()
            .map(|t| t.map_or(BOS, |t| self.id(t)))
            .collect();
        let mut ids: Vec<u32> = self.vocab.values().copied().collect();
        ids.push(UNK);
        order_free_sum(ids.into_iter().map(|w| self.prob_ids(&ctx, w)).collect())
    }

    /// Observed contexts, rendered with `None` for start symbols.
    pub fn contexts(&self) -> Vec<Vec<Option<String>>> {
        let names: HashMap<u32, &str> = self.vocab.iter().map(|(t, &i)| (i, t.as_str())).collect();
        let mut out: Vec<Vec<Option<String>>> = self
            .totals
            .keys()
            .map(|ctx| {
                ctx.iter()
                    .map(|i| names.get(i).map(|s| s.to_string()))
                    .collect()
            })
            .collect();
        out.sort();
        out
    }

    fn neg_log_probs(&self, doc: &Document) -> Vec<f64> {
        let toks = tokenize(&doc.text, TokenizeMode::Analysis);
        padded_events(&toks, self.order, |t| self.id(t))
            .into_iter()
            .map(|(ctx, w)| -self.prob_ids(&ctx, w).ln())
            .collect()
    }
}

/// Mean negative log-likelihood per predicted symbol, in nats.
pub fn eval_loss(lm: &NgramLM, heldout: &[Document]) -> Result<f64> {
    let values: Vec<f64> = heldout
        .par_iter()
        .map(|d| lm.neg_log_probs(d))
        .collect::<Vec<_>>()
        .concat();
    if values.is_empty() {
        return Err(Error::Empty("held-out sample"));
    }
    let n = values.len() as f64;
    Ok(order_free_sum(values) / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub model_domains: Vec<String>,
    pub eval_domains: Vec<String>,
    /// `loss[i][j]`: model trained on domain `i`, evaluated on domain `j`.
    pub loss: Vec<Vec<f64>>,
}

impl LossMatrix {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\\eval");
        for d in &self.eval_domains {
            out.push('\t');
            out.push_str(d);
        }
        out.push('\n');
        for (d, row) in self.model_domains.iter().zip(&self.loss) {
            out.push_str(d);
            for v in row {
                let _ = write!(out, "\t{v:.4}");
            }
            out.push('\n');
        }
        out
    }

    /// True when every row's strict minimum sits on the diagonal.
    pub fn diagonal_dominant(&self) -> bool {
        self.loss.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &v)| j == i || row[i] < v)
        })
    }
}

/// Train/held-out split of one domain's documents.
pub fn split_holdout(
    domain: &str,
    docs: &[Document],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = docs.len();
    let n_hold = ((n as f64 * fraction).round() as usize).max(1);
    if n_hold >= n {
        return Err(Error::Unsplittable {
            domain: domain.to_string(),
            docs: n,
            fraction,
        });
    }
    // split stream ignores the domain name so identical corpora split alike
    let mut rng = Rng::new(derive_seed(seed, "lm/split"));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    let mut hold: Vec<usize> = idx[..n_hold].to_vec();
    let mut train: Vec<usize> = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    let pick = |ix: &[usize]| ix.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    Ok((pick(&train), pick(&hold)))
}

pub fn cross_domain_matrix(
    domains: &[(String, Vec<Document>)],
    order: usize,
    alpha: f64,
    holdout_fraction: f64,
    seed: u64,
) -> Result<LossMatrix> {
    if domains.len() < 2 {
        return Err(Error::TooFew {
            what: "domains",
            needed: 2,
            got: domains.len(),
        });
    }
    let splits = domains
        .iter()
        .map(|(name, docs)| split_holdout(name, docs, holdout_fraction, seed))
        .collect::<Result<Vec<_>>>()?;
    let models = domains
        .par_iter()
        .zip(splits.par_iter())
        .map(|((name, _), (train, _))| train_ngram(name, train, order, alpha))
        .collect::<Result<Vec<_>>>()?;
    let loss = models
        .par_iter()
        .map(|m| {
            splits
                .iter()
                .map(|(_, hold)| eval_loss(m, hold))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = domains.iter().map(|(n, _)| n.clone()).collect();
    Ok(LossMatrix {
        model_domains: names.clone(),
        eval_domains: names,
        loss,
    })
}
