//! Pipeline configuration. Every default is the operating point of the
//! original adaptive-pretraining setup; desk-scale runs override them.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_MAX_LEN;
use crate::embed::{DEFAULT_DIM, DEFAULT_MAX_VOCAB};
use crate::error::{Error, Result};
use crate::lm::{DEFAULT_ALPHA, DEFAULT_HOLDOUT_FRACTION, DEFAULT_ORDER};
use crate::mask::{DEFAULT_EPOCHS, DEFAULT_MASK_PROB};
use crate::plan::DAPT_STEPS;
use crate::select::{Method, DEFAULT_K};
use crate::vocab::{DEFAULT_SAMPLE_DOCS, DEFAULT_VOCAB_K};

/// Size of the deduplicated domain sentence pool searched for neighbors.
pub const DEFAULT_POOL_SENTENCES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Generate the bundled synthetic mini-corpus into `out_dir/input`.
    pub demo: bool,
    pub domains: Vec<DomainSource>,
    /// Domain whose sentences form the candidate pool; first domain if unset.
    pub pool_domain: Option<String>,
    pub task: Option<PathBuf>,
    pub curated: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub vocab_k: usize,
    pub vocab_sample_docs: usize,
    pub pool_sentences: usize,
    pub method: Method,
    pub k: usize,
    pub dump_neighbors: usize,
    pub dim: usize,
    pub max_vocab: usize,
    pub max_len: usize,
    pub mask_prob: f64,
    pub epochs: u32,
    pub lm_order: usize,
    pub lm_alpha: f64,
    pub holdout_fraction: f64,
    pub dapt_steps: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            seed: 0,
            demo: false,
            domains: Vec::new(),
            pool_domain: None,
            task: None,
            curated: None,
            stopwords: None,
            vocab_k: DEFAULT_VOCAB_K,
            vocab_sample_docs: DEFAULT_SAMPLE_DOCS,
            pool_sentences: DEFAULT_POOL_SENTENCES,
            method: Method::Knn,
            k: DEFAULT_K,
            dump_neighbors: 5,
            dim: DEFAULT_DIM,
            max_vocab: DEFAULT_MAX_VOCAB,
            max_len: DEFAULT_MAX_LEN,
            mask_prob: DEFAULT_MASK_PROB,
            epochs: DEFAULT_EPOCHS,
            lm_order: DEFAULT_ORDER,
            lm_alpha: DEFAULT_ALPHA,
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            dapt_steps: DAPT_STEPS,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(source: &str, text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e.line(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_k", self.vocab_k),
            ("vocab_sample_docs", self.vocab_sample_docs),
            ("pool_sentences", self.pool_sentences),
            ("k", self.k),
            ("dim", self.dim),
            ("max_vocab", self.max_vocab),
            ("max_len", self.max_len),
            ("lm_order", self.lm_order),
            ("epochs", self.epochs as usize),
            ("dapt_steps", self.dapt_steps as usize),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParam(format!("`{name}` must be >= 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::InvalidParam("`mask_prob` must be in [0, 1]".into()));
        }
        if !(self.lm_alpha > 0.0 && self.lm_alpha.is_finite()) {
            return Err(Error::InvalidParam("`lm_alpha` must be positive".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidParam("`holdout_fraction` must be in (0, 1)".into()));
        }
        if self.dim > crate::embed::MAX_DIM {
            return Err(Error::InvalidParam("`dim` too large".into()));
        }
        Ok(())
    }
}
