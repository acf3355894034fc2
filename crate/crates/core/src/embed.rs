//! Bag-of-words sentence embedder: TF-IDF weights pushed through a signed
//! random projection into a shared dense space, L2-normalized.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, SentenceRecord, TokenizeMode};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, Rng};

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_MAX_VOCAB: usize = 20_000;

/// Upper bound accepted when loading a model file.
pub const MAX_DIM: usize = 1 << 16;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Anything that maps text into the shared space. Two matrices are only
/// comparable when produced by embedders with the same fingerprint.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn fingerprint(&self) -> &str;
    /// `None` when no in-vocabulary term survives (the all-zero row).
    fn embed_text(&self, text: &str) -> Option<Vec<f32>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Each term row has entries `±1/sqrt(dim)`, signs drawn from a stream
    /// keyed by `(seed, term)`.
    Random,
    /// Row `i` is the unit vector `e_i`; requires `dim == |vocab|`.
    Identity,
}

#[derive(Debug, Clone)]
pub struct EmbedderModel {
    terms: Vec<String>,
    df: Vec<u64>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
    rows: Vec<f32>,
    n_sentences: usize,
    dim: usize,
    seed: u64,
    projection: Projection,
    fitted_on: String,
    fingerprint: String,
}

/// On-disk form; the projection is regenerated on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderModelFile {
    pub format: String,
    pub dim: usize,
    pub seed: u64,
    pub projection: Projection,
    pub n_sentences: usize,
    pub fitted_on: String,
    pub fingerprint: String,
    pub vocab: Vec<(String, u64)>,
}

const MODEL_FORMAT: &str = "tfidf-signed-projection/1";

pub fn idf(n: usize, df: u64) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn random_row(term: &str, seed: u64, dim: usize, out: &mut Vec<f32>) {
    let scale = 1.0 / (dim as f64).sqrt();
    let mut rng = Rng::for_key(seed, term);
    out.extend((0..dim).map(|_| if rng.coin() { scale as f32 } else { -scale as f32 }));
}

fn corpus_fingerprint(sentences: &[SentenceRecord]) -> String {
    let mut h = Vec::new();
    for s in sentences {
        h.extend_from_slice(&fnv1a64(s.text.as_bytes()).to_le_bytes());
    }
    format!("{:016x}", fnv1a64(&h))
}

impl EmbedderModel {
    pub fn fit(sentences: &[SentenceRecord], dim: usize, max_vocab: usize, seed: u64) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Empty("embedder training corpus"));
        }
        if dim == 0 || max_vocab == 0 {
            return Err(Error::InvalidParam("dim and max_vocab must be >= 1".into()));
        }
        let df = sentences
            .par_iter()
            .fold(HashMap::<String, u64>::new, |mut acc, s| {
                let mut toks = tokenize(&s.text, TokenizeMode::Analysis);
                toks.sort_unstable();
                toks.dedup();
                for t in toks {
                    *acc.entry(t).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (t, c) in b {
                    *a.entry(t).or_insert(0) += c;
                }
                a
            });
        let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_vocab);
        Self::assemble(
            ranked,
            sentences.len(),
            dim,
            seed,
            Projection::Random,
            corpus_fingerprint(sentences),
        )
    }

    fn assemble(
        vocab: Vec<(String, u64)>,
        n_sentences: usize,
        dim: usize,
        seed: u64,
        projection: Projection,
        fitted_on: String,
    ) -> Result<Self> {
        if projection == Projection::Identity && dim != vocab.len() {
            return Err(Error::InvalidParam(format!(
                "identity projection needs dim == vocab size ({} != {})",
                dim,
                vocab.len()
            )));
        }
        let (terms, df): (Vec<String>, Vec<u64>) = vocab.into_iter().unzip();
        let idf_vals = df.iter().map(|&d| idf(n_sentences, d)).collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut rows = Vec::with_capacity(terms.len() * dim);
        for (i, t) in terms.iter().enumerate() {
            match projection {
                Projection::Random => random_row(t, seed, dim, &mut rows),
                Projection::Identity => rows.extend((0..dim).map(|j| if i == j { 1.0 } else { 0.0 })),
            }
        }
        let mut model = EmbedderModel {
            terms,
            df,
            idf: idf_vals,
            index,
            rows,
            n_sentences,
            dim,
            seed,
            projection,
            fitted_on,
            fingerprint: String::new(),
        };
        model.fingerprint = model.compute_fingerprint();
        Ok(model)
    }

    fn compute_fingerprint(&self) -> String {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_FORMAT.as_bytes());
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.push(self.projection as u8);
        buf.extend_from_slice(&(self.n_sentences as u64).to_le_bytes());
        buf.extend_from_slice(self.fitted_on.as_bytes());
        for (t, d) in self.terms.iter().zip(&self.df) {
            buf.extend_from_slice(t.as_bytes());
            buf.push(0);
            buf.extend_from_slice(&d.to_le_bytes());
        }
        format!("{:016x}", fnv1a64(&buf))
    }

    /// Same vocabulary, projection replaced by the identity. Test hook for
    /// checking the geometry of raw TF-IDF bags.
    pub fn with_identity_projection(&self) -> Result<Self> {
        Self::assemble(
            self.vocab(),
            self.n_sentences,
            self.terms.len(),
            self.seed,
            Projection::Identity,
            self.fitted_on.clone(),
        )
    }

    pub fn vocab(&self) -> Vec<(String, u64)> {
        self.terms.iter().cloned().zip(self.df.iter().copied()).collect()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    pub fn projection_row(&self, term: &str) -> Option<&[f32]> {
        self.index
            .get(term)
            .map(|&i| &self.rows[i * self.dim..(i + 1) * self.dim])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_file(&self) -> EmbedderModelFile {
        EmbedderModelFile {
            format: MODEL_FORMAT.to_string(),
            dim: self.dim,
            seed: self.seed,
            projection: self.projection,
            n_sentences: self.n_sentences,
            fitted_on: self.fitted_on.clone(),
            fingerprint: self.fingerprint.clone(),
            vocab: self.vocab(),
        }
    }

    pub fn from_file(f: EmbedderModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::InvalidParam(format!("unknown model format `{}`", f.format)));
        }
        if f.dim == 0 || f.n_sentences == 0 {
            return Err(Error::InvalidParam("model dim and n_sentences must be >= 1".into()));
        }
        if f.dim > MAX_DIM || f.dim.checked_mul(f.vocab.len()).is_none_or(|n| n > (1 << 27)) {
            return Err(Error::InvalidParam("model projection too large".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (t, _) in &f.vocab {
            if !seen.insert(t.as_str()) {
                return Err(Error::InvalidParam(format!("duplicate vocabulary term `{t}`")));
            }
        }
        let m = Self::assemble(f.vocab, f.n_sentences, f.dim, f.seed, f.projection, f.fitted_on)?;
        if m.fingerprint != f.fingerprint {
            return Err(Error::FingerprintMismatch {
                left: f.fingerprint,
                right: m.fingerprint,
            });
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: EmbedderModelFile =
            serde_json::from_str(s).map_err(|e| Error::parse("model", e.line(), e.to_string()))?;
        Self::from_file(f)
    }
}

impl Embedder for EmbedderModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn embed_text(&self, text: &str) -> Option<Vec<f32>> {
        // term index -> raw count; ordered so accumulation is reproducible
        let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
        for tok in tokenize(text, TokenizeMode::Analysis) {
            if let Some(&i) = self.index.get(&tok) {
                *tf.entry(i).or_insert(0) += 1;
            }
        }
        let mut acc = vec![0f64; self.dim];
        for (&i, &count) in &tf {
            let w = f64::from(count) * self.idf[i];
            let row = &self.rows[i * self.dim..(i + 1) * self.dim];
            for (a, &r) in acc.iter_mut().zip(row) {
                *a += w * f64::from(r);
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(acc.into_iter().map(|x| (x / norm) as f32).collect())
    }
}

/// Row-major `n x dim` float32 matrix of unit (or all-zero) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
    /// Fingerprint of the embedder that produced the rows, if known.
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub fingerprint: Option<String>,
    pub rows: usize,
    pub dim: usize,
    pub zero_rows: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadEmbedding("dim must be >= 1".into()));
        }
        if ids.len().checked_mul(dim) != Some(data.len()) {
            return Err(Error::BadEmbedding(format!(
                "{} ids x dim {} != {} values",
                ids.len(),
                dim,
                data.len()
            )));
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            data,
            fingerprint: None,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&x| x == 0.0)
    }

    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_zero_row(i)).collect()
    }

    pub fn meta(&self) -> EmbeddingMeta {
        EmbeddingMeta {
            fingerprint: self.fingerprint.clone(),
            rows: self.len(),
            dim: self.dim,
            zero_rows: self.zero_rows().into_iter().map(|i| self.ids[i].clone()).collect(),
        }
    }

    /// `EMB1`, u32 rows, u32 dim, then row-major little-endian float32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.data.len() * 4);
        out.extend_from_slice(EMB_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes the binary payload; row ids come from the sidecar.
    pub fn from_bytes(bytes: &[u8], ids: Vec<String>) -> Result<Self> {
        let (rows, dim, data) = decode_emb(bytes)?;
        if rows != ids.len() {
            return Err(Error::BadEmbedding(format!(
                "{rows} rows but {} ids in sidecar",
                ids.len()
            )));
        }
        Self::new(ids, dim, data)
    }

    /// One id per line.
    pub fn ids_text(&self) -> String {
        let mut s = String::new();
        for id in &self.ids {
            s.push_str(id);
            s.push('\n');
        }
        s
    }
}

/// Parses an `EMB1` payload into `(rows, dim, values)`.
pub fn decode_emb(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 12 {
        return Err(Error::BadEmbedding("truncated header".into()));
    }
    if &bytes[..4] != EMB_MAGIC {
        return Err(Error::BadEmbedding("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::BadEmbedding("dim must be >= 1".into()));
    }
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::BadEmbedding("size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::BadEmbedding(format!(
            "expected {expected} bytes for {rows}x{dim}, got {}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(rows * dim);
    for chunk in bytes[12..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::BadEmbedding(format!("non-finite value at {}", data.len())));
        }
        data.push(v);
    }
    Ok((rows, dim, data))
}

pub fn parse_ids(text: &str) -> Vec<String> {
    text.lines().map(str::to_string).collect()
}

/// Embeds every sentence; rows depend only on (model, sentence).
pub fn embed_batch<E: Embedder + Sync>(model: &E, sentences: &[SentenceRecord]) -> EmbeddingMatrix {
    let dim = model.dim();
    let rows: Vec<Vec<f32>> = sentences
        .par_iter()
        .map(|s| model.embed_text(&s.text).unwrap_or_else(|| vec![0.0; dim]))
        .collect();
    EmbeddingMatrix {
        ids: sentences.iter().map(|s| s.sent_id.clone()).collect(),
        dim,
        data: rows.concat(),
        fingerprint: Some(model.fingerprint().to_string()),
    }
}
