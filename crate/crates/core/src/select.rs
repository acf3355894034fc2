//! Exact cosine kNN over a flat index, random baseline selection, and
//! assembly of the augmented task corpus.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, SentenceRecord};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Operating points for neighbor counts.
pub const PAPER_K_VALUES: [usize; 3] = [50, 150, 500];
pub const DEFAULT_K: usize = 50;

const NORM_TOLERANCE: f64 = 1e-5;
const QUERY_BLOCK: usize = 16;
const CANDIDATE_BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Knn,
    Rand,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Rand => "rand",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Method::Knn),
            "rand" => Ok(Method::Rand),
            other => Err(Error::InvalidParam(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Neighbor {
    pub id: String,
    /// Cosine similarity; `None` for random draws.
    pub score: Option<f64>,
}

/// Sequential dot product accumulated in f64.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += f64::from(a[i]) * f64::from(b[i]);
    }
    s
}

/// Immutable exact-search index over non-zero embedding rows.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    /// Position of each row in ascending-id order; breaks score ties.
    id_rank: Vec<u32>,
    excluded: Vec<String>,
    fingerprint: Option<String>,
}

#[derive(Clone, Copy)]
struct Hit {
    score: f64,
    rank: u32,
    row: u32,
}

impl Hit {
    /// `Less` means `self` ranks ahead of `other`.
    fn order(&self, other: &Hit) -> Ordering {
        other
            .score
            .partial_cmp(&self.score)
            .unwrap_or(Ordering::Equal)
            .then(self.rank.cmp(&other.rank))
    }
}

impl PartialEq for Hit {
    fn eq(&self, other: &Self) -> bool {
        self.order(other) == Ordering::Equal
    }
}
impl Eq for Hit {}
impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Hit {
    // max-heap top is the worst kept hit
    fn cmp(&self, other: &Self) -> Ordering {
        self.order(other)
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Hit>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, hit: Hit) {
        if self.heap.len() < self.k {
            self.heap.push(hit);
        } else if let Some(worst) = self.heap.peek() {
            if hit.order(worst) == Ordering::Less {
                self.heap.pop();
                self.heap.push(hit);
            }
        }
    }

    fn into_sorted(self) -> Vec<Hit> {
        // ascending by Ord == best first
        self.heap.into_sorted_vec()
    }
}

pub fn build_index(emb: &EmbeddingMatrix) -> Result<FlatIndex> {
    if emb.is_empty() {
        return Err(Error::Empty("embedding matrix"));
    }
    if let Some(pos) = emb.data.iter().position(|v| v.is_nan()) {
        return Err(Error::BadEmbedding(format!(
            "NaN in row `{}`",
            emb.ids[pos / emb.dim]
        )));
    }
    let mut ids = Vec::with_capacity(emb.len());
    let mut data = Vec::with_capacity(emb.data.len());
    let mut excluded = Vec::new();
    for i in 0..emb.len() {
        if emb.is_zero_row(i) {
            excluded.push(emb.ids[i].clone());
        } else {
            ids.push(emb.ids[i].clone());
            data.extend_from_slice(emb.row(i));
        }
    }
    if ids.is_empty() {
        return Err(Error::Empty("embedding matrix (all rows zero)"));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]).then(a.cmp(&b)));
    let mut id_rank = vec![0u32; ids.len()];
    for (r, &row) in order.iter().enumerate() {
        id_rank[row] = r as u32;
    }
    Ok(FlatIndex {
        ids,
        dim: emb.dim,
        data,
        id_rank,
        excluded,
        fingerprint: emb.fingerprint.clone(),
    })
}

impl FlatIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    /// Ids of zero rows left out of the index.
    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn check_query(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::InvalidParam(format!(
                "query dim {} != index dim {}",
                q.len(),
                self.dim
            )));
        }
        let norm = dot(q, q).sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParam(format!("query norm {norm} is not 1")));
        }
        Ok(())
    }

    /// Blocked scan of a batch of queries; each result is best-first.
    fn scan(&self, queries: &[&[f32]], k: usize) -> Vec<Vec<Hit>> {
        let k = k.min(self.len());
        let mut tops: Vec<TopK> = queries.iter().map(|_| TopK::new(k)).collect();
        let mut start = 0;
        while start < self.len() {
            let end = (start + CANDIDATE_BLOCK).min(self.len());
            for (q, top) in queries.iter().zip(tops.iter_mut()) {
                for row in start..end {
                    top.offer(Hit {
                        score: dot(q, self.row(row)),
                        rank: self.id_rank[row],
                        row: row as u32,
                    });
                }
            }
            start = end;
        }
        tops.into_iter().map(TopK::into_sorted).collect()
    }

    fn to_neighbors(&self, hits: Vec<Hit>) -> Vec<Neighbor> {
        hits.into_iter()
            .map(|h| Neighbor {
                id: self.ids[h.row as usize].clone(),
                score: Some(h.score.clamp(-1.0, 1.0)),
            })
            .collect()
    }

    /// Exact top-`k` by cosine; ties go to the smaller id. A `k` larger than
    /// the index returns every row, ranked.
    pub fn knn_query(&self, q: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        self.check_query(q)?;
        let hits = self.scan(&[q], k).pop().unwrap_or_default();
        Ok(self.to_neighbors(hits))
    }

    /// Answers many queries; output order follows input order regardless of
    /// the thread count.
    pub fn knn_batch(&self, queries: &[&[f32]], k: usize) -> Result<Vec<Vec<Neighbor>>> {
        if k == 0 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        for q in queries {
            self.check_query(q)?;
        }
        let blocks: Vec<Vec<Vec<Hit>>> = queries
            .par_chunks(QUERY_BLOCK)
            .map(|block| self.scan(block, k))
            .collect();
        Ok(blocks
            .into_iter()
            .flatten()
            .map(|hits| self.to_neighbors(hits))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryNeighbors {
    pub query_id: String,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub queries: usize,
    pub unique_candidates: usize,
    pub total_pairs: usize,
    /// Task rows with no in-vocabulary terms; they cannot be queried.
    pub skipped_queries: Vec<String>,
    /// Domain rows left out of the index for the same reason.
    pub excluded_candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub k: usize,
    pub method: Method,
    pub per_query: Vec<QueryNeighbors>,
    /// Candidate ids in first-occurrence order, no duplicates.
    pub selected_pool: Vec<String>,
    pub stats: SelectionStats,
}

/// One line of `selection.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionLine {
    pub query_id: String,
    pub method: Method,
    pub k: usize,
    pub neighbors: Vec<Neighbor>,
}

fn first_occurrence_pool(per_query: &[QueryNeighbors]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for q in per_query {
        for n in &q.neighbors {
            if seen.insert(n.id.as_str()) {
                pool.push(n.id.clone());
            }
        }
    }
    pool
}

impl SelectionResult {
    fn from_per_query(
        k: usize,
        method: Method,
        per_query: Vec<QueryNeighbors>,
        skipped_queries: Vec<String>,
        excluded_candidates: Vec<String>,
    ) -> Self {
        let selected_pool = first_occurrence_pool(&per_query);
        let stats = SelectionStats {
            queries: per_query.len(),
            unique_candidates: selected_pool.len(),
            total_pairs: per_query.iter().map(|q| q.neighbors.len()).sum(),
            skipped_queries,
            excluded_candidates,
        };
        SelectionResult {
            k,
            method,
            per_query,
            selected_pool,
            stats,
        }
    }

    pub fn lines(&self) -> Vec<SelectionLine> {
        self.per_query
            .iter()
            .map(|q| SelectionLine {
                query_id: q.query_id.clone(),
                method: self.method,
                k: self.k,
                neighbors: q.neighbors.clone(),
            })
            .collect()
    }

    /// Rebuilds a result from parsed `selection.jsonl` lines.
    pub fn from_lines(lines: Vec<SelectionLine>) -> Result<Self> {
        let first = lines.first().ok_or(Error::Empty("selection"))?;
        let (k, method) = (first.k, first.method);
        if let Some(l) = lines.iter().find(|l| l.k != k || l.method != method) {
            return Err(Error::InvalidParam(format!(
                "query `{}` has k/method differing from the first line",
                l.query_id
            )));
        }
        let per_query = lines
            .into_iter()
            .map(|l| QueryNeighbors {
                query_id: l.query_id,
                neighbors: l.neighbors,
            })
            .collect();
        Ok(Self::from_per_query(k, method, per_query, Vec::new(), Vec::new()))
    }

    /// `pool.txt`: one id per line.
    pub fn pool_text(&self) -> String {
        let mut s = String::new();
        for id in &self.selected_pool {
            s.push_str(id);
            s.push('\n');
        }
        s
    }
}

fn check_fingerprints(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<()> {
    if a.fingerprint != b.fingerprint {
        let show = |f: &Option<String>| f.clone().unwrap_or_else(|| "<none>".into());
        return Err(Error::FingerprintMismatch {
            left: show(&a.fingerprint),
            right: show(&b.fingerprint),
        });
    }
    Ok(())
}

/// The `k` nearest domain sentences for every task sentence.
pub fn select_knn(task: &EmbeddingMatrix, domain: &EmbeddingMatrix, k: usize) -> Result<SelectionResult> {
    check_fingerprints(task, domain)?;
    if task.dim != domain.dim {
        return Err(Error::InvalidParam(format!(
            "task dim {} != domain dim {}",
            task.dim, domain.dim
        )));
    }
    let index = build_index(domain)?;
    let mut query_ids = Vec::new();
    let mut queries = Vec::new();
    let mut skipped = Vec::new();
    for i in 0..task.len() {
        if task.is_zero_row(i) {
            skipped.push(task.ids[i].clone());
        } else {
            query_ids.push(task.ids[i].clone());
            queries.push(task.row(i));
        }
    }
    let answers = index.knn_batch(&queries, k)?;
    let per_query = query_ids
        .into_iter()
        .zip(answers)
        .map(|(query_id, neighbors)| QueryNeighbors { query_id, neighbors })
        .collect();
    Ok(SelectionResult::from_per_query(
        k,
        Method::Knn,
        per_query,
        skipped,
        index.excluded().to_vec(),
    ))
}

/// `k` uniform draws with replacement from `pool` per query.
pub fn select_random(queries: &[String], pool: &[String], k: usize, seed: u64) -> Result<SelectionResult> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let seed = derive_seed(seed, "select/rand");
    let per_query = queries
        .par_iter()
        .map(|q| {
            let mut rng = Rng::for_key(seed, q);
            let neighbors = (0..k)
                .map(|_| Neighbor {
                    id: pool[rng.below(pool.len() as u64) as usize].clone(),
                    score: None,
                })
                .collect();
            QueryNeighbors {
                query_id: q.clone(),
                neighbors,
            }
        })
        .collect();
    Ok(SelectionResult::from_per_query(
        k,
        Method::Rand,
        per_query,
        Vec::new(),
        Vec::new(),
    ))
}

/// Side-by-side listing of each query and its top `n` neighbors.
pub fn dump_neighbors(
    sel: &SelectionResult,
    texts: &HashMap<&str, &str>,
    n: usize,
) -> String {
    let mut out = String::new();
    for q in &sel.per_query {
        let qt = texts.get(q.query_id.as_str()).copied().unwrap_or("");
        let _ = writeln!(out, "source\t{}\t{}", q.query_id, qt);
        for (rank, nb) in q.neighbors.iter().take(n).enumerate() {
            let t = texts.get(nb.id.as_str()).copied().unwrap_or("");
            let score = nb.score.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "  {}\t{}\t{}\t{}", rank + 1, score, nb.id, t);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Task,
    Knn,
    Rand,
    Curated,
}

impl From<Method> for Origin {
    fn from(m: Method) -> Self {
        match m {
            Method::Knn => Origin::Knn,
            Method::Rand => Origin::Rand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub sent_id: String,
    pub text: String,
    pub origin: Origin,
    /// First query that selected this candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<String>,
}

/// Task sentences followed by selected and curated extras, exact-deduped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentedCorpus {
    pub entries: Vec<CorpusEntry>,
}

impl AugmentedCorpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn task_sentences(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(|e| e.origin == Origin::Task)
    }

    pub fn candidate_sentences(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(|e| e.origin != Origin::Task)
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|e| e.origin == origin).count()
    }

    /// One document per entry, for sequence packing.
    pub fn to_documents(&self) -> Vec<Document> {
        self.entries
            .iter()
            .map(|e| {
                let origin = serde_json::to_value(e.origin).expect("origin serializes");
                Document::new(e.sent_id.clone(), origin.as_str().unwrap_or(""), e.text.clone())
            })
            .collect()
    }
}

pub fn assemble_corpus(
    task: &[SentenceRecord],
    selection: Option<&SelectionResult>,
    domain: &[SentenceRecord],
    curated: Option<&[SentenceRecord]>,
) -> Result<AugmentedCorpus> {
    let lookup: HashMap<&str, &SentenceRecord> =
        domain.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    let mut seen: HashSet<String> = HashSet::new();
    let mut entries = Vec::new();
    let mut push = |id: &str, text: &str, origin: Origin, via: Option<String>| {
        if seen.insert(text.trim().to_string()) {
            entries.push(CorpusEntry {
                sent_id: id.to_string(),
                text: text.to_string(),
                origin,
                via,
            });
        }
    };
    for s in task {
        push(&s.sent_id, &s.text, Origin::Task, None);
    }
    if let Some(sel) = selection {
        let mut via: HashMap<&str, &str> = HashMap::new();
        for q in &sel.per_query {
            for n in &q.neighbors {
                via.entry(n.id.as_str()).or_insert(q.query_id.as_str());
            }
        }
        for id in &sel.selected_pool {
            let rec = lookup
                .get(id.as_str())
                .ok_or_else(|| Error::DanglingId(id.clone()))?;
            let q = via.get(id.as_str()).ok_or_else(|| Error::DanglingId(id.clone()))?;
            push(id, &rec.text, sel.method.into(), Some(q.to_string()));
        }
    }
    for s in curated.unwrap_or(&[]) {
        push(&s.sent_id, &s.text, Origin::Curated, None);
    }
    Ok(AugmentedCorpus { entries })
}
