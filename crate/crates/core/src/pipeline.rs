//! End-to-end curation run: vocabulary overlap, pool construction,
//! embedding, selection, assembly, packing, masking, loss matrix and plan.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{DomainSource, PipelineConfig};
use crate::corpus::{dedup_sentences, pack_sequences, sample, split_corpus, Document, SentenceRecord};
use crate::embed::{embed_batch, EmbedderModel, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io::{load_documents, read_text, to_jsonl, write_atomic, write_atomic_with};
use crate::lm::cross_domain_matrix;
use crate::mask::augment_epochs;
use crate::plan::{compare_plans, plan_phase, plan_sequence, Phase, PhasePlan, PlanOverrides};
use crate::rng::derive_seed;
use crate::select::{assemble_corpus, dump_neighbors, select_knn, select_random, Method, SelectionResult};
use crate::vocab::{build_vocabulary, default_stopwords, overlap_matrix, parse_stopwords, pick_irrelevant_domain};
use crate::demo;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub domains: Vec<String>,
    pub pool_domain: String,
    pub irrelevant_domain: String,
    pub pool_sampled: usize,
    pub pool_deduped: usize,
    pub task_sentences: usize,
    pub method: Method,
    pub k: usize,
    pub selected: usize,
    pub skipped_queries: usize,
    pub excluded_candidates: usize,
    pub corpus_entries: usize,
    pub sequences: usize,
    pub masked_records: usize,
    pub steps: u64,
    pub steps_display: String,
}

/// Writes an `EMB1` file with its `.ids` and `.meta.json` sidecars.
pub fn write_embeddings(prefix: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    write_atomic(&with_ext(prefix, "emb"), &emb.to_bytes())?;
    write_atomic(&with_ext(prefix, "ids"), emb.ids_text().as_bytes())?;
    let meta = serde_json::to_string_pretty(&emb.meta()).expect("meta serializes") + "\n";
    write_atomic(&with_ext(prefix, "meta.json"), meta.as_bytes())
}

/// Reads the three files written by [`write_embeddings`].
pub fn read_embeddings(prefix: &Path) -> Result<EmbeddingMatrix> {
    let bytes = crate::io::read_bytes(&with_ext(prefix, "emb"))?;
    let ids_path = with_ext(prefix, "ids");
    let ids = crate::io::parse_id_list(&ids_path.display().to_string(), &read_text(&ids_path)?)?;
    let mut emb = EmbeddingMatrix::from_bytes(&bytes, ids)?;
    let meta_path = with_ext(prefix, "meta.json");
    if meta_path.exists() {
        let meta: crate::embed::EmbeddingMeta = serde_json::from_str(&read_text(&meta_path)?)
            .map_err(|e| Error::parse(&meta_path.display().to_string(), e.line(), e.to_string()))?;
        emb.fingerprint = meta.fingerprint;
    }
    Ok(emb)
}

pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).expect("serializes") + "\n";
    write_atomic(path, s.as_bytes())
}

fn write_demo_inputs(cfg: &mut PipelineConfig) -> Result<()> {
    let mini = demo::mini_corpus(cfg.seed);
    let input = cfg.out_dir.join("input");
    let mut sources = Vec::new();
    for (name, docs) in &mini.domains {
        let path = input.join(format!("{name}.jsonl"));
        write_atomic(&path, to_jsonl(docs).as_bytes())?;
        sources.push(DomainSource {
            name: name.clone(),
            path,
        });
    }
    let task = input.join("task.jsonl");
    write_atomic(&task, to_jsonl(&mini.task).as_bytes())?;
    let curated = input.join("curated.jsonl");
    write_atomic(&curated, to_jsonl(&mini.curated).as_bytes())?;
    cfg.domains = sources;
    cfg.pool_domain.get_or_insert_with(|| demo::POOL_DOMAIN.to_string());
    cfg.task = Some(task);
    cfg.curated.get_or_insert(curated);
    Ok(())
}

fn task_plan(method: Method, k: usize, docs: u64, epochs: u64, storage: u64) -> Result<PhasePlan> {
    let phase = match method {
        Method::Knn => Phase::KnnTapt(k),
        Method::Rand => Phase::RandTapt(k),
    };
    plan_phase(phase, docs.max(1), epochs, storage, PlanOverrides::default())
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.demo {
        write_demo_inputs(&mut cfg)?;
    }
    if cfg.domains.len() < 2 {
        return Err(Error::TooFew {
            what: "domains",
            needed: 2,
            got: cfg.domains.len(),
        });
    }
    let task_path = cfg
        .task
        .clone()
        .ok_or_else(|| Error::InvalidParam("`task` corpus path is required".into()))?;
    let out = cfg.out_dir.clone();
    let stopwords = match &cfg.stopwords {
        Some(p) => parse_stopwords(&read_text(p)?),
        None => default_stopwords(),
    };

    let domains: Vec<(String, Vec<Document>)> = cfg
        .domains
        .iter()
        .map(|d| Ok((d.name.clone(), load_documents(&d.path)?)))
        .collect::<Result<_>>()?;
    let pool_domain = cfg.pool_domain.clone().unwrap_or_else(|| domains[0].0.clone());
    let pool_docs = &domains
        .iter()
        .find(|(n, _)| *n == pool_domain)
        .ok_or_else(|| Error::UnknownDomain(pool_domain.clone()))?
        .1;

    // vocabulary overlap
    let mut vocabs = Vec::new();
    for (name, docs) in &domains {
        let n = cfg.vocab_sample_docs.min(docs.len());
        let s = sample(docs, n, derive_seed(cfg.seed, &format!("vocab/{name}")))?;
        let v = build_vocabulary(name, &s, cfg.vocab_k, &stopwords)?;
        write_atomic(&out.join("vocab").join(format!("{name}.tsv")), v.to_tsv().as_bytes())?;
        vocabs.push(v);
    }
    let overlap = overlap_matrix(&vocabs)?;
    write_atomic(&out.join("overlap.tsv"), overlap.to_tsv().as_bytes())?;
    let irrelevant = pick_irrelevant_domain(&overlap, &pool_domain)?;

    // candidate pool: sample first, then dedup
    let pool_all = split_corpus(pool_docs);
    let n = cfg.pool_sentences.min(pool_all.len());
    let pool_sampled = sample(&pool_all, n, derive_seed(cfg.seed, "pool"))?;
    let pool = dedup_sentences(&pool_sampled);
    write_atomic(&out.join("pool_sentences.jsonl"), to_jsonl(&pool).as_bytes())?;
    let task_docs = load_documents(&task_path)?;
    let task = split_corpus(&task_docs);
    write_atomic(&out.join("task_sentences.jsonl"), to_jsonl(&task).as_bytes())?;

    // embed + select
    let selection: SelectionResult = match cfg.method {
        Method::Knn => {
            let model = EmbedderModel::fit(&pool, cfg.dim, cfg.max_vocab, derive_seed(cfg.seed, "embed"))?;
            write_atomic(&out.join("embed/model.json"), (model.to_json() + "\n").as_bytes())?;
            let task_emb = embed_batch(&model, &task);
            let pool_emb = embed_batch(&model, &pool);
            write_embeddings(&out.join("embed/task"), &task_emb)?;
            write_embeddings(&out.join("embed/pool"), &pool_emb)?;
            select_knn(&task_emb, &pool_emb, cfg.k)?
        }
        Method::Rand => {
            let q: Vec<String> = task.iter().map(|s| s.sent_id.clone()).collect();
            let p: Vec<String> = pool.iter().map(|s| s.sent_id.clone()).collect();
            select_random(&q, &p, cfg.k, derive_seed(cfg.seed, "select"))?
        }
    };
    write_atomic(&out.join("selection.jsonl"), to_jsonl(&selection.lines()).as_bytes())?;
    write_atomic(&out.join("pool.txt"), selection.pool_text().as_bytes())?;
    if cfg.dump_neighbors > 0 {
        let texts: HashMap<&str, &str> = task
            .iter()
            .chain(pool.iter())
            .map(|s| (s.sent_id.as_str(), s.text.as_str()))
            .collect();
        let dump = dump_neighbors(&selection, &texts, cfg.dump_neighbors);
        write_atomic(&out.join("neighbors.txt"), dump.as_bytes())?;
    }

    // assemble, pack, mask
    let curated: Option<Vec<SentenceRecord>> = match &cfg.curated {
        Some(p) => Some(split_corpus(&load_documents(p)?)),
        None => None,
    };
    let corpus = assemble_corpus(&task, Some(&selection), &pool, curated.as_deref())?;
    let corpus_path = out.join("corpus.jsonl");
    write_atomic(&corpus_path, to_jsonl(&corpus.entries).as_bytes())?;
    let sequences = pack_sequences(&corpus.to_documents(), cfg.max_len, derive_seed(cfg.seed, "pack"))?;
    write_atomic(&out.join("sequences.jsonl"), to_jsonl(&sequences).as_bytes())?;
    let stream = augment_epochs(&sequences, cfg.epochs, cfg.mask_prob, derive_seed(cfg.seed, "mask"))?;
    let masked_records = stream.len();
    write_atomic_with(&out.join("masked.jsonl"), |w| {
        for m in stream {
            serde_json::to_writer(&mut *w, &m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;

    // loss matrix
    let lm = cross_domain_matrix(&domains, cfg.lm_order, cfg.lm_alpha, cfg.holdout_fraction, derive_seed(cfg.seed, "lm"))?;
    write_atomic(&out.join("lm_matrix.tsv"), lm.to_tsv().as_bytes())?;
    write_json(&out.join("lm_matrix.json"), &lm)?;

    // plan
    let storage = std::fs::metadata(&corpus_path).map(|m| m.len()).unwrap_or(0);
    let task_storage = to_jsonl(&task).len() as u64;
    let epochs = u64::from(cfg.epochs);
    let adapted = task_plan(cfg.method, cfg.k, corpus.len() as u64, epochs, storage)?;
    let tapt = plan_phase(Phase::Tapt, task_docs.len() as u64, epochs, task_storage, PlanOverrides::default())?;
    let dapt = plan_phase(
        Phase::Dapt,
        pool_docs.len() as u64,
        1,
        0,
        PlanOverrides {
            fixed_steps: Some(cfg.dapt_steps),
        },
    )?;
    let both = plan_sequence(&dapt, &tapt);
    let plans = vec![tapt, adapted.clone(), dapt, both];
    write_json(&out.join("plan.json"), &plans)?;
    let cmp = compare_plans(&plans)?;
    write_atomic(&out.join("plan.txt"), cmp.to_table().as_bytes())?;

    let summary = PipelineSummary {
        domains: domains.iter().map(|(n, _)| n.clone()).collect(),
        pool_domain,
        irrelevant_domain: irrelevant,
        pool_sampled: pool_sampled.len(),
        pool_deduped: pool.len(),
        task_sentences: task.len(),
        method: cfg.method,
        k: cfg.k,
        selected: selection.selected_pool.len(),
        skipped_queries: selection.stats.skipped_queries.len(),
        excluded_candidates: selection.stats.excluded_candidates.len(),
        corpus_entries: corpus.len(),
        sequences: sequences.len(),
        masked_records,
        steps: adapted.steps,
        steps_display: adapted.steps_display,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
