//! `curator`: one binary, one subcommand per curation stage.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use curator::config::PipelineConfig;
use curator::corpus::{dedup_sentences, pack_sequences, sample, split_corpus, SentenceRecord};
use curator::embed::{embed_batch, EmbedderModel};
use curator::io::{
    load_documents, load_sentences, parse_corpus, parse_selection, parse_sequences, read_text, to_jsonl,
    write_atomic, write_atomic_with,
};
use curator::lm::cross_domain_matrix;
use curator::mask::augment_epochs;
use curator::pipeline::{read_embeddings, run_pipeline, write_embeddings};
use curator::plan::{compare_plans, plan_phase, plan_sequence, reference_plans, Phase, PlanOverrides};
use curator::rng::derive_seed;
use curator::select::{
    assemble_corpus, dump_neighbors, select_knn, select_random, CorpusEntry, Method, Origin, SelectionResult,
};
use curator::vocab::{build_vocabulary, default_stopwords, overlap_matrix, parse_stopwords, Stopwords};
use curator::demo;

#[derive(Parser, Debug)]
#[command(name = "curator", version, about = "Corpus curation for adaptive pretraining")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Debug)]
struct Global {
    /// JSON pipeline config supplying defaults for the flags below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes output
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    mask_prob: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<u32>,
    #[arg(long, global = true)]
    vocab_k: Option<usize>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    max_vocab: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Split documents into sentence records
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-K vocabulary of one domain
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        /// Domain name; defaults to the file stem
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise vocabulary-overlap matrix
    Overlap {
        #[arg(long, num_args = 2.., required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Also write each domain's vocabulary here
        #[arg(long)]
        vocab_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a sentence pool and drop textual duplicates
    Dedup {
        #[arg(long)]
        input: PathBuf,
        /// Pool size before dedup; defaults to the config's pool size
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit (or load) the sentence embedder and embed task and pool
    Embed {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        /// Reuse a fitted model instead of fitting on the pool
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-query neighbor selection
    Select {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        method: Option<Method>,
        /// Directory holding `task.*` and `pool.*` embeddings (kNN only)
        #[arg(long)]
        emb_dir: Option<PathBuf>,
        #[arg(long)]
        dump_neighbors: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build the augmented corpus and pack it into sequences
    Assemble {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        selection: Option<PathBuf>,
        /// Curated documents added after the selection
        #[arg(long)]
        curated: Option<PathBuf>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Stream per-epoch masked copies of packed sequences
    Mask {
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-domain n-gram loss matrix
    LmMatrix {
        #[arg(long, num_args = 2.., required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Step accounting and cost comparison
    Plan {
        /// `PHASE=DOCS`, e.g. `KNN_TAPT(50)=24000`; repeatable
        #[arg(long = "run", value_name = "PHASE=DOCS")]
        runs: Vec<String>,
        /// Count the documents of an assembled corpus
        #[arg(long, requires = "phase")]
        corpus: Option<PathBuf>,
        /// Phase of `--corpus`
        #[arg(long)]
        phase: Option<Phase>,
        /// Include the fixed-length domain phase and the combined schedule
        #[arg(long)]
        with_dapt: bool,
        /// Use the reference 500-document biomedical comparison
        #[arg(long)]
        reference: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every stage end to end
    Pipeline {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Generate and use the bundled mini-corpus
        #[arg(long)]
        demo: bool,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Write the bundled mini-corpus as JSONL documents
    GenDemo {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Bad arguments detected after parsing; exits 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn config(g: &Global) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::from_json(&p.display().to_string(), &read_text(p)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.k {
        cfg.k = v;
    }
    if let Some(v) = g.mask_prob {
        cfg.mask_prob = v;
    }
    if let Some(v) = g.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = g.vocab_k {
        cfg.vocab_k = v;
    }
    if let Some(v) = g.dim {
        cfg.dim = v;
    }
    if let Some(v) = g.max_vocab {
        cfg.max_vocab = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn domain_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn stopwords(path: Option<&Path>) -> anyhow::Result<Stopwords> {
    Ok(match path {
        Some(p) => parse_stopwords(&read_text(p)?),
        None => default_stopwords(),
    })
}

fn ingest(input: &Path, out: &Path) -> anyhow::Result<Value> {
    let docs = load_documents(input)?;
    let sents = split_corpus(&docs);
    write_atomic(out, to_jsonl(&sents).as_bytes())?;
    Ok(json!({"command": "ingest", "documents": docs.len(), "sentences": sents.len(), "out": out}))
}

fn vocab(cfg: &PipelineConfig, corpus: &Path, domain: Option<String>, sw: Option<&Path>, out: &Path) -> anyhow::Result<Value> {
    let name = domain.unwrap_or_else(|| domain_name(corpus));
    let docs = load_documents(corpus)?;
    let n = cfg.vocab_sample_docs.min(docs.len());
    let s = sample(&docs, n, derive_seed(cfg.seed, &format!("vocab/{name}")))?;
    let v = build_vocabulary(&name, &s, cfg.vocab_k, &stopwords(sw)?)?;
    write_atomic(out, v.to_tsv().as_bytes())?;
    Ok(json!({"command": "vocab", "domain": name, "k": v.k, "terms": v.len(), "sample_docs": n, "out": out}))
}

fn overlap(cfg: &PipelineConfig, corpora: &[PathBuf], sw: Option<&Path>, vocab_dir: Option<&Path>, out: &Path) -> anyhow::Result<Value> {
    let stop = stopwords(sw)?;
    let mut vocabs = Vec::new();
    for p in corpora {
        let name = domain_name(p);
        if vocabs.iter().any(|v: &curator::vocab::DomainVocabulary| v.domain == name) {
            return Err(usage(format!("duplicate domain name `{name}`")));
        }
        let docs = load_documents(p)?;
        let n = cfg.vocab_sample_docs.min(docs.len());
        let s = sample(&docs, n, derive_seed(cfg.seed, &format!("vocab/{name}")))?;
        let v = build_vocabulary(&name, &s, cfg.vocab_k, &stop)?;
        if let Some(dir) = vocab_dir {
            write_atomic(&dir.join(format!("{name}.tsv")), v.to_tsv().as_bytes())?;
        }
        vocabs.push(v);
    }
    let m = overlap_matrix(&vocabs)?;
    write_atomic(out, m.to_tsv().as_bytes())?;
    Ok(json!({"command": "overlap", "domains": m.domains, "k": cfg.vocab_k, "pct": m.pct, "out": out}))
}

fn dedup(cfg: &PipelineConfig, input: &Path, n: Option<usize>, out: &Path) -> anyhow::Result<Value> {
    let sents = load_sentences(input)?;
    let n = n.unwrap_or(cfg.pool_sentences).min(sents.len());
    let sampled = sample(&sents, n, derive_seed(cfg.seed, "pool"))?;
    let pool = dedup_sentences(&sampled);
    write_atomic(out, to_jsonl(&pool).as_bytes())?;
    Ok(json!({"command": "dedup", "input": sents.len(), "sampled": n, "kept": pool.len(), "out": out}))
}

fn embed(cfg: &PipelineConfig, task: &Path, pool: &Path, model: Option<&Path>, out_dir: &Path) -> anyhow::Result<Value> {
    let task = load_sentences(task)?;
    let pool = load_sentences(pool)?;
    let model = match model {
        Some(p) => EmbedderModel::from_json(&read_text(p)?)?,
        None => EmbedderModel::fit(&pool, cfg.dim, cfg.max_vocab, derive_seed(cfg.seed, "embed"))?,
    };
    write_atomic(&out_dir.join("model.json"), (model.to_json() + "\n").as_bytes())?;
    let te = embed_batch(&model, &task);
    let pe = embed_batch(&model, &pool);
    write_embeddings(&out_dir.join("task"), &te)?;
    write_embeddings(&out_dir.join("pool"), &pe)?;
    Ok(json!({
        "command": "embed",
        "dim": te.dim,
        "vocab": model.terms().len(),
        "task_rows": te.len(),
        "pool_rows": pe.len(),
        "task_zero_rows": te.zero_rows().len(),
        "pool_zero_rows": pe.zero_rows().len(),
        "out_dir": out_dir,
    }))
}

fn ids_match(what: &str, emb: &[String], sents: &[SentenceRecord]) -> anyhow::Result<()> {
    if emb.len() != sents.len() || emb.iter().zip(sents).any(|(a, s)| *a != s.sent_id) {
        return Err(usage(format!("{what} embeddings do not match the {what} sentence file")));
    }
    Ok(())
}

fn select(
    cfg: &PipelineConfig,
    task: &Path,
    pool: &Path,
    method: Method,
    emb_dir: Option<&Path>,
    dump: usize,
    out_dir: &Path,
) -> anyhow::Result<Value> {
    let task = load_sentences(task)?;
    let pool = load_sentences(pool)?;
    let sel = match method {
        Method::Knn => {
            let dir = emb_dir.ok_or_else(|| usage("--emb-dir is required for --method knn"))?;
            let te = read_embeddings(&dir.join("task"))?;
            let pe = read_embeddings(&dir.join("pool"))?;
            ids_match("task", &te.ids, &task)?;
            ids_match("pool", &pe.ids, &pool)?;
            select_knn(&te, &pe, cfg.k)?
        }
        Method::Rand => {
            let q: Vec<String> = task.iter().map(|s| s.sent_id.clone()).collect();
            let p: Vec<String> = pool.iter().map(|s| s.sent_id.clone()).collect();
            select_random(&q, &p, cfg.k, derive_seed(cfg.seed, "select"))?
        }
    };
    write_atomic(&out_dir.join("selection.jsonl"), to_jsonl(&sel.lines()).as_bytes())?;
    write_atomic(&out_dir.join("pool.txt"), sel.pool_text().as_bytes())?;
    if dump > 0 {
        let texts: HashMap<&str, &str> =
            task.iter().chain(&pool).map(|s| (s.sent_id.as_str(), s.text.as_str())).collect();
        write_atomic(&out_dir.join("neighbors.txt"), dump_neighbors(&sel, &texts, dump).as_bytes())?;
    }
    Ok(json!({
        "command": "select",
        "method": method,
        "k": sel.k,
        "queries": sel.stats.queries,
        "selected": sel.selected_pool.len(),
        "total_pairs": sel.stats.total_pairs,
        "skipped_queries": sel.stats.skipped_queries.len(),
        "excluded_candidates": sel.stats.excluded_candidates.len(),
        "out_dir": out_dir,
    }))
}

fn assemble(
    cfg: &PipelineConfig,
    task: &Path,
    pool: &Path,
    selection: Option<&Path>,
    curated: Option<&Path>,
    out_dir: &Path,
) -> anyhow::Result<Value> {
    let task = load_sentences(task)?;
    let pool = load_sentences(pool)?;
    let sel = match selection {
        Some(p) => Some(SelectionResult::from_lines(parse_selection(
            &p.display().to_string(),
            &read_text(p)?,
        )?)?),
        None => None,
    };
    let curated = match curated {
        Some(p) => Some(split_corpus(&load_documents(p)?)),
        None => None,
    };
    let corpus = assemble_corpus(&task, sel.as_ref(), &pool, curated.as_deref())?;
    write_atomic(&out_dir.join("corpus.jsonl"), to_jsonl(&corpus.entries).as_bytes())?;
    let seqs = pack_sequences(&corpus.to_documents(), cfg.max_len, derive_seed(cfg.seed, "pack"))?;
    write_atomic(&out_dir.join("sequences.jsonl"), to_jsonl(&seqs).as_bytes())?;
    Ok(json!({
        "command": "assemble",
        "entries": corpus.len(),
        "task": corpus.count(Origin::Task),
        "knn": corpus.count(Origin::Knn),
        "rand": corpus.count(Origin::Rand),
        "curated": corpus.count(Origin::Curated),
        "sequences": seqs.len(),
        "out_dir": out_dir,
    }))
}

fn mask(cfg: &PipelineConfig, sequences: &Path, out: &Path) -> anyhow::Result<Value> {
    let seqs = parse_sequences(&sequences.display().to_string(), &read_text(sequences)?)?;
    let stream = augment_epochs(&seqs, cfg.epochs, cfg.mask_prob, derive_seed(cfg.seed, "mask"))?;
    let records = stream.len();
    let mut positions = 0usize;
    let mut masked = 0usize;
    write_atomic_with(out, |w| {
        for m in stream {
            positions += m.tokens.len();
            masked += m.masked_positions.len();
            serde_json::to_writer(&mut *w, &m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    Ok(json!({
        "command": "mask",
        "sequences": seqs.len(),
        "epochs": cfg.epochs,
        "records": records,
        "positions": positions,
        "masked": masked,
        "out": out,
    }))
}

fn lm_matrix(
    cfg: &PipelineConfig,
    corpora: &[PathBuf],
    order: Option<usize>,
    alpha: Option<f64>,
    holdout: Option<f64>,
    out_dir: &Path,
) -> anyhow::Result<Value> {
    let domains = corpora
        .iter()
        .map(|p| Ok((domain_name(p), load_documents(p)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let m = cross_domain_matrix(
        &domains,
        order.unwrap_or(cfg.lm_order),
        alpha.unwrap_or(cfg.lm_alpha),
        holdout.unwrap_or(cfg.holdout_fraction),
        derive_seed(cfg.seed, "lm"),
    )?;
    write_atomic(&out_dir.join("lm_matrix.tsv"), m.to_tsv().as_bytes())?;
    let js = serde_json::to_string_pretty(&m)? + "\n";
    write_atomic(&out_dir.join("lm_matrix.json"), js.as_bytes())?;
    Ok(json!({
        "command": "lm-matrix",
        "domains": m.model_domains,
        "diagonal_dominant": m.diagonal_dominant(),
        "out_dir": out_dir,
    }))
}

fn parse_run(s: &str) -> anyhow::Result<(Phase, u64)> {
    let (phase, docs) = s
        .rsplit_once('=')
        .ok_or_else(|| usage(format!("--run `{s}` is not PHASE=DOCS")))?;
    let docs = docs
        .parse::<u64>()
        .map_err(|_| usage(format!("--run `{s}`: bad document count")))?;
    Ok((phase.parse()?, docs))
}

struct PlanArgs<'a> {
    runs: &'a [String],
    corpus: Option<&'a Path>,
    phase: Option<Phase>,
    with_dapt: bool,
    reference: bool,
    out: Option<&'a Path>,
}

fn plan(cfg: &PipelineConfig, a: PlanArgs<'_>) -> anyhow::Result<Value> {
    let epochs = u64::from(cfg.epochs);
    let mut plans = if a.reference { reference_plans() } else { Vec::new() };
    for r in a.runs {
        let (phase, docs) = parse_run(r)?;
        let ov = if phase == Phase::Dapt {
            PlanOverrides { fixed_steps: Some(cfg.dapt_steps) }
        } else {
            PlanOverrides::default()
        };
        plans.push(plan_phase(phase, docs, epochs, 0, ov)?);
    }
    if let (Some(p), Some(phase)) = (a.corpus, a.phase) {
        let text = read_text(p)?;
        let entries: Vec<CorpusEntry> = parse_corpus(&p.display().to_string(), &text)?;
        plans.push(plan_phase(phase, entries.len() as u64, epochs, text.len() as u64, PlanOverrides::default())?);
    }
    if a.with_dapt && !plans.iter().any(|p| p.phase == Phase::Dapt) {
        let dapt = plan_phase(Phase::Dapt, 1, 1, 0, PlanOverrides { fixed_steps: Some(cfg.dapt_steps) })?;
        if let Some(t) = plans.iter().find(|p| p.phase == Phase::Tapt).cloned() {
            plans.push(plan_sequence(&dapt, &t));
        }
        plans.push(dapt);
    }
    if plans.is_empty() {
        return Err(usage("nothing to plan: pass --run, --corpus/--phase or --reference"));
    }
    let cmp = if plans.len() >= 2 { Some(compare_plans(&plans)?) } else { None };
    if let Some(out) = a.out {
        let body = match &cmp {
            Some(c) => serde_json::to_string_pretty(c)?,
            None => serde_json::to_string_pretty(&plans)?,
        } + "\n";
        write_atomic(out, body.as_bytes())?;
    }
    let rows: Vec<Value> = match &cmp {
        Some(c) => c
            .rows
            .iter()
            .map(|r| json!({"phase": r.plan.phase, "docs": r.plan.docs, "steps": r.plan.steps, "display": r.plan.steps_display, "ratio": r.ratio}))
            .collect(),
        None => plans
            .iter()
            .map(|p| json!({"phase": p.phase, "docs": p.docs, "steps": p.steps, "display": p.steps_display}))
            .collect(),
    };
    Ok(json!({"command": "plan", "plans": rows}))
}

fn gen_demo(seed: u64, out_dir: &Path) -> anyhow::Result<Value> {
    let mini = demo::mini_corpus(seed);
    let mut files = Vec::new();
    for (name, docs) in &mini.domains {
        let p = out_dir.join(format!("{name}.jsonl"));
        write_atomic(&p, to_jsonl(docs).as_bytes())?;
        files.push(p);
    }
    for (name, docs) in [("task", &mini.task), ("curated", &mini.curated)] {
        let p = out_dir.join(format!("{name}.jsonl"));
        write_atomic(&p, to_jsonl(docs).as_bytes())?;
        files.push(p);
    }
    Ok(json!({"command": "gen-demo", "files": files}))
}

fn run(cli: Cli) -> anyhow::Result<Value> {
    let mut cfg = config(&cli.global)?;
    match cli.cmd {
        Cmd::Ingest { input, out } => ingest(&input, &out),
        Cmd::Vocab { corpus, domain, stopwords, out } => vocab(&cfg, &corpus, domain, stopwords.as_deref(), &out),
        Cmd::Overlap { corpora, stopwords, vocab_dir, out } => {
            overlap(&cfg, &corpora, stopwords.as_deref(), vocab_dir.as_deref(), &out)
        }
        Cmd::Dedup { input, sample, out } => dedup(&cfg, &input, sample, &out),
        Cmd::Embed { task, pool, model, out_dir } => embed(&cfg, &task, &pool, model.as_deref(), &out_dir),
        Cmd::Select { task, pool, method, emb_dir, dump_neighbors, out_dir } => select(
            &cfg,
            &task,
            &pool,
            method.unwrap_or(cfg.method),
            emb_dir.as_deref(),
            dump_neighbors.unwrap_or(cfg.dump_neighbors),
            &out_dir,
        ),
        Cmd::Assemble { task, pool, selection, curated, max_len, out_dir } => {
            if let Some(m) = max_len {
                cfg.max_len = m;
                cfg.validate()?;
            }
            assemble(&cfg, &task, &pool, selection.as_deref(), curated.as_deref(), &out_dir)
        }
        Cmd::Mask { sequences, out } => mask(&cfg, &sequences, &out),
        Cmd::LmMatrix { corpora, order, alpha, holdout, out_dir } => {
            lm_matrix(&cfg, &corpora, order, alpha, holdout, &out_dir)
        }
        Cmd::Plan { runs, corpus, phase, with_dapt, reference, out } => plan(
            &cfg,
            PlanArgs {
                runs: &runs,
                corpus: corpus.as_deref(),
                phase,
                with_dapt,
                reference,
                out: out.as_deref(),
            },
        ),
        Cmd::Pipeline { out_dir, demo, method } => {
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            cfg.demo |= demo;
            if let Some(m) = method {
                cfg.method = m;
            }
            if !cfg.demo && cfg.domains.is_empty() {
                return Err(usage("no domains configured; pass --config or --demo"));
            }
            let s = run_pipeline(&cfg)?;
            let mut v = serde_json::to_value(s)?;
            v["command"] = json!("pipeline");
            v["out_dir"] = json!(cfg.out_dir);
            Ok(v)
        }
        Cmd::GenDemo { out_dir } => gen_demo(cfg.seed, &out_dir),
    }
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            return fail(1, "usage", msg.trim_end());
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail(1, "usage", &e.to_string());
        }
    }
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string();
            if let Some(u) = e.downcast_ref::<Usage>() {
                return fail(1, "usage", &u.0);
            }
            match e.downcast_ref::<curator::Error>() {
                Some(ce) if ce.is_usage() => fail(1, ce.kind(), &msg),
                Some(ce) => fail(2, ce.kind(), &msg),
                None => fail(2, "data", &msg),
            }
        }
    }
}
