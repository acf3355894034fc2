//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use curator::config::PipelineConfig;
use curator::corpus::{dedup_sentences, pack_sequences, split_corpus, Document, PackedSequence, SentenceRecord};
use curator::demo::mini_corpus;
use curator::embed::{embed_batch, EmbedderModel, EmbeddingMatrix, DEFAULT_DIM, DEFAULT_MAX_VOCAB};
use curator::lm::cross_domain_matrix;
use curator::mask::{augment_epochs, mask_sequence};
use curator::pipeline::run_pipeline;
use curator::plan::{compare_plans, plan_phase, plan_sequence, Phase, PlanOverrides};
use curator::select::{build_index, select_knn};
use curator::vocab::{build_vocabulary, default_stopwords, overlap, overlap_matrix};

type Outcome = Result<String, String>;

struct Report {
    failed: usize,
}

impl Report {
    fn run(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let mut res = f();
        let el = t.elapsed();
        if res.is_ok() && el > budget {
            res = Err(format!("took {el:.2?}, budget {budget:?}"));
        }
        match res {
            Ok(detail) => println!("PASS  {name}: {detail} [{el:.2?}]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name}: {detail} [{el:.2?}]");
            }
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

fn unit(r: &mut Xoshiro256StarStar) -> f64 {
    (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn below(r: &mut Xoshiro256StarStar, n: usize) -> usize {
    (unit(r) * n as f64) as usize
}

// ---------------------------------------------------------------------------
// step accounting

/// Steps rounded to the nearest hundred, shown in thousands.
fn shown(steps: u64) -> String {
    let tenths = (steps as f64 / 100.0).round() as u64;
    format!("{}.{}K", tenths / 10, tenths % 10)
}

fn table_row(phase: Phase, docs: u64, expect: &str) -> Outcome {
    let p = plan_phase(phase, docs, 100, 0, PlanOverrides::default()).map_err(|e| e.to_string())?;
    let batch = if docs < 5000 { 256 } else { 2048 };
    let oracle = (docs * 100).div_ceil(batch);
    check(p.steps == oracle, || format!("steps {} != ceil(docs*epochs/batch) = {oracle}", p.steps))?;
    check(p.steps_display == shown(p.steps), || format!("display {} != {}", p.steps_display, shown(p.steps)))?;
    check(p.steps_display == expect, || {
        format!("{docs} docs x 100 epochs / batch {batch} = {} steps -> {}, table shows {expect}", p.steps, p.steps_display)
    })?;
    Ok(format!("{} steps -> {}", p.steps, p.steps_display))
}

fn dapt_rows() -> Outcome {
    let tapt = plan_phase(Phase::Tapt, 500, 100, 0, PlanOverrides::default()).map_err(|e| e.to_string())?;
    let dapt = plan_phase(Phase::Dapt, 25_000_000, 1, 0, PlanOverrides::dapt()).map_err(|e| e.to_string())?;
    check(dapt.steps_display == "12.5K", || format!("DAPT shows {}", dapt.steps_display))?;
    let both = plan_sequence(&dapt, &tapt);
    let diff = both.steps.abs_diff(12_600);
    check(diff <= 100, || format!("DAPT+TAPT {} steps is {diff} from 12.6K", both.steps))?;
    Ok(format!("DAPT {}, DAPT+TAPT {} ({}), within 0.1K of 12.6K", dapt.steps_display, both.steps_display, both.steps))
}

fn cost_ratio() -> Outcome {
    let tapt = plan_phase(Phase::Tapt, 500, 100, 0, PlanOverrides::default()).map_err(|e| e.to_string())?;
    let dapt = plan_phase(Phase::Dapt, 25_000_000, 1, 0, PlanOverrides::dapt()).map_err(|e| e.to_string())?;
    let cmp = compare_plans(&[dapt, tapt]).map_err(|e| e.to_string())?;
    let r = cmp.ratio_of(Phase::Dapt).ok_or("no DAPT row")?;
    check((55.0..=65.0).contains(&r), || format!("ratio {r:.2} outside [55, 65]"))?;
    Ok(format!("DAPT/TAPT = {r:.2}"))
}

// ---------------------------------------------------------------------------
// kNN

fn random_matrix(r: &mut Xoshiro256StarStar, n: usize, dim: usize, prefix: &str) -> EmbeddingMatrix {
    // ids in shuffled order so row order and id order disagree
    let mut ids: Vec<String> = (0..n).map(|i| format!("{prefix}{i:05}")).collect();
    for i in (1..n).rev() {
        ids.swap(i, below(r, i + 1));
    }
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        if i > 0 && below(r, 20) == 0 {
            // exact duplicate of an earlier row: forces score ties
            let j = below(r, i);
            let row: Vec<f32> = data[j * dim..(j + 1) * dim].to_vec();
            data.extend(row);
            continue;
        }
        if below(r, 50) == 0 {
            data.extend(std::iter::repeat_n(0.0f32, dim));
            continue;
        }
        let v: Vec<f64> = (0..dim).map(|_| unit(r) * 2.0 - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        data.extend(v.iter().map(|x| (x / norm) as f32));
    }
    EmbeddingMatrix::new(ids, dim, data).expect("valid matrix")
}

/// Full scan: every non-zero candidate scored, sorted by score then id.
fn brute_force(task: &EmbeddingMatrix, pool: &EmbeddingMatrix, k: usize) -> Vec<(String, Vec<(String, f64)>)> {
    let nonzero = |m: &EmbeddingMatrix, i: usize| m.row(i).iter().any(|&x| x != 0.0);
    let mut out = Vec::new();
    for qi in 0..task.len() {
        if !nonzero(task, qi) {
            continue;
        }
        let q = task.row(qi);
        let mut all: Vec<(String, f64)> = (0..pool.len())
            .filter(|&ci| nonzero(pool, ci))
            .map(|ci| {
                let c = pool.row(ci);
                let mut s = 0.0f64;
                for d in 0..q.len() {
                    s += q[d] as f64 * c[d] as f64;
                }
                (pool.ids[ci].clone(), s)
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        out.push((task.ids[qi].clone(), all));
    }
    out
}

fn knn_oracle() -> Outcome {
    let mut r = rng(0x6b6e6e);
    let dim = 64;
    let instances = 60;
    let mut checked = 0usize;
    for inst in 0..instances {
        let (n, q) = if inst == 0 {
            (2000, 200)
        } else {
            (1 + below(&mut r, 2000), 1 + below(&mut r, 200))
        };
        let k = if inst == 0 { 64 } else { 1 + below(&mut r, 64) };
        let pool = random_matrix(&mut r, n, dim, "c");
        let task = random_matrix(&mut r, q, dim, "q");
        if build_index(&pool).is_err() {
            continue;
        }
        let got = select_knn(&task, &pool, k).map_err(|e| e.to_string())?;
        let want = brute_force(&task, &pool, k);
        check(got.per_query.len() == want.len(), || format!("instance {inst}: query count"))?;
        for (g, (qid, w)) in got.per_query.iter().zip(&want) {
            check(g.query_id == *qid, || format!("instance {inst}: query order"))?;
            let gi: Vec<&str> = g.neighbors.iter().map(|n| n.id.as_str()).collect();
            let wi: Vec<&str> = w.iter().map(|(id, _)| id.as_str()).collect();
            check(gi == wi, || format!("instance {inst} query {qid}: ids differ"))?;
            for (a, (_, b)) in g.neighbors.iter().zip(w) {
                let s = a.score.ok_or("missing score")?;
                check((s - b).abs() <= 1e-6, || format!("instance {inst} query {qid}: score {s} vs {b}"))?;
            }
        }
        checked += 1;
    }
    check(checked >= 50, || format!("only {checked} instances"))?;
    Ok(format!("{checked} instances (n<=2000, q<=200, k<=64, dim {dim}) identical to full scan"))
}

// ---------------------------------------------------------------------------
// masking

fn mask_monte_carlo() -> Outcome {
    let mut r = rng(15);
    let seqs: Vec<PackedSequence> = (0..1000)
        .map(|i| PackedSequence {
            seq_id: format!("s{i}:0"),
            doc_id: format!("s{i}"),
            tokens: (0..128).map(|_| format!("w{}", below(&mut r, 5000))).collect(),
        })
        .collect();
    let epochs = 8u32;
    let mut positions = 0usize;
    let mut masked = 0usize;
    let mut sets: HashMap<String, Vec<HashSet<usize>>> = HashMap::new();
    for m in augment_epochs(&seqs, epochs, 0.15, 99).map_err(|e| e.to_string())? {
        positions += m.tokens.len();
        masked += m.tokens.iter().filter(|t| *t == "<mask>").count();
        sets.entry(m.seq_id).or_default().push(m.masked_positions.into_iter().collect());
    }
    let rate = masked as f64 / positions as f64;
    check(positions >= 1_000_000, || format!("only {positions} positions"))?;
    check((0.145..=0.155).contains(&rate), || format!("mask rate {rate:.4}"))?;
    let mut jac = Vec::new();
    for per_epoch in sets.values() {
        for w in per_epoch.windows(2) {
            let inter = w[0].intersection(&w[1]).count();
            let uni = w[0].union(&w[1]).count();
            if uni > 0 {
                jac.push(inter as f64 / uni as f64);
            }
        }
    }
    let mean = jac.iter().sum::<f64>() / jac.len() as f64;
    check(mean < 0.2, || format!("mean cross-epoch Jaccard {mean:.4}"))?;
    Ok(format!("rate {rate:.4} over {positions} positions; mean Jaccard {mean:.4} (expected ~0.081)"))
}

// ---------------------------------------------------------------------------
// vocabulary overlap

/// Documents whose top-`k` vocabulary is exactly `core`, plus rarer noise.
fn docs_with_core(domain: &str, core: &[String], noise: usize, r: &mut Xoshiro256StarStar) -> Vec<Document> {
    (0..40)
        .map(|i| {
            let mut words: Vec<String> = core.to_vec();
            words.extend(core.iter().cloned());
            if i < noise {
                words.push(format!("{domain}noise{i}"));
            }
            for j in (1..words.len()).rev() {
                words.swap(j, below(r, j + 1));
            }
            Document::new(format!("{domain}-{i}"), domain, words.join(" ") + ".")
        })
        .collect()
}

fn overlap_properties() -> Outcome {
    let k = 100;
    let shared: Vec<String> = (0..40).map(|i| format!("sharedterm{i}")).collect();
    let mut r = rng(40);
    let stop = default_stopwords();
    let mut vocabs = Vec::new();
    for name in ["alpha", "beta", "gamma"] {
        let mut core = shared.clone();
        core.extend((0..60).map(|i| format!("{name}term{i}")));
        let docs = docs_with_core(name, &core, 30, &mut r);
        let v = build_vocabulary(name, &docs, k, &stop).map_err(|e| e.to_string())?;
        let expected: HashSet<&String> = core.iter().collect();
        check(v.terms.iter().all(|t| expected.contains(t)) && v.len() == k, || {
            format!("{name}: vocabulary is not the constructed core")
        })?;
        vocabs.push(v);
    }
    let m = overlap_matrix(&vocabs).map_err(|e| e.to_string())?;
    for i in 0..3 {
        check(m.pct[i][i] == 100.0, || format!("diagonal {i} = {}", m.pct[i][i]))?;
        for j in 0..3 {
            check(m.pct[i][j] == m.pct[j][i], || format!("asymmetric at {i},{j}"))?;
            if i != j {
                check(m.pct[i][j] == 40.0, || format!("off-diagonal {i},{j} = {}", m.pct[i][j]))?;
            }
        }
    }
    // symmetry on arbitrary equal-k vocabularies
    for t in 0..200 {
        let mut mk = |name: &str| {
            let docs: Vec<Document> = (0..20)
                .map(|i| {
                    let n = 5 + below(&mut r, 30);
                    let text: Vec<String> = (0..n).map(|_| format!("t{}", below(&mut r, 80))).collect();
                    Document::new(format!("{name}{i}"), name, text.join(" "))
                })
                .collect();
            build_vocabulary(name, &docs, 30, &stop).unwrap()
        };
        let (a, b) = (mk("a"), mk("b"));
        let (ab, ba) = (overlap(&a, &b).unwrap(), overlap(&b, &a).unwrap());
        check(ab == ba, || format!("trial {t}: {ab} != {ba}"))?;
        check(overlap(&a, &a).unwrap() == 100.0, || format!("trial {t}: self overlap"))?;
    }
    Ok("diagonal 100.0, symmetric, constructed pairs exactly 40.0".into())
}

// ---------------------------------------------------------------------------
// selection monotonicity

fn selection_monotone() -> Outcome {
    let mini = mini_corpus(5);
    let pool = dedup_sentences(&split_corpus(&mini.domains[0].1));
    let task = split_corpus(&mini.task);
    check(pool.len() >= 10_000, || format!("pool has {} sentences", pool.len()))?;
    check(task.len() >= 200, || format!("task has {} sentences", task.len()))?;
    let model = EmbedderModel::fit(&pool, DEFAULT_DIM, DEFAULT_MAX_VOCAB, 5).map_err(|e| e.to_string())?;
    let te = embed_batch(&model, &task);
    let pe = embed_batch(&model, &pool);
    let mut prev: Option<curator::select::SelectionResult> = None;
    let mut sizes = Vec::new();
    for k in [5, 15, 50] {
        let sel = select_knn(&te, &pe, k).map_err(|e| e.to_string())?;
        sizes.push(sel.selected_pool.len());
        if let Some(p) = &prev {
            check(p.selected_pool.len() <= sel.selected_pool.len(), || format!("pool shrank at k={k}"))?;
            let big: HashSet<&String> = sel.selected_pool.iter().collect();
            check(p.selected_pool.iter().all(|id| big.contains(id)), || format!("pool(k={}) not within pool(k={k})", p.k))?;
            for (a, b) in p.per_query.iter().zip(&sel.per_query) {
                check(a.query_id == b.query_id, || "query order changed".into())?;
                let bs: HashSet<&String> = b.neighbors.iter().map(|n| &n.id).collect();
                check(a.neighbors.iter().all(|n| bs.contains(&n.id)), || {
                    format!("query {}: neighbors(k={}) not within neighbors(k={k})", a.query_id, p.k)
                })?;
            }
        }
        prev = Some(sel);
    }
    Ok(format!("{} pool / {} task sentences; pool sizes {sizes:?}", pool.len(), task.len()))
}

// ---------------------------------------------------------------------------
// loss matrix

fn synthetic_domain(name: &str, r: &mut Xoshiro256StarStar) -> Vec<Document> {
    let function = ["the", "of", "and", "in", "to", "a", "with"];
    (0..300)
        .map(|i| {
            let sents: Vec<String> = (0..4)
                .map(|_| {
                    let n = 6 + below(r, 10);
                    let w: Vec<String> = (0..n)
                        .map(|_| {
                            if below(r, 3) == 0 {
                                function[below(r, function.len())].to_string()
                            } else {
                                let j = (unit(r).powi(2) * 300.0) as usize;
                                format!("{name}{j}")
                            }
                        })
                        .collect();
                    w.join(" ") + "."
                })
                .collect();
            Document::new(format!("{name}-{i}"), name, sents.join(" "))
        })
        .collect()
}

fn loss_diagonal() -> Outcome {
    let mut r = rng(3);
    let domains: Vec<(String, Vec<Document>)> = ["med", "law", "sport"]
        .iter()
        .map(|n| (n.to_string(), synthetic_domain(n, &mut r)))
        .collect();
    let m = cross_domain_matrix(&domains, 3, 0.1, 0.1, 17).map_err(|e| e.to_string())?;
    for (i, row) in m.loss.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            check(j == i || row[i] < v, || {
                format!("row {}: diagonal {:.4} not below {:.4} ({})", m.model_domains[i], row[i], v, m.eval_domains[j])
            })?;
        }
    }
    let diag: Vec<String> = (0..3).map(|i| format!("{:.3}", m.loss[i][i])).collect();
    Ok(format!("every row minimal on the diagonal {diag:?}"))
}

// ---------------------------------------------------------------------------
// determinism

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo.json");
    let text = fs::read_to_string(&manifest).map_err(|e| e.to_string())?;
    let base = PipelineConfig::from_json("demo.json", &text).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = base.clone();
        cfg.out_dir = dir.path().join(run);
        run_pipeline(&cfg).map_err(|e| e.to_string())?;
        trees.push(tree(&cfg.out_dir));
    }
    check(trees[0].len() >= 20, || format!("only {} files", trees[0].len()))?;
    let names = |t: &[(PathBuf, Vec<u8>)]| t.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    check(names(&trees[0]) == names(&trees[1]), || "file lists differ".into())?;
    for ((p, a), (_, b)) in trees[0].iter().zip(&trees[1]) {
        check(a == b, || format!("{} differs", p.display()))?;
    }
    let bytes: usize = trees[0].iter().map(|(_, b)| b.len()).sum();
    Ok(format!("{} files, {bytes} bytes, identical across two runs", trees[0].len()))
}

// ---------------------------------------------------------------------------
// round trips

fn sentence_strategy() -> impl Strategy<Value = Vec<SentenceRecord>> {
    let text = prop::sample::select(vec!["A b.", "C d e.", "a b.", "F.", " A b. ", "G h i j."]);
    prop::collection::vec((0usize..6, text), 0..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (d, t))| SentenceRecord::new(&format!("d{d}"), i, t))
            .collect()
    })
}

fn round_trips() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&sentence_strategy(), |recs| {
            let once = dedup_sentences(&recs);
            prop_assert_eq!(dedup_sentences(&once), once.clone());
            let texts: HashSet<&str> = once.iter().map(|s| s.text.trim()).collect();
            prop_assert_eq!(texts.len(), once.len());
            Ok(())
        })
        .map_err(|e| format!("dedup: {e}"))?;

    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let seq = (
        prop::collection::vec(prop::sample::select(vec!["x", "y", "<mask>", "\\<mask>", "z.", "Q"]), 0..200),
        0.0f64..=1.0,
        0u32..50,
        any::<u64>(),
    );
    runner
        .run(&seq, |(toks, p, epoch, seed)| {
            let s = PackedSequence {
                seq_id: "d:0".into(),
                doc_id: "d".into(),
                tokens: toks.iter().map(|t| t.to_string()).collect(),
            };
            let m = mask_sequence(&s, p, epoch, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(m.unmask(), s.tokens.clone());
            for &i in &m.masked_positions {
                prop_assert_eq!(m.tokens[i].as_str(), "<mask>");
            }
            Ok(())
        })
        .map_err(|e| format!("mask/unmask: {e}"))?;

    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let docs = (prop::collection::vec(prop::collection::vec(1usize..40, 1..8), 1..6), 1usize..64, any::<u64>());
    runner
        .run(&docs, |(shape, max_len, seed)| {
            // every token names its document, so a crossing is visible
            let docs: Vec<Document> = shape
                .iter()
                .enumerate()
                .map(|(d, sents)| {
                    let text: Vec<String> = sents
                        .iter()
                        .enumerate()
                        .map(|(s, &n)| {
                            let w: Vec<String> = (0..n).map(|t| format!("d{d}w{s}x{t}")).collect();
                            format!("D{d} {}.", w.join(" "))
                        })
                        .collect();
                    Document::new(format!("d{d}"), "x", text.join(" "))
                })
                .collect();
            let seqs = pack_sequences(&docs, max_len, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for s in &seqs {
                prop_assert!(s.tokens.len() <= max_len && !s.tokens.is_empty());
                let tag = s.doc_id.trim_start_matches('d');
                for t in &s.tokens {
                    let owner = t.trim_start_matches('D').trim_start_matches('d');
                    let owner = owner.split(|c: char| !c.is_ascii_digit()).next().unwrap();
                    prop_assert_eq!(owner, tag, "token {} in sequence {}", t, s.seq_id);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("packing: {e}"))?;
    Ok(format!("dedup idempotence, mask/unmask, packing boundaries: {cases} cases each"))
}

fn main() {
    let mut rep = Report { failed: 0 };
    let s = Duration::from_secs;
    let rows: [(&str, Phase, u64, &str); 5] = [
        ("TAPT", Phase::Tapt, 500, "0.2K"),
        ("kNN-50", Phase::KnnTapt(50), 24_000, "1.1K"),
        ("kNN-150", Phase::KnnTapt(150), 66_000, "3.2K"),
        ("kNN-500", Phase::KnnTapt(500), 185_000, "9.0K"),
        ("curated", Phase::CuratedTapt, 180_000, "8.8K"),
    ];
    for (label, phase, docs, expect) in rows {
        rep.run(&format!("steps table: {label} {docs} docs -> {expect}"), s(1), || table_row(phase, docs, expect));
    }
    rep.run("steps table: DAPT 12.5K, DAPT+TAPT ~12.6K", s(1), dapt_rows);
    rep.run("cost ratio DAPT/TAPT in [55, 65]", s(1), cost_ratio);
    rep.run("kNN equals brute-force oracle", s(10), knn_oracle);
    rep.run("mask rate and cross-epoch Jaccard", s(5), mask_monte_carlo);
    rep.run("overlap matrix properties", s(5), overlap_properties);
    rep.run("selection monotone in k", s(30), selection_monotone);
    rep.run("loss matrix diagonal dominance", s(30), loss_diagonal);
    rep.run("end-to-end determinism", s(120), determinism);
    rep.run("round-trip invariants", s(30), round_trips);
    if rep.failed > 0 {
        println!("{} criterion check(s) failed", rep.failed);
        std::process::exit(1);
    }
}
