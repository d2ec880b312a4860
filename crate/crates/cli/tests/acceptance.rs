//! Acceptance gate for the matching engine. Each test checks one release
//! criterion and prints a single `acceptance NN <name>: PASS/FAIL` line
//! (visible with `--nocapture`); the test names mirror the criteria, so the
//! harness's own per-test lines double as the pass/fail report.
//!
//! Criteria 6–8 are statistical claims about mining and training on a
//! seeded synthetic corpus (500 resumes x 200 jobs, latent dimension 8,
//! 2% of pairs labeled, compatibility threshold at the 97th percentile of
//! latent cosines) and are judged across five seeds.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use fitrank_core::adapter::AdapterParams;
use fitrank_core::augment::{augment_all, augment_job, build_prompt, AugmentGenerator, MockLlm, RESUME_MARKER};
use fitrank_core::corpus::synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
use fitrank_core::corpus::{DocKind, Document, LabelEntry, LabelSet, Split};
use fitrank_core::embedder::providers::SyntheticProvider;
use fitrank_core::embedder::{embed_documents, normalize, EmbeddingRecord, EmbeddingStore};
use fitrank_core::evalreport::{evaluate, ndcg_at_k, recall_at_k, EvalDirection, EvalTask};
use fitrank_core::miner::{
    false_negative_rate, runner_up_mine, runner_up_mine_scored, MineDirection, PercentileRange,
};
use fitrank_core::scorer::{top_k, top_k_from_scores, ScoreMatrix};
use fitrank_core::seeding::rng_stream;
use fitrank_core::trainer::{
    contrastive_loss, train_adapter, train_iterative, IterativeConfig, TrainBatch, TrainConfig,
};

/// Print the criterion verdict line and fail the test on FAIL.
fn verdict(number: u8, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {number:02} {name}: {status} ({detail})");
    assert!(pass, "acceptance {number:02} {name}: FAIL ({detail})");
}

// ======================================================
// Shared synthetic-corpus protocol (criteria 6-8)
// ======================================================

const SYNTH_RESUMES: usize = 500;
const SYNTH_JOBS: usize = 200;
const SYNTH_LATENT_DIM: usize = 8;
const SYNTH_DENSITY: f64 = 0.02;
const SYNTH_THRESHOLD_PERCENTILE: f64 = 97.0;
const SYNTH_SEEDS: [u64; 5] = [101, 102, 103, 104, 105];
const SYNTH_STRENGTH: f64 = 2.0;

/// Generate the benchmark corpus for a seed. Two passes: the first fixes
/// the latent geometry and measures its cosine distribution, the second
/// regenerates with the compatibility threshold pinned to that
/// distribution's 97th percentile. The latent streams depend only on the
/// seed, so both passes share identical latents.
fn benchmark_corpus(seed: u64) -> SyntheticCorpus {
    let mut spec = SyntheticSpec {
        n_resumes: SYNTH_RESUMES,
        n_jobs: SYNTH_JOBS,
        latent_dim: SYNTH_LATENT_DIM,
        label_density: SYNTH_DENSITY,
        accept_threshold: 1.0,
        noise_sigma: 0.0,
        seed,
    };
    let probe = generate_synthetic(&spec).unwrap();
    spec.accept_threshold = probe.ground_truth.cosine_percentile(SYNTH_THRESHOLD_PERCENTILE);
    generate_synthetic(&spec).unwrap()
}

/// Embed a synthetic corpus with the token-decoding provider at the given
/// distortion strength.
fn embed_corpus(corpus: &SyntheticCorpus, seed: u64, strength: f64) -> EmbeddingStore {
    let provider = SyntheticProvider::with_strength(SYNTH_LATENT_DIM, seed, strength);
    embed_documents(&corpus.documents, &provider, None, None).unwrap()
}

fn job_pool(corpus: &SyntheticCorpus) -> Vec<String> {
    corpus.ground_truth.job_ids().to_vec()
}

fn resume_pool(corpus: &SyntheticCorpus) -> Vec<String> {
    corpus.ground_truth.resume_ids().to_vec()
}

/// Training setup for the synthetic benchmark: a learning rate that lets
/// the 8x8 adapter unwind the provider distortion in a few dozen epochs.
fn benchmark_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        hard_negatives_per_pair: 2,
        learning_rate: 0.02,
        epochs: 40,
        shuffle: true,
        seed,
        early_stop_patience: 40,
        ..TrainConfig::default()
    }
}

// ======================================================
// 1. Analytic gradient vs. finite differences
// ======================================================

struct GradInstance {
    store: EmbeddingStore,
    batch: TrainBatch,
    adapter: AdapterParams,
}

fn grad_instance(dim: usize, temperature: f64, seed: u64) -> GradInstance {
    let mut rng = rng_stream(seed, "acceptance-grad");
    let mut store = EmbeddingStore::new("test", dim);
    let mut insert = |id: String, rng: &mut rand_chacha::ChaCha8Rng| {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        store
            .insert(EmbeddingRecord {
                doc_id: id,
                dim,
                vector: normalize(&v).unwrap(),
                provider: "test".into(),
                augmented: false,
            })
            .unwrap();
    };
    let (mut pairs, mut extra_jobs, mut extra_resumes) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..4 {
        insert(format!("r{i}"), &mut rng);
        insert(format!("j{i}"), &mut rng);
        pairs.push((format!("r{i}"), format!("j{i}")));
        let (mut jobs, mut resumes) = (Vec::new(), Vec::new());
        for e in 0..2 {
            insert(format!("xj{i}_{e}"), &mut rng);
            insert(format!("xr{i}_{e}"), &mut rng);
            jobs.push(format!("xj{i}_{e}"));
            resumes.push(format!("xr{i}_{e}"));
        }
        extra_jobs.push(jobs);
        extra_resumes.push(resumes);
    }
    let mut w = vec![0.0; dim * dim];
    for (idx, entry) in w.iter_mut().enumerate() {
        let (p, q) = (idx / dim, idx % dim);
        *entry = if p == q { 1.0 } else { 0.0 } + rng.gen_range(-0.1..0.1);
    }
    GradInstance {
        store,
        batch: TrainBatch { pairs, extra_jobs, extra_resumes },
        adapter: AdapterParams::from_weights(w, dim, temperature, seed).unwrap(),
    }
}

#[test]
fn c01_gradient_matches_finite_differences() {
    let start = Instant::now();
    let h = 1e-5;
    let mut instances = 0u32;
    let mut worst: f64 = 0.0;
    for &dim in &[4usize, 8, 16] {
        for &temperature in &[0.01, 0.05] {
            for seed in 0..4 {
                if instances >= 20 {
                    break;
                }
                instances += 1;
                let inst = grad_instance(dim, temperature, 500 + seed);
                let (_, analytic) =
                    contrastive_loss(&inst.batch, &inst.store, &inst.adapter).unwrap();
                let base = inst.adapter.weights().to_vec();
                let mut numeric = vec![0.0; dim * dim];
                for idx in 0..dim * dim {
                    let probe = |delta: f64| {
                        let mut w = base.clone();
                        w[idx] += delta;
                        let a = AdapterParams::from_weights(w, dim, temperature, 0).unwrap();
                        contrastive_loss(&inst.batch, &inst.store, &a).unwrap().0
                    };
                    numeric[idx] = (probe(h) - probe(-h)) / (2.0 * h);
                }
                let scale = numeric
                    .iter()
                    .chain(&analytic)
                    .fold(0.0f64, |m, g| m.max(g.abs()))
                    .max(1e-12);
                let max_rel = analytic
                    .iter()
                    .zip(&numeric)
                    .map(|(a, n)| (a - n).abs() / scale)
                    .fold(0.0f64, f64::max);
                worst = worst.max(max_rel);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = instances == 20 && worst < 1e-4 && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "analytic gradient matches central finite differences",
        pass,
        &format!("{instances} instances, worst relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

// ======================================================
// 2. Uniform-logit loss closed form
// ======================================================

#[test]
fn c02_uniform_logits_give_the_closed_form_loss() {
    let dim = 6;
    let mut detail = String::new();
    let mut pass = true;
    for &l_total in &[1usize, 2, 5, 31] {
        let mut store = EmbeddingStore::new("test", dim);
        let vector = normalize(&vec![1.0; dim]).unwrap();
        let mut insert = |id: String| {
            store
                .insert(EmbeddingRecord {
                    doc_id: id,
                    dim,
                    vector: vector.clone(),
                    provider: "test".into(),
                    augmented: false,
                })
                .unwrap();
        };
        insert("r0".into());
        insert("j0".into());
        let (mut jobs, mut resumes) = (Vec::new(), Vec::new());
        for e in 0..l_total {
            insert(format!("xj{e}"));
            insert(format!("xr{e}"));
            jobs.push(format!("xj{e}"));
            resumes.push(format!("xr{e}"));
        }
        let batch = TrainBatch {
            pairs: vec![("r0".into(), "j0".into())],
            extra_jobs: vec![jobs],
            extra_resumes: vec![resumes],
        };
        let adapter = AdapterParams::identity(dim, 0.01, 0).unwrap();
        let (loss, _) = contrastive_loss(&batch, &store, &adapter).unwrap();
        let expected = 2.0 * (1.0 + l_total as f64).ln();
        let err = (loss - expected).abs();
        pass &= err <= 1e-9;
        detail.push_str(&format!("l={l_total}: |err|={err:.1e} "));
    }
    verdict(2, "identical logits give loss 2*ln(1+l)", pass, detail.trim());
}

// ======================================================
// 3. Metrics vs. an independent naive reimplementation
// ======================================================

fn naive_recall(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let mut hits = 0usize;
    for (i, id) in ranked.iter().enumerate() {
        if i >= k {
            break;
        }
        if relevant.contains(id) {
            hits += 1;
        }
    }
    hits as f64 / relevant.len() as f64
}

fn naive_ndcg(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, id) in ranked.iter().enumerate() {
        if i >= k {
            break;
        }
        if relevant.contains(id) {
            dcg += 1.0 / ((i as f64) + 2.0).log2();
        }
    }
    let mut idcg = 0.0;
    for rank in 1..=relevant.len().min(k) {
        idcg += 1.0 / ((rank as f64) + 1.0).log2();
    }
    dcg / idcg
}

#[test]
fn c03_metrics_match_a_naive_reimplementation() {
    let mut rng = rng_stream(3, "acceptance-metric-oracle");
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let n = rng.gen_range(1..=60);
        let mut ranked: Vec<String> = (0..n).map(|i| format!("c{i:03}")).collect();
        ranked.shuffle(&mut rng);
        let n_rel = rng.gen_range(1..=n);
        let relevant: BTreeSet<String> = rand::seq::index::sample(&mut rng, n, n_rel)
            .iter()
            .map(|i| format!("c{i:03}"))
            .collect();
        let k = rng.gen_range(1..=n + 5);
        let dr = (recall_at_k(&ranked, &relevant, k).unwrap()
            - naive_recall(&ranked, &relevant, k))
        .abs();
        let dn =
            (ndcg_at_k(&ranked, &relevant, k).unwrap() - naive_ndcg(&ranked, &relevant, k)).abs();
        worst = worst.max(dr).max(dn);
    }

    let ranked: Vec<String> = ["a", "b", "hit", "d"].iter().map(|s| s.to_string()).collect();
    let relevant: BTreeSet<String> = ["hit".to_string()].into_iter().collect();
    let rank3 = ndcg_at_k(&ranked, &relevant, 10).unwrap();

    let pass = worst <= 1e-12 && rank3 == 0.5;
    verdict(
        3,
        "metrics agree with the naive oracle",
        pass,
        &format!("1000 instances, worst |err| {worst:.1e}; single hit at rank 3 = {rank3}"),
    );
}

// ======================================================
// 4. Top-k equals the full descending sort
// ======================================================

#[test]
fn c04_top_k_equals_the_full_sort_for_every_k() {
    let mut rng = rng_stream(4, "acceptance-topk");
    let mut checked = 0u32;
    let mut pass = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..=50);
        // Integer-valued scores force plenty of ties, exercising the
        // ascending-id tie-break.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(-5i32..5))).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("c{i:03}")).collect();
        let mut full: Vec<(String, f64)> =
            ids.iter().cloned().zip(scores.iter().copied()).collect();
        full.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for k in 1..=n + 2 {
            let got = top_k_from_scores(&ids, &scores, k).unwrap();
            let want: Vec<(String, f64)> = full.iter().take(k).cloned().collect();
            pass &= got == want;
        }
        checked += 1;
    }
    verdict(4, "top-k is the k-prefix of the full sort", pass, &format!("{checked} score vectors"));
}

// ======================================================
// 5. Percentile-band rank bounds
// ======================================================

#[test]
fn c05_mined_ranks_respect_the_percentile_band() {
    let mut rng = rng_stream(5, "acceptance-band");
    let mut pass = true;
    let mut detail = String::new();
    for &m in &[50usize, 100, 997] {
        // Random score matrices with random bands and random labeled
        // positives: every mined rank must land inside the band's rank
        // interval and never touch a labeled positive.
        for trial in 0..25 {
            let cols: Vec<String> = (0..m).map(|i| format!("c{i:04}")).collect();
            let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let matrix = ScoreMatrix::new(vec!["anchor".into()], cols, scores).unwrap();
            let n_pos = rng.gen_range(0..5.min(m));
            let positive_ids: Vec<String> =
                matrix.col_ids().iter().take(n_pos).cloned().collect();
            let labels = LabelSet::new(
                positive_ids
                    .iter()
                    .map(|id| LabelEntry {
                        resume_id: "anchor".into(),
                        job_id: id.clone(),
                        label: 1,
                        split: Split::Train,
                    })
                    .collect(),
            )
            .unwrap();
            let eligible = m - positive_ids.len();
            let lo = f64::from(rng.gen_range(0u8..20));
            let range = PercentileRange::new(lo, lo + 4.0).unwrap();
            let (lo_rank, hi_rank) = range.rank_interval(eligible);
            if lo_rank >= hi_rank {
                continue;
            }
            let set = runner_up_mine_scored(
                &matrix,
                &labels,
                MineDirection::JobsForResumes,
                range,
                hi_rank - lo_rank,
                trial,
            )
            .unwrap();
            let mined = set.get("anchor").unwrap();
            let ranks: Vec<usize> = mined.iter().map(|n| n.rank.unwrap()).collect();
            pass &= ranks == (lo_rank + 1..=hi_rank).collect::<Vec<_>>();
            pass &= mined.iter().all(|n| !positive_ids.contains(&n.id));
        }

        // Adjacent one-point bands partition the eligible ranks.
        let cols: Vec<String> = (0..m).map(|i| format!("c{i:04}")).collect();
        let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let matrix = ScoreMatrix::new(vec!["anchor".into()], cols, scores).unwrap();
        let labels = LabelSet::new(Vec::new()).unwrap();
        let mut seen: Vec<usize> = Vec::with_capacity(m);
        for p in 0..100 {
            let range = PercentileRange::new(f64::from(p), f64::from(p) + 1.0).unwrap();
            let (lo_rank, hi_rank) = range.rank_interval(m);
            if lo_rank >= hi_rank {
                continue;
            }
            let set = runner_up_mine_scored(
                &matrix,
                &labels,
                MineDirection::JobsForResumes,
                range,
                hi_rank - lo_rank,
                9,
            )
            .unwrap();
            seen.extend(set.get("anchor").unwrap().iter().map(|n| n.rank.unwrap()));
        }
        let tiles = seen == (1..=m).collect::<Vec<_>>();
        pass &= tiles;
        detail.push_str(&format!("M={m}: tiles={tiles} "));
    }
    verdict(5, "mined ranks stay inside their percentile band", pass, detail.trim());
}

// ======================================================
// 6. Low-band mining hits more unlabeled positives
// ======================================================

#[test]
fn c06_top_band_mining_hits_more_unlabeled_positives() {
    let start = Instant::now();
    let mut wins = 0u32;
    let mut detail = String::new();
    for &seed in &SYNTH_SEEDS {
        let corpus = benchmark_corpus(seed);
        let store = embed_corpus(&corpus, seed, SYNTH_STRENGTH);
        let adapter = AdapterParams::identity(SYNTH_LATENT_DIM, 0.05, seed).unwrap();
        let anchors = resume_pool(&corpus);
        let jobs = job_pool(&corpus);

        let mine = |range: PercentileRange| {
            let set = runner_up_mine(
                &anchors,
                &jobs,
                &store,
                &adapter,
                &corpus.labels,
                MineDirection::JobsForResumes,
                range,
                1,
                seed,
            )
            .unwrap();
            false_negative_rate(&set, &corpus.ground_truth).unwrap()
        };
        let top_band = mine(PercentileRange::new(0.0, 1.0).unwrap());
        let later_band = mine(PercentileRange::new(3.0, 4.0).unwrap());
        let win = top_band > later_band;
        wins += u32::from(win);
        detail.push_str(&format!("seed {seed}: (0,1]={top_band:.3} (3,4]={later_band:.3} "));
    }
    let elapsed = start.elapsed();
    let pass = wins >= 4 && elapsed < Duration::from_secs(120);
    verdict(
        6,
        "the top band mines more unlabeled positives than the later band",
        pass,
        &format!("{wins}/5 seeds, {elapsed:.2?} — {}", detail.trim()),
    );
}

// ======================================================
// 7. Training lifts ranking quality
// ======================================================

#[test]
fn c07_training_lifts_ranking_quality() {
    let start = Instant::now();
    let mut lift_wins = 0u32;
    let mut mined_wins = 0u32;
    let mut detail = String::new();
    for &seed in &SYNTH_SEEDS {
        let corpus = benchmark_corpus(seed);
        let store = embed_corpus(&corpus, seed, SYNTH_STRENGTH);
        let jobs = job_pool(&corpus);
        let resumes = resume_pool(&corpus);
        let test_task = EvalTask::from_labels(
            &corpus.labels,
            Split::Test,
            EvalDirection::RankJobs,
            jobs.clone(),
            10,
        )
        .unwrap();
        let identity = AdapterParams::identity(SYNTH_LATENT_DIM, 0.05, seed).unwrap();
        let (baseline, _) = evaluate(&test_task, &store, &identity).unwrap();

        // Both arms keep their best-validation epoch, the same selection
        // the pipeline applies, then get scored on the held-out test task.
        let valid_task = EvalTask::from_labels(
            &corpus.labels,
            Split::Valid,
            EvalDirection::RankJobs,
            jobs.clone(),
            10,
        )
        .unwrap();
        let config = benchmark_train_config(seed);
        let pairs = corpus.labels.positive_pairs(Split::Train);

        // Arm A: in-batch negatives only.
        let in_batch =
            train_adapter(&config, &identity, &pairs, &store, None, None, Some(&valid_task))
                .unwrap();
        let (in_batch_report, _) = evaluate(&test_task, &store, &in_batch.adapter).unwrap();

        // Arm B: in-batch plus runner-up negatives mined with arm A's
        // trained adapter, both directions — negatives ranked near the
        // top by a competent ranker are the informative ones.
        let anchor_resumes: Vec<String> = {
            let set: BTreeSet<&String> = pairs.iter().map(|(r, _)| r).collect();
            set.into_iter().cloned().collect()
        };
        let anchor_jobs: Vec<String> = {
            let set: BTreeSet<&String> = pairs.iter().map(|(_, j)| j).collect();
            set.into_iter().cloned().collect()
        };
        let range = PercentileRange::new(3.0, 4.0).unwrap();
        let job_negs = runner_up_mine(
            &anchor_resumes,
            &jobs,
            &store,
            &in_batch.adapter,
            &corpus.labels,
            MineDirection::JobsForResumes,
            range,
            2,
            seed,
        )
        .unwrap();
        let resume_negs = runner_up_mine(
            &anchor_jobs,
            &resumes,
            &store,
            &in_batch.adapter,
            &corpus.labels,
            MineDirection::ResumesForJobs,
            range,
            2,
            seed,
        )
        .unwrap();
        let mined = train_adapter(
            &config,
            &identity,
            &pairs,
            &store,
            Some(&job_negs),
            Some(&resume_negs),
            Some(&valid_task),
        )
        .unwrap();
        let (mined_report, _) = evaluate(&test_task, &store, &mined.adapter).unwrap();

        let lift = mined_report.ndcg_at_k - baseline.ndcg_at_k;
        lift_wins += u32::from(lift >= 0.05);
        mined_wins += u32::from(mined_report.ndcg_at_k >= in_batch_report.ndcg_at_k);
        detail.push_str(&format!(
            "seed {seed}: raw={:.3} inbatch={:.3} mined={:.3} ",
            baseline.ndcg_at_k, in_batch_report.ndcg_at_k, mined_report.ndcg_at_k
        ));
    }
    let elapsed = start.elapsed();
    let pass = lift_wins >= 4 && mined_wins >= 3 && elapsed < Duration::from_secs(600);
    verdict(
        7,
        "training beats the untrained baseline and mined negatives help",
        pass,
        &format!(
            "lift>=0.05 in {lift_wins}/5, mined>=in-batch in {mined_wins}/5, {elapsed:.2?} — {}",
            detail.trim()
        ),
    );
}

// ======================================================
// 8. Iterated mining does not regress
// ======================================================

#[test]
fn c08_iterated_mining_does_not_regress() {
    let start = Instant::now();
    let mut wins = 0u32;
    let mut detail = String::new();
    for &seed in &SYNTH_SEEDS {
        let corpus = benchmark_corpus(seed);
        let store = embed_corpus(&corpus, seed, SYNTH_STRENGTH);
        let valid_task = EvalTask::from_labels(
            &corpus.labels,
            Split::Valid,
            EvalDirection::RankJobs,
            job_pool(&corpus),
            10,
        )
        .unwrap();
        // Score each round on both ranking directions, the same macro
        // view the pipeline reports; twice the queries means a steadier
        // per-round number.
        let valid_reverse = EvalTask::from_labels(
            &corpus.labels,
            Split::Valid,
            EvalDirection::RankResumes,
            resume_pool(&corpus),
            10,
        )
        .unwrap();
        let config = IterativeConfig {
            train: benchmark_train_config(seed),
            iterations: 3,
            range: PercentileRange::new(3.0, 4.0).unwrap(),
            n_per_anchor: 2,
            continue_from_previous: false,
        };
        let outcomes = train_iterative(
            &config,
            &store,
            &corpus.labels,
            &resume_pool(&corpus),
            &job_pool(&corpus),
            &valid_task,
            0.05,
        )
        .unwrap();
        let round_scores: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                let (reverse, _) = evaluate(&valid_reverse, &store, &o.adapter).unwrap();
                let forward_n = o.valid.n_queries as f64;
                let reverse_n = reverse.n_queries as f64;
                (o.valid.ndcg_at_k * forward_n + reverse.ndcg_at_k * reverse_n)
                    / (forward_n + reverse_n)
            })
            .collect();
        let first = round_scores[0];
        let later = round_scores[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let win = later >= first;
        wins += u32::from(win);
        detail.push_str(&format!(
            "seed {seed}: [{}] ",
            round_scores
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    let elapsed = start.elapsed();
    let pass = wins >= 3;
    verdict(
        8,
        "later mining rounds match or beat the first round",
        pass,
        &format!("{wins}/5 seeds, {elapsed:.2?} — {}", detail.trim()),
    );
}

// ======================================================
// 9. Prompt template, combination marker, and generation cache
// ======================================================

#[test]
fn c09_prompt_template_marker_and_cache() {
    // Golden rendering.
    let example_job = Document::new(
        "j-ex",
        DocKind::Job,
        vec![
            ("title".into(), "Backend Engineer".into()),
            ("requirements".into(), "Rust, PostgreSQL, and three years of API design.".into()),
        ],
    );
    let example_resume = Document::new(
        "r-ex",
        DocKind::Resume,
        vec![
            ("summary".into(), "Backend engineer with four years of Rust services.".into()),
            ("skills".into(), "Rust, PostgreSQL, gRPC".into()),
        ],
    );
    let target = Document::new(
        "j-tgt",
        DocKind::Job,
        vec![
            ("title".into(), "Data Engineer".into()),
            ("requirements".into(), "Spark pipelines and SQL modeling.".into()),
        ],
    );
    let prompt = build_prompt(&[(&example_job, &example_resume)], &target, 1).unwrap();
    let golden_ok = prompt.rendered == include_str!("golden/one_shot_prompt.txt");

    // Marker between job text and generated resume.
    let augmented = augment_job(&target, "A hypothetical data engineer.").unwrap();
    let marker_ok = augmented.combined_text
        == format!(
            "{}\n{}\n{}",
            augmented.original_text, RESUME_MARKER, augmented.generated_resume
        )
        && augmented.combined_text.contains("[\"An Example Resume\"]");

    // Cache behavior over the full augment stage: two jobs with identical
    // text share one prompt, a third differs, so exactly two client calls.
    let twin_a = Document::new("j1", DocKind::Job, vec![("title".into(), "Analyst".into())]);
    let twin_b = Document::new("j2", DocKind::Job, vec![("title".into(), "Analyst".into())]);
    let other = Document::new("j3", DocKind::Job, vec![("title".into(), "Designer".into())]);
    let mock = MockLlm::fixed("GENERATED");
    let mut generator = AugmentGenerator::new(&mock, "mock", 0.0);
    let records_first = augment_all(
        &[&twin_a, &twin_b, &other],
        &[(&example_job, &example_resume)],
        1,
        &mut generator,
    )
    .unwrap();
    let records_second = augment_all(
        &[&twin_a, &twin_b, &other],
        &[(&example_job, &example_resume)],
        1,
        &mut generator,
    )
    .unwrap();
    let cache_ok = mock.calls() == 2 && records_first == records_second;

    let pass = golden_ok && marker_ok && cache_ok;
    verdict(
        9,
        "prompt template, marker, and one call per distinct prompt",
        pass,
        &format!("golden={golden_ok} marker={marker_ok} cache={cache_ok} calls={}", mock.calls()),
    );
}

// ======================================================
// 10. Determinism and scale invariances
// ======================================================

fn run_pipeline_into(out_dir: &Path) {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dummy");
    let status = Command::new(env!("CARGO_BIN_EXE_fitrank"))
        .args([
            "pipeline",
            "--config",
            fixtures.join("config.json").to_str().unwrap(),
            "--docs",
            fixtures.join("docs.jsonl").to_str().unwrap(),
            "--labels",
            fixtures.join("labels.jsonl").to_str().unwrap(),
            "--attributes",
            fixtures.join("attributes.jsonl").to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "pipeline run failed");
}

#[test]
fn c10_reruns_are_bitwise_identical_and_rankings_scale_invariant() {
    // Same config and seed twice -> byte-identical adapter and report.
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_pipeline_into(dir_a.path());
    run_pipeline_into(dir_b.path());
    let same = |name: &str| {
        std::fs::read(dir_a.path().join(name)).unwrap()
            == std::fs::read(dir_b.path().join(name)).unwrap()
    };
    let adapter_same = same("adapter.json");
    let report_same = same("report.json");

    // Rankings are invariant to positive scaling of raw embeddings and of
    // the adapter weights (argsort equality).
    let dim = 16;
    let n = 50;
    let mut rng = rng_stream(10, "acceptance-scale");
    let mut plain = EmbeddingStore::new("test", dim);
    let mut scaled = EmbeddingStore::new("test", dim);
    let mut ids = Vec::new();
    for i in 0..n {
        let id = format!("d{i:02}");
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stretched: Vec<f64> = v.iter().map(|x| x * 3.7).collect();
        for (store, vector) in [(&mut plain, &v), (&mut scaled, &stretched)] {
            store
                .insert(EmbeddingRecord {
                    doc_id: id.clone(),
                    dim,
                    vector: normalize(vector).unwrap(),
                    provider: "test".into(),
                    augmented: false,
                })
                .unwrap();
        }
        ids.push(id);
    }
    let mut w = vec![0.0; dim * dim];
    for (idx, entry) in w.iter_mut().enumerate() {
        let (p, q) = (idx / dim, idx % dim);
        *entry = if p == q { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3);
    }
    let adapter = AdapterParams::from_weights(w.clone(), dim, 0.05, 0).unwrap();
    let adapter_scaled = AdapterParams::from_weights(
        w.iter().map(|x| x * 2.9).collect(),
        dim,
        0.05,
        0,
    )
    .unwrap();
    let pool: Vec<String> = ids[1..].to_vec();
    let order = |store: &EmbeddingStore, a: &AdapterParams| -> Vec<String> {
        top_k(&ids[0], &pool, store, pool.len(), a)
            .unwrap()
            .ranked
            .into_iter()
            .map(|(id, _)| id)
            .collect()
    };
    let base_order = order(&plain, &adapter);
    let vectors_scaled_ok = order(&scaled, &adapter) == base_order;
    let weights_scaled_ok = order(&plain, &adapter_scaled) == base_order;

    let pass = adapter_same && report_same && vectors_scaled_ok && weights_scaled_ok;
    verdict(
        10,
        "identical runs are bitwise equal; rankings ignore positive scaling",
        pass,
        &format!(
            "adapter={adapter_same} report={report_same} vec-scale={vectors_scaled_ok} w-scale={weights_scaled_ok}"
        ),
    );
}

// ======================================================
// 11. End-to-end pipeline smoke run
// ======================================================

#[test]
fn c11_pipeline_completes_offline_with_all_artifacts() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    run_pipeline_into(dir.path());
    let expected = [
        "adapter.json",
        "adapter_bootstrap.json",
        "augmentations.jsonl",
        "bias.json",
        "embed_cache.jsonl",
        "embeddings.jsonl",
        "manifest.json",
        "negatives.jsonl",
        "report.json",
        "train_log.jsonl",
    ];
    let missing: Vec<&str> = expected
        .iter()
        .filter(|name| !dir.path().join(name).is_file())
        .copied()
        .collect();
    let elapsed = start.elapsed();
    let pass = missing.is_empty() && elapsed < Duration::from_secs(60);
    verdict(
        11,
        "pipeline emits every artifact offline",
        pass,
        &format!("missing={missing:?}, {elapsed:.2?}"),
    );
}
