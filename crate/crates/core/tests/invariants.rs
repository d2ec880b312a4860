//! Property tests for the structural invariants the library leans on:
//! flattening round-trips, exact top-k, percentile-band mining bounds, loss
//! symmetry, and metric ranges.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use fitrank_core::adapter::AdapterParams;
use fitrank_core::corpus::{flatten_document, DocKind, Document, LabelEntry, LabelSet, Split};
use fitrank_core::embedder::{normalize, EmbeddingRecord, EmbeddingStore};
use fitrank_core::evalreport::{ndcg_at_k, recall_at_k};
use fitrank_core::miner::{runner_up_mine_scored, MineDirection, PercentileRange};
use fitrank_core::scorer::{top_k_from_scores, ScoreMatrix};
use fitrank_core::seeding::rng_stream;
use fitrank_core::trainer::{contrastive_loss, TrainBatch};

// ======================================================
// Flattening
// ======================================================

/// Inverse of `flatten_document` for well-formed field values (no value
/// line starts with "## ").
fn unflatten(text: &str) -> Vec<(String, String)> {
    let body = text.strip_suffix('\n').expect("flattened text ends with newline");
    let mut fields: Vec<(String, Vec<&str>)> = Vec::new();
    for line in body.split('\n') {
        if let Some(name) = line.strip_prefix("## ") {
            fields.push((name.to_string(), Vec::new()));
        } else {
            fields.last_mut().expect("value line before any header").1.push(line);
        }
    }
    fields.into_iter().map(|(name, lines)| (name, lines.join("\n"))).collect()
}

fn field_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,11}"
}

/// Multi-line values whose lines never start with "## ", so headers stay
/// unambiguous.
fn field_value() -> impl Strategy<Value = String> {
    proptest::collection::vec("[a-zA-Z0-9 ,.#-]{0,24}", 1..4)
        .prop_map(|lines| lines.join("\n"))
        .prop_filter("no value line may look like a header", |v| {
            v.split('\n').all(|line| !line.starts_with("## "))
        })
}

fn document() -> impl Strategy<Value = Document> {
    proptest::collection::vec((field_name(), field_value()), 1..5)
        .prop_map(|fields| Document::new("d", DocKind::Job, fields))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flatten_round_trips(doc in document()) {
        let text = flatten_document(&doc);
        prop_assert_eq!(unflatten(&text), doc.fields);
    }

    /// Round-tripping implies injectivity: distinct field sequences give
    /// distinct flattened texts.
    #[test]
    fn flatten_separates_distinct_documents(a in document(), b in document()) {
        if a.fields != b.fields {
            prop_assert_ne!(flatten_document(&a), flatten_document(&b));
        }
    }
}

// ======================================================
// Top-k
// ======================================================

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The top-k of a score vector is the k-prefix of the full descending
    /// sort with ties broken by ascending id — for every k.
    #[test]
    fn top_k_is_a_sorted_prefix(
        scores in proptest::collection::vec(-10i32..10, 1..40),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let ids: Vec<String> = (0..scores.len()).map(|i| format!("c{i:03}")).collect();
        let mut full: Vec<(String, f64)> =
            ids.iter().cloned().zip(scores.iter().copied()).collect();
        full.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for k in 1..=scores.len() + 2 {
            let got = top_k_from_scores(&ids, &scores, k).unwrap();
            let want: Vec<(String, f64)> = full.iter().take(k).cloned().collect();
            prop_assert_eq!(got, want, "k = {}", k);
        }
    }
}

// ======================================================
// Percentile-band mining
// ======================================================

fn band_matrix(m: usize, seed: u64) -> ScoreMatrix {
    let mut rng = rng_stream(seed, "test-band-matrix");
    let cols: Vec<String> = (0..m).map(|i| format!("c{i:04}")).collect();
    let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
    ScoreMatrix::new(vec!["anchor".into()], cols, scores).unwrap()
}

fn positives_label_set(ids: &[String]) -> LabelSet {
    let entries: Vec<LabelEntry> = ids
        .iter()
        .map(|id| LabelEntry {
            resume_id: "anchor".into(),
            job_id: id.clone(),
            label: 1,
            split: Split::Train,
        })
        .collect();
    LabelSet::new(entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every mined rank falls inside the band's rank interval, computed
    /// over candidates that are neither the anchor nor labeled positives,
    /// and no labeled positive is ever mined.
    #[test]
    fn mined_ranks_stay_inside_the_band(
        m_choice in 0usize..3,
        seed in 0u64..1_000,
        band_lo in 0u8..20,
        n_positives in 0usize..5,
    ) {
        let m = [50usize, 100, 997][m_choice];
        let matrix = band_matrix(m, seed);
        // Label the first few candidate ids positive; they must vanish from
        // the eligible list.
        let positive_ids: Vec<String> =
            matrix.col_ids().iter().take(n_positives).cloned().collect();
        let labels = positives_label_set(&positive_ids);
        let eligible = m - positive_ids.len();

        let range =
            PercentileRange::new(f64::from(band_lo), f64::from(band_lo) + 4.0).unwrap();
        let (lo_rank, hi_rank) = range.rank_interval(eligible);
        prop_assume!(lo_rank < hi_rank);
        let band_len = hi_rank - lo_rank;

        let set = runner_up_mine_scored(
            &matrix,
            &labels,
            MineDirection::JobsForResumes,
            range,
            band_len,
            seed,
        )
        .unwrap();
        let mined = set.get("anchor").unwrap();
        prop_assert_eq!(mined.len(), band_len);

        // Recompute the eligible ranking independently.
        let mut ranked: Vec<(String, f64)> = matrix
            .col_ids()
            .iter()
            .zip(matrix.row("anchor").unwrap())
            .filter(|(id, _)| !positive_ids.contains(id))
            .map(|(id, s)| (id.clone(), *s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        for neg in mined {
            let rank = neg.rank.unwrap();
            prop_assert!(rank > lo_rank && rank <= hi_rank,
                "rank {} outside ({}, {}]", rank, lo_rank, hi_rank);
            prop_assert!(!positive_ids.contains(&neg.id), "mined a labeled positive");
            prop_assert_ne!(&neg.id, "anchor");
            prop_assert_eq!(&ranked[rank - 1].0, &neg.id, "recorded rank disagrees");
        }

        // Taking the whole band must yield exactly the band's rank range.
        let got_ranks: Vec<usize> = mined.iter().map(|n| n.rank.unwrap()).collect();
        let want_ranks: Vec<usize> = (lo_rank + 1..=hi_rank).collect();
        prop_assert_eq!(got_ranks, want_ranks);
    }
}

/// Adjacent one-point percentile bands tile the eligible rank list: over
/// the 100 bands (p, p+1], every rank 1..=M is mined exactly once.
#[test]
fn adjacent_one_point_bands_partition_the_ranks() {
    for m in [50usize, 100, 997] {
        let matrix = band_matrix(m, 7);
        let labels = LabelSet::new(Vec::new()).unwrap();
        let mut seen: Vec<usize> = Vec::with_capacity(m);
        for p in 0..100 {
            let range = PercentileRange::new(f64::from(p), f64::from(p) + 1.0).unwrap();
            let (lo_rank, hi_rank) = range.rank_interval(m);
            if lo_rank >= hi_rank {
                continue; // band narrower than one rank at this M
            }
            let set = runner_up_mine_scored(
                &matrix,
                &labels,
                MineDirection::JobsForResumes,
                range,
                hi_rank - lo_rank,
                3,
            )
            .unwrap();
            seen.extend(set.get("anchor").unwrap().iter().map(|n| n.rank.unwrap()));
        }
        let want: Vec<usize> = (1..=m).collect();
        assert_eq!(seen, want, "bands do not tile the ranks at M = {m}");
    }
}

// ======================================================
// Contrastive loss symmetry
// ======================================================

fn batch_store(n_pairs: usize, dim: usize, seed: u64) -> (EmbeddingStore, Vec<(String, String)>) {
    let mut rng = rng_stream(seed, "test-batch-store");
    let mut store = EmbeddingStore::new("test", dim);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        for prefix in ["r", "j"] {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            store
                .insert(EmbeddingRecord {
                    doc_id: format!("{prefix}{i}"),
                    dim,
                    vector: normalize(&v).unwrap(),
                    provider: "test".into(),
                    augmented: false,
                })
                .unwrap();
        }
        pairs.push((format!("r{i}"), format!("j{i}")));
    }
    (store, pairs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Reordering the pairs of a batch changes neither the loss nor the
    /// (shared) candidate sets — the objective is symmetric in pair order.
    #[test]
    fn loss_ignores_pair_order(
        n_pairs in 2usize..6,
        dim in 2usize..6,
        seed in 0u64..1_000,
    ) {
        let (store, pairs) = batch_store(n_pairs, dim, seed);
        let adapter = AdapterParams::identity(dim, 0.05, 0).unwrap();
        let (base_loss, _) =
            contrastive_loss(&TrainBatch::in_batch(pairs.clone()), &store, &adapter).unwrap();

        let mut shuffled = pairs;
        shuffled.shuffle(&mut rng_stream(seed, "test-batch-shuffle"));
        let (shuffled_loss, _) =
            contrastive_loss(&TrainBatch::in_batch(shuffled), &store, &adapter).unwrap();

        prop_assert!((base_loss - shuffled_loss).abs() < 1e-12,
            "loss moved under pair reorder: {} vs {}", base_loss, shuffled_loss);
    }
}

// ======================================================
// Metric ranges
// ======================================================

fn ranking_and_relevant() -> impl Strategy<Value = (Vec<String>, BTreeSet<String>)> {
    (2usize..30).prop_flat_map(|n| {
        let ids: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
        proptest::collection::btree_set(0usize..n, 1..=n.min(8)).prop_map(move |picked| {
            let relevant = picked.iter().map(|i| ids[*i].clone()).collect();
            (ids.clone(), relevant)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_stay_in_unit_range_and_recall_grows_with_k(
        (ids, relevant) in ranking_and_relevant(),
        k in 1usize..35,
    ) {
        let r = recall_at_k(&ids, &relevant, k).unwrap();
        let n = ndcg_at_k(&ids, &relevant, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&r), "recall {} out of range", r);
        prop_assert!(n >= 0.0 && n <= 1.0 + 1e-12, "ndcg {} out of range", n);

        if k > 1 {
            let r_prev = recall_at_k(&ids, &relevant, k - 1).unwrap();
            prop_assert!(r + 1e-15 >= r_prev, "recall shrank as k grew");
        }

        // Ranking every relevant item first is ideal.
        let mut ideal: Vec<String> = relevant.iter().cloned().collect();
        ideal.extend(ids.iter().filter(|id| !relevant.contains(*id)).cloned());
        let ideal_ndcg = ndcg_at_k(&ideal, &relevant, k).unwrap();
        prop_assert!((ideal_ndcg - 1.0).abs() < 1e-12, "ideal ranking scored {}", ideal_ndcg);
        if k >= relevant.len() {
            let ideal_recall = recall_at_k(&ideal, &relevant, k).unwrap();
            prop_assert!((ideal_recall - 1.0).abs() < 1e-15);
        }
    }
}
