use knowtype::corpus::{make_folds, scumble, split_holdout, Corpus, Document, KnowledgeType, LabelSet, NUM_TYPES};
use knowtype::embeddings::{build_cooccurrence, embed_sequence, EmbeddingTable, OovPolicy};
use knowtype::eval::metrics::{auprc, counts_at_threshold, hamming_loss, roc_auc, subset_accuracy, PredictionMatrix};
use knowtype::neural::{loss, Mode, NetworkParams};
use knowtype::text::{to_sequence, IndexSequence, SparseCountVector, Stopwords, Vocabulary};
use knowtype::traditional::{BaselineKind, BaselineModel, KnnModel};
use proptest::prelude::*;

fn label_sets(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<LabelSet>> {
    prop::collection::vec((1u16..(1 << NUM_TYPES)).prop_map(LabelSet::from_bits), n)
}

fn corpus_of(labels: &[LabelSet]) -> Corpus {
    let docs = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Document::new(format!("d{i}"), "", format!("word{} common", i % 5), *l))
        .collect();
    Corpus::new("p", docs).unwrap()
}

fn permute_labels(l: LabelSet, perm: &[usize]) -> LabelSet {
    l.iter().map(|t| KnowledgeType::ALL[perm[t.index()]]).collect()
}

fn score_matrix(n: usize) -> impl Strategy<Value = (Vec<[f64; NUM_TYPES]>, Vec<LabelSet>)> {
    (
        prop::collection::vec(prop::array::uniform12(0u32..=100).prop_map(|a| a.map(|v| v as f64 / 100.0)), n),
        prop::collection::vec((0u16..(1 << NUM_TYPES)).prop_map(LabelSet::from_bits), n),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scumble_ignores_order_and_label_names(
        labels in label_sets(1..40),
        perm in Just((0..NUM_TYPES).collect::<Vec<_>>()).prop_shuffle(),
        rot in 0usize..40,
    ) {
        let base = scumble(&corpus_of(&labels)).unwrap().mean;
        prop_assert!((0.0..=1.0).contains(&base));
        let mut rotated = labels.clone();
        rotated.rotate_left(rot % labels.len());
        prop_assert!((scumble(&corpus_of(&rotated)).unwrap().mean - base).abs() < 1e-12);
        let renamed: Vec<LabelSet> = labels.iter().map(|l| permute_labels(*l, &perm)).collect();
        prop_assert!((scumble(&corpus_of(&renamed)).unwrap().mean - base).abs() < 1e-12);
    }

    #[test]
    fn single_label_corpora_have_zero_scumble(types in prop::collection::vec(0usize..NUM_TYPES, 1..40)) {
        let labels: Vec<LabelSet> = types.iter().map(|&t| [KnowledgeType::ALL[t]].into_iter().collect()).collect();
        prop_assert_eq!(scumble(&corpus_of(&labels)).unwrap().mean, 0.0);
    }

    #[test]
    fn splits_are_deterministic_and_counts_consistent(labels in label_sets(4..40), seed in any::<u64>(), k in 2usize..4) {
        let c = corpus_of(&labels);
        prop_assert!(c.counts_consistent());
        let (a, b) = split_holdout(&c, 0.25, seed).unwrap();
        let (a2, b2) = split_holdout(&c, 0.25, seed).unwrap();
        prop_assert_eq!(a.documents(), a2.documents());
        prop_assert_eq!(b.documents(), b2.documents());
        prop_assert!(a.counts_consistent() && b.counts_consistent());
        let f1 = make_folds(&c, k, seed).unwrap();
        let f2 = make_folds(&c, k, seed).unwrap();
        for ((tr1, te1), (tr2, te2)) in f1.iter().zip(&f2) {
            prop_assert_eq!(tr1.documents(), tr2.documents());
            prop_assert_eq!(te1.documents(), te2.documents());
        }
    }

    #[test]
    fn vocabulary_depends_on_train_only(labels in label_sets(4..30), seed in any::<u64>(), junk in "[a-z]{3,8}") {
        let c = corpus_of(&labels);
        let (train, test) = split_holdout(&c, 0.3, seed).unwrap();
        let sw = Stopwords::english();
        let before = Vocabulary::build(&train, &sw);
        let mutated: Vec<Document> = test
            .documents()
            .iter()
            .map(|d| Document::new(d.id.clone(), "", format!("{} zz{junk}", d.text), d.labels))
            .collect();
        let _test = Corpus::new("t", mutated).unwrap();
        prop_assert_eq!(Vocabulary::build(&train, &sw), before.clone());
        let fresh = format!("zz{}", junk);
        prop_assert!(before.get(&fresh).is_none());
    }

    #[test]
    fn cooccurrence_rows_are_symmetric_and_normalised(
        docs in prop::collection::vec(prop::collection::vec("[a-f]", 1..12), 1..6),
        window in 1usize..5,
    ) {
        let Ok(x) = build_cooccurrence(&docs, window) else { return Ok(()); };
        let n = x.vocab().size();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(x.get(i, j), x.get(j, i));
            }
            if x.row_sum(i) > 0.0 {
                let total: f64 = (0..n).map(|j| x.probability(i, j)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedded_sequences_are_finite_with_zero_padding(
        tokens in prop::collection::vec("[a-h]", 0..12),
        max_len in 1usize..16,
        seed in any::<u64>(),
    ) {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "d"]);
        let table = EmbeddingTable::random(vocab, 3, seed, 0.5).unwrap();
        let seq = to_sequence(&tokens, table.vocab(), max_len);
        for policy in [OovPolicy::ZeroVector, OovPolicy::SharedOovRow, OovPolicy::TrainableRandom { seed, scale: 0.5 }] {
            let m = embed_sequence(&seq, &table, policy).unwrap();
            prop_assert!(m.iter().all(|v| v.is_finite()));
            for (t, &idx) in seq.as_slice().iter().enumerate() {
                if idx == 0 {
                    prop_assert!(m[t * 3..(t + 1) * 3].iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn one_nearest_neighbour_returns_own_labels(
        rows in prop::collection::vec(prop::collection::vec(0u32..4, 4), 1..12),
        labels in label_sets(12..13),
    ) {
        let xs: Vec<SparseCountVector> = rows
            .iter()
            .map(|r| SparseCountVector::from_pairs(r.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i as u32, c)).collect()))
            .collect();
        let ys = labels[..xs.len()].to_vec();
        let model = KnnModel::new(xs.clone(), ys.clone(), 1).unwrap();
        for (i, x) in xs.iter().enumerate() {
            // the earliest identical training vector wins ties
            let first = xs.iter().position(|v| v == x).unwrap();
            let want = ys[first].indicator().map(|b| if b { 1.0 } else { 0.0 });
            prop_assert_eq!(model.predict(x), want, "row {}", i);
        }
    }

    #[test]
    fn baselines_emit_exactly_one_type(labels in label_sets(1..30), seed in any::<u64>(), text in "[a-z ]{0,30}") {
        for kind in [BaselineKind::Mf1, BaselineKind::Mf2, BaselineKind::Rand] {
            let p = BaselineModel::fit(kind, &labels, seed).predict(&text);
            prop_assert!(p.iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert_eq!(p.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn padding_never_changes_the_network_output(
        idx in prop::collection::vec(1u32..7, 1..6),
        extra in 1usize..5,
        seed in any::<u64>(),
        bits in 0u16..(1 << NUM_TYPES),
    ) {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]);
        let table = EmbeddingTable::random(vocab, 4, seed, 0.5).unwrap();
        let net = NetworkParams::new(table, 3, 0.0, seed).unwrap();
        let short = IndexSequence::from_indices(idx.clone());
        let mut padded = idx;
        padded.extend(std::iter::repeat_n(0, extra));
        let p = net.predict(&short).unwrap();
        prop_assert_eq!(p, net.predict(&IndexSequence::from_indices(padded)).unwrap());
        let l = loss(&p, LabelSet::from_bits(bits));
        prop_assert!(l >= 0.0 && l.is_finite());
        let again = net.forward(&short, Mode::Infer).unwrap().probabilities;
        prop_assert_eq!(p, again);
    }

    #[test]
    fn ranking_metrics_ignore_monotone_transforms((scores, truth) in score_matrix(30)) {
        let m = PredictionMatrix::new(scores.clone(), truth.clone()).unwrap();
        let warped: Vec<[f64; NUM_TYPES]> = scores.iter().map(|r| r.map(|v| v * v * v)).collect();
        let w = PredictionMatrix::new(warped, truth).unwrap();
        for t in KnowledgeType::ALL {
            let (a, y) = m.column(t);
            let (b, _) = w.column(t);
            prop_assert_eq!(auprc(&a, &y), auprc(&b, &y));
            prop_assert_eq!(roc_auc(&a, &y), roc_auc(&b, &y));
        }
    }

    #[test]
    fn thresholded_metric_identities((scores, truth) in score_matrix(25), threshold in 0.0f64..1.0) {
        let m = PredictionMatrix::new(scores, truth).unwrap();
        let per_label: Vec<f64> = KnowledgeType::ALL
            .iter()
            .map(|&t| counts_at_threshold(&m, t, threshold).accuracy())
            .collect();
        let mean_error = per_label.iter().map(|a| 1.0 - a).sum::<f64>() / NUM_TYPES as f64;
        let h = hamming_loss(&m, threshold);
        prop_assert!((h - mean_error).abs() < 1e-12);
        let s = subset_accuracy(&m, threshold);
        prop_assert!(s <= per_label.iter().copied().fold(1.0, f64::min) + 1e-12);
        prop_assert_eq!(h.to_bits(), hamming_loss(&m, threshold).to_bits());
        prop_assert_eq!(s.to_bits(), subset_accuracy(&m, threshold).to_bits());
    }
}
