#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use knowtype::corpus::{KnowledgeType, LabelSet};
use knowtype::embeddings::{EmbeddingTable, OovPolicy};
use knowtype::neural::{loss, Mode, NetworkParams};
use knowtype::text::{IndexSequence, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn network(dropout: f64) -> NetworkParams {
    let vocab = Vocabulary::from_tokens(["get", "set", "value", "list", "null"]);
    let mut vectors = HashMap::new();
    vectors.insert("get".to_string(), vec![0.3, -0.1, 0.25, 0.05]);
    vectors.insert("value".to_string(), vec![-0.2, 0.4, 0.1, -0.3]);
    let table = EmbeddingTable::from_vectors(vocab, 4, &vectors, OovPolicy::TrainableRandom { seed: 3, scale: 0.5 }).unwrap();
    let mut net = NetworkParams::new(table, 3, dropout, 11).unwrap();
    // larger LSTM weights so every gate sees a non-trivial gradient
    for x in net.lstm.w.iter_mut().chain(net.lstm.u.iter_mut()) {
        *x *= 2.0;
    }
    net
}

fn sequence() -> IndexSequence {
    // get, set, <oov>, value, list, pad, pad
    IndexSequence::from_indices(vec![1, 2, 6, 3, 4, 0, 0])
}

fn targets() -> LabelSet {
    [KnowledgeType::Concept, KnowledgeType::Example, KnowledgeType::Reference].into_iter().collect()
}

fn objective(net: &NetworkParams, mask_seed: Option<u64>) -> f64 {
    let out = match mask_seed {
        Some(s) => net.forward(&sequence(), Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))),
        None => net.forward(&sequence(), Mode::Infer),
    };
    loss(&out.unwrap().probabilities, targets())
}

fn rel_err(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff < 1e-10 {
        0.0
    } else {
        diff / a.abs().max(b.abs())
    }
}

type Accessor = fn(&mut NetworkParams) -> &mut Vec<f64>;

fn check(dropout: f64, mask_seed: Option<u64>) {
    let net = network(dropout);
    let cache = match mask_seed {
        Some(s) => net.forward(&sequence(), Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))).unwrap(),
        None => net.forward(&sequence(), Mode::Infer).unwrap(),
    };
    let grad = net.backward(&cache, targets());

    let groups: [(&str, Accessor, &[f64]); 9] = [
        ("lstm.w", |n| &mut n.lstm.w, &grad.lstm.w),
        ("lstm.u", |n| &mut n.lstm.u, &grad.lstm.u),
        ("lstm.b", |n| &mut n.lstm.b, &grad.lstm.b),
        ("dense1.w", |n| &mut n.dense1.w, &grad.dense1.w),
        ("dense1.b", |n| &mut n.dense1.b, &grad.dense1.b),
        ("dense2.w", |n| &mut n.dense2.w, &grad.dense2.w),
        ("dense2.b", |n| &mut n.dense2.b, &grad.dense2.b),
        ("output.w", |n| &mut n.output.w, &grad.output.w),
        ("output.b", |n| &mut n.output.b, &grad.output.b),
    ];
    let mut worst = 0.0f64;
    for (name, access, analytic) in groups {
        let mut probe = net.clone();
        for k in 0..analytic.len() {
            let orig = access(&mut probe)[k];
            access(&mut probe)[k] = orig + STEP;
            let up = objective(&probe, mask_seed);
            access(&mut probe)[k] = orig - STEP;
            let down = objective(&probe, mask_seed);
            access(&mut probe)[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let e = rel_err(numeric, analytic[k]);
            assert!(e < TOL, "{name}[{k}]: numeric {numeric} analytic {}", analytic[k]);
            worst = worst.max(e);
        }
    }

    // every trainable row the sequence reads; frozen rows must be absent
    let read_rows = [2usize, 4, 6];
    let mut keys: Vec<usize> = grad.embedding.keys().copied().collect();
    keys.sort_unstable();
    assert_eq!(keys, read_rows);
    for r in read_rows {
        for j in 0..4 {
            let mut probe = net.clone();
            probe.embedding.trainable_row_mut(r).unwrap()[j] += STEP;
            let up = objective(&probe, mask_seed);
            probe.embedding.trainable_row_mut(r).unwrap()[j] -= 2.0 * STEP;
            let down = objective(&probe, mask_seed);
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grad.embedding[&r][j];
            assert!(rel_err(numeric, analytic) < TOL, "embedding[{r}][{j}]: {numeric} vs {analytic}");
        }
    }
    assert!(worst < TOL);
}

#[test]
fn gradients_match_finite_differences() {
    check(0.0, None);
}

#[test]
fn gradients_match_finite_differences_with_dropout_masks() {
    check(0.3, Some(21));
}

#[test]
fn pretrained_rows_receive_no_gradient() {
    let net = network(0.0);
    let cache = net.forward(&sequence(), Mode::Infer).unwrap();
    let grad = net.backward(&cache, targets());
    assert!(!grad.embedding.contains_key(&1));
    assert!(!grad.embedding.contains_key(&3));
    assert!(!grad.embedding.contains_key(&0));
}
