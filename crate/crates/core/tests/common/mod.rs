#![allow(dead_code)]

use std::path::Path;

use knowtype::corpus::{write_jsonl, Document, KnowledgeType, LabelSet, NUM_TYPES};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FILLER: [&str; 16] = [
    "widget", "buffer", "socket", "handle", "stream", "parser", "cursor", "token", "frame", "packet", "record",
    "schema", "vector", "matrix", "thread", "kernel",
];

/// The token that marks a type in planted corpora.
pub fn key_token(t: KnowledgeType) -> String {
    format!("key{}", (b'a' + t.index() as u8) as char)
}

/// Documents carrying `per_doc` distinct types, each signalled by its key
/// token amid filler words.
pub fn planted_documents(n: usize, per_doc: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..NUM_TYPES).collect();
    (0..n)
        .map(|i| {
            let types: Vec<usize> = all.choose_multiple(&mut rng, per_doc).copied().collect();
            let mut words: Vec<String> = types.iter().map(|&t| key_token(KnowledgeType::ALL[t])).collect();
            for _ in 0..4 {
                words.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
            }
            words.shuffle(&mut rng);
            let labels: LabelSet = types.iter().map(|&t| KnowledgeType::ALL[t]).collect();
            Document::new(format!("d{i}"), format!("Elem{}", i % 7), words.join(" "), labels)
        })
        .collect()
}

pub fn write_corpus(path: &Path, docs: &[Document]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let f = std::fs::File::create(path).unwrap();
    write_jsonl(f, docs).unwrap();
}
