//! Word vectors: loading pre-trained text files, a small GloVe trainer, and
//! lookup of index sequences under an out-of-vocabulary policy.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{IndexSequence, Vocabulary};

/// How vocabulary words without a pre-trained vector are represented.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OovPolicy {
    /// Missing words read as the zero vector.
    ZeroVector,
    /// Missing words get their own seeded random row, updated during network
    /// training while pre-trained rows stay frozen.
    TrainableRandom { seed: u64, scale: f64 },
    /// Missing words share one frozen row holding the mean known vector.
    SharedOovRow,
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::TrainableRandom {
            seed: 0,
            scale: 0.05,
        }
    }
}

/// `(vocab.size + 2) x dim` matrix. Row 0 is padding, rows `1..=size` belong
/// to vocabulary words and row `size + 1` is the shared OOV row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    matrix: Vec<f64>,
    /// Rows that came from a vector source.
    known: Vec<bool>,
    trainable: Vec<bool>,
    policy: OovPolicy,
}

impl EmbeddingTable {
    /// Table for `vocab` filled from `vectors`; everything else follows `policy`.
    pub fn from_vectors(
        vocab: Vocabulary,
        dim: usize,
        vectors: &HashMap<String, Vec<f64>>,
        policy: OovPolicy,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let rows = vocab.size() + 2;
        let mut matrix = vec![0.0; rows * dim];
        let mut known = vec![false; rows];
        for (r, word) in vocab.tokens().iter().enumerate() {
            if let Some(v) = vectors.get(word) {
                if v.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "vector for `{word}` has {} values, expected {dim}",
                        v.len()
                    )));
                }
                matrix[(r + 1) * dim..(r + 2) * dim].copy_from_slice(v);
                known[r + 1] = true;
            }
        }
        let mut trainable = vec![false; rows];
        let shared = rows - 1;
        match policy {
            OovPolicy::ZeroVector => {}
            OovPolicy::TrainableRandom { seed, scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for r in 1..rows {
                    if !known[r] {
                        for x in &mut matrix[r * dim..(r + 1) * dim] {
                            *x = rng.gen_range(-scale..=scale);
                        }
                        trainable[r] = true;
                    }
                }
            }
            OovPolicy::SharedOovRow => {
                let n_known = known.iter().filter(|k| **k).count();
                if n_known > 0 {
                    let mut mean = vec![0.0; dim];
                    for r in (0..rows).filter(|&r| known[r]) {
                        for (m, x) in mean.iter_mut().zip(&matrix[r * dim..(r + 1) * dim]) {
                            *m += x;
                        }
                    }
                    for (slot, m) in matrix[shared * dim..].iter_mut().zip(mean) {
                        *slot = m / n_known as f64;
                    }
                }
            }
        }
        Ok(EmbeddingTable {
            vocab,
            dim,
            matrix,
            known,
            trainable,
            policy,
        })
    }

    /// Table with no pre-trained vectors at all.
    pub fn random(vocab: Vocabulary, dim: usize, seed: u64, scale: f64) -> Result<Self> {
        Self::from_vectors(vocab, dim, &HashMap::new(), OovPolicy::TrainableRandom { seed, scale })
    }

    /// Reassembles a persisted table.
    pub fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        matrix: Vec<f64>,
        known: Vec<bool>,
        trainable: Vec<bool>,
        policy: OovPolicy,
    ) -> Result<Self> {
        let rows = vocab.size() + 2;
        if matrix.len() != rows * dim || known.len() != rows || trainable.len() != rows {
            return Err(Error::ModelFormat("embedding table shape mismatch".into()));
        }
        if trainable[0] || matrix[..dim].iter().any(|&x| x != 0.0) {
            return Err(Error::ModelFormat("padding row must be zero and frozen".into()));
        }
        Ok(EmbeddingTable {
            vocab,
            dim,
            matrix,
            known,
            trainable,
            policy,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.vocab.size() + 2
    }

    pub fn policy(&self) -> OovPolicy {
        self.policy
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn known(&self) -> &[bool] {
        &self.known
    }

    pub fn trainable(&self) -> &[bool] {
        &self.trainable
    }

    pub fn is_oov(&self, row: usize) -> bool {
        row > 0 && !self.known[row]
    }

    pub fn is_trainable(&self, row: usize) -> bool {
        self.trainable[row]
    }

    pub fn trainable_rows(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&r| self.trainable[r]).collect()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    /// Mutable access to a trainable row; `None` for frozen rows.
    pub fn trainable_row_mut(&mut self, r: usize) -> Option<&mut [f64]> {
        if self.trainable[r] {
            let d = self.dim;
            Some(&mut self.matrix[r * d..(r + 1) * d])
        } else {
            None
        }
    }

    /// Vector for a word, if in the vocabulary.
    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.get(word).map(|i| self.row(i as usize))
    }

    /// Matrix row read for sequence index `index`, or `None` when the position
    /// reads as the zero vector.
    pub fn resolve_row(&self, index: u32, policy: OovPolicy) -> Result<Option<usize>> {
        let index = index as usize;
        if index >= self.rows() {
            return Err(Error::InvalidArgument(format!(
                "index {index} outside embedding table of {} rows",
                self.rows()
            )));
        }
        if index == 0 {
            return Ok(None);
        }
        if !self.is_oov(index) {
            return Ok(Some(index));
        }
        Ok(match policy {
            OovPolicy::ZeroVector => None,
            OovPolicy::TrainableRandom { .. } => Some(index),
            OovPolicy::SharedOovRow => Some(self.rows() - 1),
        })
    }
}

/// Looks up every position of `seq`, producing a row-major `max_len x dim` matrix.
pub fn embed_sequence(seq: &IndexSequence, table: &EmbeddingTable, policy: OovPolicy) -> Result<Vec<f64>> {
    let dim = table.dim();
    let mut out = vec![0.0; seq.max_len() * dim];
    for (t, &idx) in seq.as_slice().iter().enumerate() {
        if let Some(r) = table.resolve_row(idx, policy)? {
            out[t * dim..(t + 1) * dim].copy_from_slice(table.row(r));
        }
    }
    Ok(out)
}

/// Reads `word v1 ... vd` lines, keeping only words accepted by `keep`.
pub fn read_embedding_text<F>(path: &Path, expected_dim: usize, keep: F) -> Result<HashMap<String, Vec<f64>>>
where
    F: Fn(&str) -> bool,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    let mut any = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        any = true;
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        if values.len() != expected_dim {
            return Err(Error::parse(
                lineno,
                format!("`{word}` has {} values, expected {expected_dim}", values.len()),
            ));
        }
        if !keep(word) {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(lineno, format!("bad value for `{word}`: {e}")))?;
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(lineno, format!("non-finite value for `{word}`")));
        }
        out.insert(word.to_string(), vector);
    }
    if !any {
        return Err(Error::parse(0, format!("embedding file {} is empty", path.display())));
    }
    Ok(out)
}

/// Loads a text embedding file restricted to `vocab`.
pub fn load_embedding_text(
    path: &Path,
    expected_dim: usize,
    vocab: Vocabulary,
    policy: OovPolicy,
) -> Result<EmbeddingTable> {
    let vectors = read_embedding_text(path, expected_dim, |w| vocab.get(w).is_some())?;
    EmbeddingTable::from_vectors(vocab, expected_dim, &vectors, policy)
}

pub fn write_embedding_text(path: &Path, words: &[String], vectors: &[f64], dim: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (word, v) in words.iter().zip(vectors.chunks(dim)) {
        let mut line = word.clone();
        for x in v {
            line.push(' ');
            line.push_str(&format!("{x:.6}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Binary cache: `EMB1`, u32 word count, u32 dim, length-prefixed UTF-8
/// words, then row-major f32 values. All integers little-endian.
pub fn write_embedding_cache<W: Write>(mut w: W, words: &[String], vectors: &[f64], dim: usize) -> std::io::Result<()> {
    w.write_all(EMB_MAGIC)?;
    w.write_u32::<LittleEndian>(words.len() as u32)?;
    w.write_u32::<LittleEndian>(dim as u32)?;
    for word in words {
        w.write_u32::<LittleEndian>(word.len() as u32)?;
        w.write_all(word.as_bytes())?;
    }
    for &x in &vectors[..words.len() * dim] {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    Ok(())
}

pub fn read_embedding_cache<R: Read>(mut r: R) -> Result<(Vec<String>, Vec<f64>, usize)> {
    let bad = |e: std::io::Error| Error::ModelFormat(format!("embedding cache: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(bad)?;
    if &magic != EMB_MAGIC {
        return Err(Error::ModelFormat("embedding cache: bad magic".into()));
    }
    let n = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(bad)?;
        words.push(String::from_utf8(buf).map_err(|e| Error::ModelFormat(e.to_string()))?);
    }
    let mut vectors = vec![0.0; n * dim];
    for x in vectors.iter_mut() {
        *x = r.read_f32::<LittleEndian>().map_err(bad)? as f64;
    }
    Ok((words, vectors, dim))
}

/// Sparse symmetric word co-occurrence weights with cached row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    vocab: Vocabulary,
    /// Row `i` holds the co-occurrences of word `i + 1`, keyed by 0-based column.
    rows: Vec<BTreeMap<u32, f64>>,
    row_sums: Vec<f64>,
}

impl CooccurrenceMatrix {
    /// Builds from explicit `(i, j, x)` triples over 0-based word positions.
    pub fn from_entries(vocab: Vocabulary, entries: &[(u32, u32, f64)]) -> Result<Self> {
        let n = vocab.size();
        let mut rows = vec![BTreeMap::new(); n];
        for &(i, j, x) in entries {
            if i as usize >= n || j as usize >= n || !(x > 0.0) || !x.is_finite() {
                return Err(Error::InvalidArgument(format!("bad co-occurrence entry ({i}, {j}, {x})")));
            }
            *rows[i as usize].entry(j).or_insert(0.0) += x;
        }
        let row_sums = rows.iter().map(|r| r.values().sum()).collect();
        Ok(CooccurrenceMatrix { vocab, rows, row_sums })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Weight of `j` in the context of `i` (0-based word positions).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(&(j as u32)).copied().unwrap_or(0.0)
    }

    pub fn get_words(&self, a: &str, b: &str) -> f64 {
        match (self.vocab.get(a), self.vocab.get(b)) {
            (Some(i), Some(j)) => self.get(i as usize - 1, j as usize - 1),
            _ => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows[i].iter().map(|(&j, &x)| (j as usize, x))
    }

    /// `P(j | i) = X_ij / X_i`; zero when the row is empty.
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        let s = self.row_sums[i];
        if s > 0.0 {
            self.get(i, j) / s
        } else {
            0.0
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn entries(&self) -> Vec<(u32, u32, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(&j, &x)| (i as u32, j, x)))
            .collect()
    }
}

/// Counts co-occurrences within `window` tokens, each pair weighted by
/// `1 / distance` and added in both directions. Windows never cross documents.
pub fn build_cooccurrence(documents: &[Vec<String>], window: usize) -> Result<CooccurrenceMatrix> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if documents.iter().all(Vec::is_empty) {
        return Err(Error::InvalidArgument("co-occurrence needs a non-empty corpus".into()));
    }
    let vocab = Vocabulary::from_tokens(documents.iter().flatten());
    let mut rows: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); vocab.size()];
    for doc in documents {
        let ids: Vec<u32> = doc.iter().map(|t| vocab.get(t).unwrap() - 1).collect();
        for (p, &a) in ids.iter().enumerate() {
            for (d, &b) in ids[p + 1..].iter().take(window).enumerate() {
                let w = 1.0 / (d + 1) as f64;
                *rows[a as usize].entry(b).or_insert(0.0) += w;
                *rows[b as usize].entry(a).or_insert(0.0) += w;
            }
        }
    }
    let row_sums = rows.iter().map(|r| r.values().sum()).collect();
    Ok(CooccurrenceMatrix { vocab, rows, row_sums })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 300,
            epochs: 25,
            seed: 0,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
        }
    }
}

/// Word and context vectors with their biases.
#[derive(Clone, Debug)]
pub struct GloveModel {
    vocab: Vocabulary,
    dim: usize,
    w: Vec<f64>,
    w_ctx: Vec<f64>,
    b: Vec<f64>,
    b_ctx: Vec<f64>,
}

impl GloveModel {
    /// `w_i · w~_j + b_i + b~_j`, the model's estimate of `log X_ij`.
    pub fn score(&self, i: usize, j: usize) -> f64 {
        let d = self.dim;
        let dot: f64 = self.w[i * d..(i + 1) * d]
            .iter()
            .zip(&self.w_ctx[j * d..(j + 1) * d])
            .map(|(a, b)| a * b)
            .sum();
        dot + self.b[i] + self.b_ctx[j]
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(w + w~) / 2`, one row per vocabulary word.
    pub fn averaged_vectors(&self) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.w_ctx)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn word_vector_map(&self) -> HashMap<String, Vec<f64>> {
        let avg = self.averaged_vectors();
        self.vocab
            .tokens()
            .iter()
            .zip(avg.chunks(self.dim))
            .map(|(w, v)| (w.clone(), v.to_vec()))
            .collect()
    }

    pub fn into_table(self, policy: OovPolicy) -> Result<EmbeddingTable> {
        let map = self.word_vector_map();
        EmbeddingTable::from_vectors(self.vocab, self.dim, &map, policy)
    }
}

fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

/// Full weighted least-squares objective `sum f(X_ij) (score_ij - log X_ij)^2`.
pub fn glove_objective(model: &GloveModel, x: &CooccurrenceMatrix, cfg: &GloveConfig) -> f64 {
    x.entries()
        .iter()
        .map(|&(i, j, v)| {
            let diff = model.score(i as usize, j as usize) - v.ln();
            glove_weight(v, cfg.x_max, cfg.alpha) * diff * diff
        })
        .sum()
}

/// Fits GloVe vectors with AdaGrad over the non-zero entries, visited in a
/// seeded random order each epoch. Returns the model and the objective
/// measured after every epoch.
pub fn train_glove(x: &CooccurrenceMatrix, cfg: &GloveConfig) -> Result<(GloveModel, Vec<f64>)> {
    if x.nnz() == 0 {
        return Err(Error::InvalidArgument("co-occurrence matrix is empty".into()));
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("dim must be positive".into()));
    }
    let n = x.vocab().size();
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / d as f64;
    let mut init = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-half..half)).collect() };
    let mut model = GloveModel {
        vocab: x.vocab().clone(),
        dim: d,
        w: init(n * d),
        w_ctx: init(n * d),
        b: init(n),
        b_ctx: init(n),
    };
    let mut gsq_w = vec![1.0f64; n * d];
    let mut gsq_ctx = vec![1.0f64; n * d];
    let mut gsq_b = vec![1.0f64; n];
    let mut gsq_bctx = vec![1.0f64; n];

    let mut entries = x.entries();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad_w = vec![0.0; d];
    let mut grad_c = vec![0.0; d];
    for epoch in 0..cfg.epochs {
        entries.shuffle(&mut rng);
        for &(i, j, v) in &entries {
            let (i, j) = (i as usize, j as usize);
            let diff = model.score(i, j) - v.ln();
            let fdiff = glove_weight(v, cfg.x_max, cfg.alpha) * diff;
            if !fdiff.is_finite() {
                return Err(Error::NonFinite {
                    stage: "glove".into(),
                    epoch,
                });
            }
            let (wi, wj) = (i * d..(i + 1) * d, j * d..(j + 1) * d);
            for k in 0..d {
                grad_w[k] = fdiff * model.w_ctx[wj.start + k];
                grad_c[k] = fdiff * model.w[wi.start + k];
            }
            for k in 0..d {
                let (a, b) = (wi.start + k, wj.start + k);
                model.w[a] -= cfg.learning_rate * grad_w[k] / gsq_w[a].sqrt();
                model.w_ctx[b] -= cfg.learning_rate * grad_c[k] / gsq_ctx[b].sqrt();
                gsq_w[a] += grad_w[k] * grad_w[k];
                gsq_ctx[b] += grad_c[k] * grad_c[k];
            }
            model.b[i] -= cfg.learning_rate * fdiff / gsq_b[i].sqrt();
            model.b_ctx[j] -= cfg.learning_rate * fdiff / gsq_bctx[j].sqrt();
            gsq_b[i] += fdiff * fdiff;
            gsq_bctx[j] += fdiff * fdiff;
        }
        let loss = glove_objective(&model, x, cfg);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "glove".into(),
                epoch,
            });
        }
        history.push(loss);
    }
    Ok((model, history))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
