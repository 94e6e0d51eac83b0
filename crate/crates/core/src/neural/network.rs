use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabelSet, NUM_TYPES};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::text::IndexSequence;

use super::lstm::{sigmoid, LstmParams, LstmState, StepCache, GATES};

pub const DENSE1_UNITS: usize = 128;
pub const DENSE2_UNITS: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const LOSS_CLAMP: f64 = 1e-7;

/// Fully connected layer; `w` is `n_out x n_in` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    pub fn random<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut d = Self::zeros(n_in, n_out);
        for x in d.w.iter_mut().chain(d.b.iter_mut()) {
            *x = rng.gen_range(-bound..=bound);
        }
        d
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.w[r * self.n_in..(r + 1) * self.n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        out
    }

    /// Accumulates `dz x^T` and `dz` into `grad` and returns `W^T dz`.
    fn backprop(&self, x: &[f64], dz: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_in];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.b[r] += d;
            let row = r * self.n_in;
            for j in 0..self.n_in {
                grad.w[row + j] += d * x[j];
                dx[j] += d * self.w[row + j];
            }
        }
        dx
    }
}

/// Embedding lookup, one LSTM layer, two ReLU layers and a sigmoid output.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub embedding: EmbeddingTable,
    pub lstm: LstmParams,
    pub dense1: Dense,
    pub dense2: Dense,
    pub output: Dense,
    pub dropout: f64,
}

pub enum Mode<'a> {
    Infer,
    /// Dropout masks are drawn from the given generator.
    Train(&'a mut ChaCha8Rng),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Embedding row read at each processed step; `None` reads zeros.
    rows: Vec<Option<usize>>,
    steps: Vec<StepCache>,
    /// Hidden and cell states; entry 0 is the zero initial state.
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    mask_h: Option<Vec<f64>>,
    h_drop: Vec<f64>,
    z1: Vec<f64>,
    mask1: Option<Vec<f64>>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    mask2: Option<Vec<f64>>,
    a2: Vec<f64>,
    pub probabilities: [f64; NUM_TYPES],
}

/// Gradients with the same layout as [`NetworkParams`]; embedding gradients
/// are kept only for trainable rows that were read.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub lstm: LstmParams,
    pub dense1: Dense,
    pub dense2: Dense,
    pub output: Dense,
}

impl Gradients {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Gradients {
            embedding: BTreeMap::new(),
            lstm: LstmParams::zeros(net.lstm.input_dim, net.lstm.hidden),
            dense1: Dense::zeros(net.dense1.n_in, net.dense1.n_out),
            dense2: Dense::zeros(net.dense2.n_in, net.dense2.n_out),
            output: Dense::zeros(net.output.n_in, net.output.n_out),
        }
    }

    /// Dense parameter groups in a fixed order.
    pub fn groups(&self) -> [&[f64]; 9] {
        [
            &self.lstm.w,
            &self.lstm.u,
            &self.lstm.b,
            &self.dense1.w,
            &self.dense1.b,
            &self.dense2.w,
            &self.dense2.b,
            &self.output.w,
            &self.output.b,
        ]
    }

    fn groups_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.lstm.w,
            &mut self.lstm.u,
            &mut self.lstm.b,
            &mut self.dense1.w,
            &mut self.dense1.b,
            &mut self.dense2.w,
            &mut self.dense2.b,
            &mut self.output.w,
            &mut self.output.b,
        ]
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.groups_mut().into_iter().zip(other.groups()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (row, g) in &other.embedding {
            let slot = self.embedding.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
            for (x, y) in slot.iter_mut().zip(g) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for group in self.groups_mut() {
            group.iter_mut().for_each(|x| *x *= factor);
        }
        for g in self.embedding.values_mut() {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

fn dropout_mask(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..n)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

fn ensure_finite(values: &[f64], stage: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            stage: stage.to_string(),
            epoch: 0,
        })
    }
}

/// Mean binary cross-entropy over the 12 outputs, probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn loss(probabilities: &[f64; NUM_TYPES], targets: LabelSet) -> f64 {
    let y = targets.indicator().map(f64::from);
    let total: f64 = probabilities
        .iter()
        .zip(y)
        .map(|(&p, y)| {
            let p = p.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / NUM_TYPES as f64
}

impl NetworkParams {
    /// Seeded initialization, uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(embedding: EmbeddingTable, hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArgument("LSTM hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout rate {dropout} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = embedding.dim();
        Ok(NetworkParams {
            lstm: LstmParams::random(dim, hidden, &mut rng),
            dense1: Dense::random(hidden, DENSE1_UNITS, &mut rng),
            dense2: Dense::random(DENSE1_UNITS, DENSE2_UNITS, &mut rng),
            output: Dense::random(DENSE2_UNITS, NUM_TYPES, &mut rng),
            embedding,
            dropout,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(embedding: EmbeddingTable, hidden: usize) -> Self {
        let dim = embedding.dim();
        NetworkParams {
            lstm: LstmParams::zeros(dim, hidden),
            dense1: Dense::zeros(hidden, DENSE1_UNITS),
            dense2: Dense::zeros(DENSE1_UNITS, DENSE2_UNITS),
            output: Dense::zeros(DENSE2_UNITS, NUM_TYPES),
            embedding,
            dropout: 0.0,
        }
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.lstm.check_shapes()?;
        let h = self.lstm.hidden;
        let ok = self.lstm.input_dim == self.embedding.dim()
            && (self.dense1.n_in, self.dense1.n_out) == (h, DENSE1_UNITS)
            && (self.dense2.n_in, self.dense2.n_out) == (DENSE1_UNITS, DENSE2_UNITS)
            && (self.output.n_in, self.output.n_out) == (DENSE2_UNITS, NUM_TYPES)
            && [&self.dense1, &self.dense2, &self.output]
                .iter()
                .all(|d| d.w.len() == d.n_in * d.n_out && d.b.len() == d.n_out);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("network layer shapes are inconsistent".into()))
        }
    }

    pub fn forward(&self, seq: &IndexSequence, mode: Mode<'_>) -> Result<ForwardCache> {
        let policy = self.embedding.policy();
        let dim = self.dim();
        let hidden = self.hidden();
        let zero_x = vec![0.0; dim];
        let mut state = LstmState::zeros(hidden);
        let mut rows = Vec::new();
        let mut steps = Vec::new();
        let mut hs = vec![state.h.clone()];
        let mut cs = vec![state.c.clone()];
        for &idx in seq.as_slice() {
            if idx == 0 {
                continue;
            }
            let row = self.embedding.resolve_row(idx, policy)?;
            let x = row.map_or(zero_x.as_slice(), |r| self.embedding.row(r));
            steps.push(self.lstm.step_in_place(x, &mut state));
            rows.push(row);
            hs.push(state.h.clone());
            cs.push(state.c.clone());
        }
        ensure_finite(&state.h, "lstm")?;

        let (mut mask_h, mut mask1, mut mask2) = (None, None, None);
        let mut rng = match mode {
            Mode::Train(rng) if self.dropout > 0.0 => Some(rng),
            _ => None,
        };
        let mut apply_mask = |v: &[f64], slot: &mut Option<Vec<f64>>| -> Vec<f64> {
            match rng.as_deref_mut() {
                Some(r) => {
                    let m = dropout_mask(v.len(), self.dropout, r);
                    let out = v.iter().zip(&m).map(|(a, b)| a * b).collect();
                    *slot = Some(m);
                    out
                }
                None => v.to_vec(),
            }
        };
        let h_drop = apply_mask(&state.h, &mut mask_h);
        let z1 = self.dense1.apply(&h_drop);
        ensure_finite(&z1, "dense1")?;
        let r1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let a1 = apply_mask(&r1, &mut mask1);
        let z2 = self.dense2.apply(&a1);
        ensure_finite(&z2, "dense2")?;
        let r2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let a2 = apply_mask(&r2, &mut mask2);
        let z3 = self.output.apply(&a2);
        ensure_finite(&z3, "output")?;
        let mut probabilities = [0.0; NUM_TYPES];
        for (p, z) in probabilities.iter_mut().zip(&z3) {
            *p = sigmoid(*z);
        }
        Ok(ForwardCache {
            rows,
            steps,
            h: hs,
            c: cs,
            mask_h,
            h_drop,
            z1,
            mask1,
            a1,
            z2,
            mask2,
            a2,
            probabilities,
        })
    }

    /// Exact gradients of [`loss`] for the input that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache, targets: LabelSet) -> Gradients {
        let mut grad = Gradients::zeros_like(self);
        let y = targets.indicator().map(f64::from);
        let dz3: Vec<f64> = cache
            .probabilities
            .iter()
            .zip(y)
            .map(|(p, y)| (p - y) / NUM_TYPES as f64)
            .collect();

        let masked = |d: Vec<f64>, mask: &Option<Vec<f64>>| -> Vec<f64> {
            match mask {
                Some(m) => d.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => d,
            }
        };
        let relu_back = |d: Vec<f64>, z: &[f64]| -> Vec<f64> {
            d.iter().zip(z).map(|(a, &z)| if z > 0.0 { *a } else { 0.0 }).collect()
        };

        let da2 = self.output.backprop(&cache.a2, &dz3, &mut grad.output);
        let dz2 = relu_back(masked(da2, &cache.mask2), &cache.z2);
        let da1 = self.dense2.backprop(&cache.a1, &dz2, &mut grad.dense2);
        let dz1 = relu_back(masked(da1, &cache.mask1), &cache.z1);
        let dh_drop = self.dense1.backprop(&cache.h_drop, &dz1, &mut grad.dense1);
        let mut dh = masked(dh_drop, &cache.mask_h);

        let hidden = self.hidden();
        let dim = self.dim();
        let zero_x = vec![0.0; dim];
        let mut dc = vec![0.0; hidden];
        let mut dz = vec![0.0; GATES * hidden];
        for t in (0..cache.steps.len()).rev() {
            let s = &cache.steps[t];
            let c_prev = &cache.c[t];
            let h_prev = &cache.h[t];
            for k in 0..hidden {
                let d_o = dh[k] * s.tanh_c[k];
                dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_f = dc[k] * c_prev[k];
                let d_i = dc[k] * s.g[k];
                let d_g = dc[k] * s.i[k];
                dz[k] = d_f * s.f[k] * (1.0 - s.f[k]);
                dz[hidden + k] = d_i * s.i[k] * (1.0 - s.i[k]);
                dz[2 * hidden + k] = d_o * s.o[k] * (1.0 - s.o[k]);
                dz[3 * hidden + k] = d_g * (1.0 - s.g[k] * s.g[k]);
                dc[k] *= s.f[k];
            }
            let row = cache.rows[t];
            let x = row.map_or(zero_x.as_slice(), |r| self.embedding.row(r));
            let trainable_row = row.filter(|&r| self.embedding.is_trainable(r));
            let mut dx = trainable_row.map(|_| vec![0.0; dim]);
            let mut dh_prev = vec![0.0; hidden];
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.lstm.b[r] += d;
                let wr = r * dim;
                for j in 0..dim {
                    grad.lstm.w[wr + j] += d * x[j];
                }
                if let Some(dx) = dx.as_mut() {
                    for j in 0..dim {
                        dx[j] += d * self.lstm.w[wr + j];
                    }
                }
                let ur = r * hidden;
                for j in 0..hidden {
                    grad.lstm.u[ur + j] += d * h_prev[j];
                    dh_prev[j] += d * self.lstm.u[ur + j];
                }
            }
            if let (Some(r), Some(dx)) = (trainable_row, dx) {
                let slot = grad.embedding.entry(r).or_insert_with(|| vec![0.0; dim]);
                for (a, b) in slot.iter_mut().zip(dx) {
                    *a += b;
                }
            }
            dh = dh_prev;
        }
        grad
    }

    pub fn predict(&self, seq: &IndexSequence) -> Result<[f64; NUM_TYPES]> {
        Ok(self.forward(seq, Mode::Infer)?.probabilities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::OovPolicy;
    use crate::text::Vocabulary;
    use std::collections::HashMap;

    fn table(dim: usize, policy: OovPolicy) -> EmbeddingTable {
        let vocab = Vocabulary::from_tokens(["alpha", "beta", "gamma", "delta"]);
        let mut vectors = HashMap::new();
        vectors.insert("alpha".to_string(), (0..dim).map(|j| 0.1 * j as f64 - 0.15).collect());
        vectors.insert("gamma".to_string(), (0..dim).map(|j| 0.3 - 0.2 * j as f64).collect());
        EmbeddingTable::from_vectors(vocab, dim, &vectors, policy).unwrap()
    }

    fn seq(v: &[u32]) -> IndexSequence {
        IndexSequence::from_indices(v.to_vec())
    }

    #[test]
    fn zero_network_outputs_half() {
        let net = NetworkParams::zeros(table(4, OovPolicy::ZeroVector), 3);
        let p = net.predict(&seq(&[1, 2, 3, 0, 0])).unwrap();
        assert!(p.iter().all(|&x| x == 0.5));
        assert!((loss(&p, LabelSet::EMPTY) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_hand_cases() {
        let mut p = [0.0; NUM_TYPES];
        let mut y = LabelSet::EMPTY;
        y.insert(crate::corpus::KnowledgeType::Concept);
        p[crate::corpus::KnowledgeType::Concept.index()] = 1.0;
        assert!(loss(&p, y) < 1e-6);
        // one label at 0.9, the rest exact
        p[crate::corpus::KnowledgeType::Concept.index()] = 0.9;
        let expect = (-(0.9f64.ln()) + 11.0 * -(1.0f64 - 1e-7).ln()) / 12.0;
        assert!((loss(&p, y) - expect).abs() < 1e-12);
        assert!(((-(0.9f64.ln())) - 0.1054).abs() < 1e-4);
    }

    #[test]
    fn padding_invariance_and_all_pad() {
        let net = NetworkParams::new(table(4, OovPolicy::default()), 3, 0.2, 5).unwrap();
        let a = net.predict(&seq(&[1, 2, 5])).unwrap();
        let b = net.predict(&seq(&[1, 2, 5, 0, 0, 0, 0])).unwrap();
        let c = net.predict(&seq(&[0, 1, 0, 2, 5, 0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);

        let pad = net.predict(&seq(&[0, 0, 0])).unwrap();
        let mut probe = net.clone();
        probe.lstm = LstmParams::random(4, 3, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(pad, probe.predict(&seq(&[0, 0, 0])).unwrap());
    }

    #[test]
    fn inference_is_deterministic_and_train_mode_drops() {
        let net = NetworkParams::new(table(4, OovPolicy::default()), 3, 0.5, 5).unwrap();
        let s = seq(&[1, 2, 3, 4]);
        assert_eq!(net.predict(&s).unwrap(), net.predict(&s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let differs = (0..20).any(|_| net.forward(&s, Mode::Train(&mut rng)).unwrap().probabilities != net.predict(&s).unwrap());
        assert!(differs);
    }

    #[test]
    fn stationary_point_has_zero_output_gradient() {
        let net = NetworkParams::zeros(table(4, OovPolicy::ZeroVector), 3);
        let cache = net.forward(&seq(&[1, 2]), Mode::Infer).unwrap();
        // p = 0.5 everywhere; no labelset matches, but the bias gradient is (p - y)/12
        let g = net.backward(&cache, LabelSet::EMPTY);
        assert!(g.output.b.iter().all(|&v| (v - 0.5 / 12.0).abs() < 1e-15));

        let mut net = net;
        net.output.b.iter_mut().for_each(|b| *b = -40.0);
        let cache = net.forward(&seq(&[1, 2]), Mode::Infer).unwrap();
        let g = net.backward(&cache, LabelSet::EMPTY);
        assert!(g.output.w.iter().chain(&g.output.b).all(|v| v.abs() < 1e-17));
    }

    #[test]
    fn frozen_and_pad_rows_get_no_gradient() {
        let net = NetworkParams::new(table(4, OovPolicy::default()), 3, 0.0, 2).unwrap();
        let cache = net.forward(&seq(&[1, 2, 0, 3, 4, 0]), Mode::Infer).unwrap();
        let g = net.backward(&cache, [crate::corpus::KnowledgeType::Example].into_iter().collect());
        let rows: Vec<usize> = g.embedding.keys().copied().collect();
        // alpha (1) and gamma (3) are pre-trained and frozen; pad (0) is never read
        assert_eq!(rows, vec![2, 4]);
    }
}
