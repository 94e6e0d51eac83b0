use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, NUM_TYPES};
use crate::error::{Error, Result};
use crate::eval::metrics::{macro_auc, PredictionMatrix};
use crate::text::IndexSequence;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{loss, Gradients, Mode, NetworkParams, DEFAULT_DROPOUT};

/// Examples per gradient chunk. Chunks are summed in a fixed order, so the
/// result does not depend on how many threads computed them.
const CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            dropout_rate: DEFAULT_DROPOUT,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument("dropout rate must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's examples, dropout active.
    pub train_loss: f64,
    pub valid_macro_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub type Example = (IndexSequence, LabelSet);

pub fn predict_batch(net: &NetworkParams, seqs: &[&IndexSequence]) -> Result<Vec<[f64; NUM_TYPES]>> {
    seqs.par_iter().map(|s| net.predict(s)).collect()
}

pub fn validation_macro_auc(net: &NetworkParams, data: &[Example]) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let seqs: Vec<&IndexSequence> = data.iter().map(|(s, _)| s).collect();
    let scores = predict_batch(net, &seqs)?;
    let pred = PredictionMatrix::new(scores, data.iter().map(|(_, y)| *y).collect())?;
    Ok(macro_auc(&pred))
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { stage, .. } => Error::NonFinite { stage, epoch },
        other => other,
    }
}

/// Mini-batch Adam training. Returns the parameters of the epoch with the
/// best validation MacroAUC, the later epoch on ties; without a usable
/// validation score the last epoch is kept.
pub fn train(
    mut net: NetworkParams,
    train_data: &[Example],
    valid_data: &[Example],
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    cfg.validate()?;
    net.check_shapes()?;
    if train_data.is_empty() {
        return Err(Error::Degenerate("no training examples".into()));
    }
    net.dropout = cfg.dropout_rate;
    let adam = cfg.adam();
    let mut state = AdamState::new(&net);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, NetworkParams)> = None;
    let mut example_counter: u64 = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let first_stream = example_counter;
            example_counter += batch.len() as u64;
            let parts: Vec<(Gradients, f64)> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(ci, chunk)| -> Result<(Gradients, f64)> {
                    let mut acc = Gradients::zeros_like(&net);
                    let mut chunk_loss = 0.0;
                    for (k, &i) in chunk.iter().enumerate() {
                        let (seq, y) = &train_data[i];
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        rng.set_stream(first_stream + (ci * CHUNK + k) as u64 + 1);
                        let cache = net.forward(seq, Mode::Train(&mut rng))?;
                        chunk_loss += loss(&cache.probabilities, *y);
                        acc.add(&net.backward(&cache, *y));
                    }
                    Ok((acc, chunk_loss))
                })
                .collect::<Result<_>>()
                .map_err(|e| with_epoch(e, epoch))?;
            let mut grad = Gradients::zeros_like(&net);
            for (g, l) in &parts {
                grad.add(g);
                loss_sum += l;
            }
            grad.scale(1.0 / batch.len() as f64);
            adam_step(&mut net, &grad, &mut state, &adam);
        }
        let train_loss = loss_sum / train_data.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "loss".into(),
                epoch,
            });
        }
        let valid_macro_auc = validation_macro_auc(&net, valid_data).map_err(|e| with_epoch(e, epoch))?;
        info!(
            "epoch {epoch}: train loss {train_loss:.6}, validation MacroAUC {}",
            valid_macro_auc.map_or("n/a".to_string(), |v| format!("{v:.4}"))
        );
        if let Some(auc) = valid_macro_auc {
            if best.as_ref().is_none_or(|(b, _, _)| auc >= *b) {
                best = Some((auc, epoch, net.clone()));
            }
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            valid_macro_auc,
        });
    }
    let (net, best_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, epoch),
        None => (net, cfg.epochs),
    };
    Ok((
        net,
        TrainHistory {
            epochs: history,
            best_epoch,
        },
    ))
}
