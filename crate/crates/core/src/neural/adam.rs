use std::collections::HashMap;

use super::network::{Gradients, NetworkParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter slice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Bias-corrected Adam update of `params` at step `t` (1-based).
pub fn adam_update(params: &mut [f64], grad: &[f64], moments: &mut Moments, t: u64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for k in 0..params.len() {
        let g = grad[k];
        moments.m[k] = cfg.beta1 * moments.m[k] + (1.0 - cfg.beta1) * g;
        moments.v[k] = cfg.beta2 * moments.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[k] / bc1;
        let v_hat = moments.v[k] / bc2;
        params[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Optimizer state for a whole network. Trainable embedding rows are
/// updated every step, with a zero gradient when a batch did not read them.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    groups: Vec<Moments>,
    embedding: HashMap<usize, Moments>,
}

impl AdamState {
    pub fn new(net: &NetworkParams) -> Self {
        let g = Gradients::zeros_like(net);
        AdamState {
            t: 0,
            groups: g.groups().iter().map(|s| Moments::zeros(s.len())).collect(),
            embedding: net
                .embedding
                .trainable_rows()
                .into_iter()
                .map(|r| (r, Moments::zeros(net.dim())))
                .collect(),
        }
    }
}

pub fn adam_step(net: &mut NetworkParams, grad: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t;
    let params: [&mut Vec<f64>; 9] = [
        &mut net.lstm.w,
        &mut net.lstm.u,
        &mut net.lstm.b,
        &mut net.dense1.w,
        &mut net.dense1.b,
        &mut net.dense2.w,
        &mut net.dense2.b,
        &mut net.output.w,
        &mut net.output.b,
    ];
    for ((p, g), m) in params.into_iter().zip(grad.groups()).zip(&mut state.groups) {
        adam_update(p, g, m, t, cfg);
    }
    let zero = vec![0.0; net.dim()];
    let mut rows: Vec<usize> = state.embedding.keys().copied().collect();
    rows.sort_unstable();
    for r in rows {
        let g = grad.embedding.get(&r).unwrap_or(&zero);
        let m = state.embedding.get_mut(&r).expect("row registered at construction");
        if let Some(p) = net.embedding.trainable_row_mut(r) {
            adam_update(p, g, m, t, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.2];
        let mut m = Moments::zeros(2);
        adam_update(&mut p, &[0.0, 0.0], &mut m, 1, &AdamConfig::default());
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, 1.0];
        let mut m = Moments::zeros(2);
        adam_update(&mut p, &[0.5, -3.0], &mut m, 1, &cfg);
        assert!((p[0] - (1.0 - cfg.learning_rate)).abs() < 1e-10);
        assert!((p[1] - (1.0 + cfg.learning_rate)).abs() < 1e-10);
    }

    #[test]
    fn repeated_gradient_does_not_grow_step() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0];
        let mut m = Moments::zeros(1);
        adam_update(&mut p, &[0.7], &mut m, 1, &cfg);
        let first = p[0].abs();
        let before = p[0];
        adam_update(&mut p, &[0.7], &mut m, 2, &cfg);
        let second = (p[0] - before).abs();
        assert!(second <= first + 1e-9);
    }
}
