use rand::Rng;

use crate::error::{Error, Result};

/// Gate blocks are stacked in the order forget, input, output, candidate.
pub const GATES: usize = 4;
pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const OUTPUT: usize = 2;
pub const CANDIDATE: usize = 3;

/// Single LSTM layer. `w` is `4H x dim`, `u` is `4H x H`, `b` is `4H`,
/// all row-major with gate blocks of `H` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct StepCache {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            input_dim,
            hidden,
            w: vec![0.0; GATES * hidden * input_dim],
            u: vec![0.0; GATES * hidden * hidden],
            b: vec![0.0; GATES * hidden],
        }
    }

    /// Uniform in `[-1/sqrt(H), 1/sqrt(H)]`.
    pub fn random<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input_dim, hidden);
        for x in p.w.iter_mut().chain(p.u.iter_mut()).chain(p.b.iter_mut()) {
            *x = rng.gen_range(-bound..=bound);
        }
        p
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden);
        if self.w.len() != GATES * h * d || self.u.len() != GATES * h * h || self.b.len() != GATES * h {
            return Err(Error::InvalidArgument("LSTM parameter shapes are inconsistent".into()));
        }
        Ok(())
    }

    /// Rows `gate*H .. (gate+1)*H` of `w`.
    pub fn w_gate(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.input_dim;
        &self.w[gate * n..(gate + 1) * n]
    }

    pub fn u_gate(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.u[gate * n..(gate + 1) * n]
    }

    pub fn b_gate(&self, gate: usize) -> &[f64] {
        &self.b[gate * self.hidden..(gate + 1) * self.hidden]
    }

    /// Advances `state` in place by one input and returns the gate activations.
    pub(crate) fn step_in_place(&self, x: &[f64], state: &mut LstmState) -> StepCache {
        let (d, h) = (self.input_dim, self.hidden);
        let mut z = self.b.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wr = &self.w[r * d..(r + 1) * d];
            let ur = &self.u[r * h..(r + 1) * h];
            *zr += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + ur.iter().zip(&state.h).map(|(a, b)| a * b).sum::<f64>();
        }
        let f: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let i: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[3 * h..].iter().map(|v| v.tanh()).collect();
        let mut tanh_c = vec![0.0; h];
        for k in 0..h {
            state.c[k] = f[k] * state.c[k] + i[k] * g[k];
            tanh_c[k] = state.c[k].tanh();
            state.h[k] = o[k] * tanh_c[k];
        }
        StepCache { f, i, o, g, tanh_c }
    }
}

pub fn lstm_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    params.check_shapes()?;
    if x.len() != params.input_dim || prev.h.len() != params.hidden || prev.c.len() != params.hidden {
        return Err(Error::InvalidArgument(format!(
            "LSTM step expects input {} and state {}, got {} and {}/{}",
            params.input_dim,
            params.hidden,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let mut next = prev.clone();
    params.step_in_place(x, &mut next);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let s = lstm_step(&p, &[1.0, -2.0, 0.5], &LstmState::zeros(2)).unwrap();
        assert_eq!(s, LstmState::zeros(2));
    }

    #[test]
    fn saturated_forget_keeps_memory() {
        let mut p = LstmParams::zeros(1, 1);
        p.b[FORGET] = 50.0;
        p.b[INPUT] = -50.0;
        let prev = LstmState {
            h: vec![0.3],
            c: vec![0.7],
        };
        let s = lstm_step(&p, &[2.0], &prev).unwrap();
        assert!((s.c[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_reimplementation() {
        let (d, h) = (3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = LstmParams::random(d, h, &mut rng);
        let x = [0.4, -0.9, 0.25];
        let prev = LstmState {
            h: vec![0.1, -0.2],
            c: vec![0.5, 0.05],
        };
        let got = lstm_step(&p, &x, &prev).unwrap();

        let pre = |gate: usize, k: usize| -> f64 {
            let mut s = p.b_gate(gate)[k];
            for j in 0..d {
                s += p.w_gate(gate)[k * d + j] * x[j];
            }
            for j in 0..h {
                s += p.u_gate(gate)[k * h + j] * prev.h[j];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for k in 0..h {
            let f = sig(pre(FORGET, k));
            let i = sig(pre(INPUT, k));
            let o = sig(pre(OUTPUT, k));
            let g = pre(CANDIDATE, k).tanh();
            let c = f * prev.c[k] + i * g;
            assert!((got.c[k] - c).abs() < 1e-10);
            assert!((got.h[k] - o * c.tanh()).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = LstmParams::zeros(3, 2);
        assert!(lstm_step(&p, &[1.0], &LstmState::zeros(2)).is_err());
        assert!(lstm_step(&p, &[1.0, 2.0, 3.0], &LstmState::zeros(3)).is_err());
    }
}
