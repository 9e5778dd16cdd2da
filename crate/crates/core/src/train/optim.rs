use super::{TrainConfig, TrainError};
use crate::nn::{Parameter, Tensor};

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: u64,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
}

impl AdamW {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            weight_decay: config.weight_decay,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Refuses, before touching anything, if any
    /// parameter is frozen.
    pub fn step(&mut self, params: &mut [&mut Parameter<f32>], grads: &[Tensor<f32>], lr: f64) -> Result<(), TrainError> {
        if let Some(p) = params.iter().find(|p| !p.trainable) {
            return Err(TrainError::FrozenParameter(p.name.clone()));
        }
        if params.len() != grads.len() {
            return Err(TrainError::Config(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (j, w) in p.tensor.data_mut().iter_mut().enumerate() {
                let gj = g.data()[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                let m_hat = f64::from(m[j]) / bc1;
                let v_hat = f64::from(v[j]) / bc2;
                let update = m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * f64::from(*w);
                *w -= (lr * update) as f32;
            }
        }
        Ok(())
    }
}
