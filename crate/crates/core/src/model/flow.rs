//! Conditional flow matching on the straight path from noise to data.

use rand::Rng;

use super::{normal_tensor, BoundBackbone, FrozenBackbone, ModelError};
use crate::nn::{Scalar, Tape, Tensor, Var};

/// Mel spectrogram frames, `T × d_mel`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSample<S = f32> {
    pub frames: Tensor<S>,
}

impl<S: Scalar> MelSample<S> {
    pub fn new(frames: Tensor<S>) -> Result<Self, ModelError> {
        if frames.rank() != 2 || frames.rows() == 0 {
            return Err(ModelError::BadMel(format!("shape {:?} is not T × d_mel with T ≥ 1", frames.shape())));
        }
        if !frames.is_finite() {
            return Err(ModelError::BadMel("non-finite values".into()));
        }
        Ok(Self { frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn channels(&self) -> usize {
        self.frames.cols()
    }

    /// Mean over frames of the per-frame mean squared error.
    pub fn mse_to(&self, other: &MelSample<S>) -> Result<f64, ModelError> {
        let diff = self.frames.zip_map(&other.frames, |a, b| a - b)?;
        let n = diff.numel() as f64;
        Ok(diff.data().iter().map(|d| d.to_f64_lossy().powi(2)).sum::<f64>() / n)
    }
}

/// One point on the path: noise `x0`, data `x1`, time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState<S = f32> {
    pub x0: Tensor<S>,
    pub x1: Tensor<S>,
    pub t: S,
}

impl<S: Scalar> FlowState<S> {
    pub fn new(x0: Tensor<S>, x1: Tensor<S>, t: S) -> Result<Self, ModelError> {
        if x0.shape() != x1.shape() {
            return Err(ModelError::Nn(crate::nn::NnError::ShapeMismatch {
                op: "flow_state",
                left: x0.shape().to_vec(),
                right: x1.shape().to_vec(),
            }));
        }
        if !(t >= S::zero() && t <= S::one()) {
            return Err(ModelError::TimeOutOfRange(t.to_f64_lossy()));
        }
        Ok(Self { x0, x1, t })
    }

    /// `x0 ~ N(0, I)`, `t ~ U(0, 1)`.
    pub fn draw<R: Rng>(x1: &Tensor<S>, rng: &mut R) -> Self {
        let x0 = normal_tensor(rng, x1.shape(), 1.0);
        let t = S::of(rng.random::<f64>());
        Self {
            x0,
            x1: x1.clone(),
            t,
        }
    }

    /// `x_t = (1 − t)·x0 + t·x1`.
    pub fn interpolate(&self) -> Tensor<S> {
        let t = self.t;
        let s = S::one() - t;
        self.x0
            .zip_map(&self.x1, |a, b| s * a + t * b)
            .expect("shapes checked at construction")
    }

    /// `u = x1 − x0`.
    pub fn target_velocity(&self) -> Tensor<S> {
        self.x1
            .zip_map(&self.x0, |b, a| b - a)
            .expect("shapes checked at construction")
    }
}

/// One training example: conditioning on the tape and its target mel.
#[derive(Clone, Copy, Debug)]
pub struct CfmItem<'a, S> {
    pub h_text: Var,
    pub target: &'a Tensor<S>,
}

/// Flow-matching loss with a caller-supplied velocity predictor.
///
/// One `(x0, t)` is drawn per item, in item order. The loss is the mean over
/// all items, frames and channels of `(v̂ − (x1 − x0))²`.
pub fn cfm_loss_with<S, R, P>(tape: &mut Tape<S>, items: &[CfmItem<'_, S>], rng: &mut R, mut predict: P) -> Result<Var, ModelError>
where
    S: Scalar,
    R: Rng,
    P: FnMut(&mut Tape<S>, Var, S, Var, &FlowState<S>) -> Result<Var, ModelError>,
{
    if items.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut total: Option<Var> = None;
    let mut count = 0usize;
    for item in items {
        let state = FlowState::draw(item.target, rng);
        let xt = tape.constant(state.interpolate());
        let u = tape.constant(state.target_velocity());
        let v = predict(tape, xt, state.t, item.h_text, &state)?;
        let sse = tape.sum_squared_error(v, u)?;
        count += item.target.numel();
        total = Some(match total {
            Some(acc) => tape.add(acc, sse)?,
            None => sse,
        });
    }
    let total = total.expect("non-empty batch");
    Ok(tape.scale(total, S::one() / S::of(count as f64)))
}

/// Flow-matching loss through the frozen backbone.
pub fn cfm_loss<S: Scalar, R: Rng>(
    tape: &mut Tape<S>,
    backbone: &FrozenBackbone<S>,
    bound: &BoundBackbone,
    items: &[CfmItem<'_, S>],
    rng: &mut R,
) -> Result<Var, ModelError> {
    cfm_loss_with(tape, items, rng, |tape, xt, t, h, _| backbone.velocity_on(tape, bound, xt, t, h))
}
