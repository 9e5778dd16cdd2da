use super::{batch_by_frames, lr_at, AdamW, TrainConfig, TrainError, TrainingSet};
use crate::model::{cfm_loss, seeded_rng, Adapter, CfmItem, FrozenBackbone};
use crate::nn::Tape;

/// State handed to the checkpoint callback.
#[derive(Clone, Copy, Debug)]
pub struct TrainProgress<'a> {
    pub step: usize,
    pub loss_history: &'a [f32],
    pub adapter: &'a Adapter<f32>,
}

/// Runs `config.max_steps` updates of the adapter and returns the per-step
/// loss history. `on_checkpoint` fires every `checkpoint_every` steps and
/// once more after the final step.
///
/// Single-threaded and fully determined by `config.seed`.
pub fn train(
    config: &TrainConfig,
    set: &TrainingSet,
    adapter: &mut Adapter<f32>,
    backbone: &FrozenBackbone<f32>,
    mut on_checkpoint: impl FnMut(TrainProgress<'_>) -> Result<(), TrainError>,
) -> Result<Vec<f32>, TrainError> {
    config.validate()?;
    if set.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let hash_before = backbone.content_hash();
    let mut optimizer = AdamW::new(config);
    let mut flow_rng = seeded_rng(config.seed);
    let mut history = Vec::with_capacity(config.max_steps);

    let mut epoch = 0u64;
    let mut queue: std::vec::IntoIter<Vec<usize>> = Vec::new().into_iter();
    for step in 1..=config.max_steps {
        let batch = match queue.next() {
            Some(b) => b,
            None => {
                let seed = config.seed.wrapping_add(epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                epoch += 1;
                queue = batch_by_frames(&set.entries, config.frame_budget, config.max_samples_per_batch, seed)?.into_iter();
                queue.next().expect("non-empty set yields a batch")
            }
        };

        let mut tape = Tape::new();
        let bound_adapter = adapter.bind(&mut tape);
        let bound_backbone = backbone.bind(&mut tape);
        let mut items = Vec::with_capacity(batch.len());
        for &i in &batch {
            let ex = &set.examples[i];
            let h = adapter.forward_on(&mut tape, &bound_adapter, &ex.ids.ids, None)?;
            items.push(CfmItem {
                h_text: h,
                target: &ex.target,
            });
        }
        let loss = cfm_loss(&mut tape, backbone, &bound_backbone, &items, &mut flow_rng)?;
        let value = tape.value(loss).item().map_err(crate::model::ModelError::from)?;
        if !value.is_finite() {
            let ids: Vec<&str> = batch.iter().map(|&i| set.examples[i].id.as_str()).collect();
            return Err(TrainError::NonFiniteLoss {
                step,
                batch: ids.join(", "),
            });
        }
        history.push(value);

        let grads = tape.backward(loss).map_err(crate::model::ModelError::from)?;
        let grad_tensors: Vec<_> = bound_adapter.vars().into_iter().map(|v| grads.wrt(v)).collect();
        drop(tape);
        optimizer.step(&mut adapter.parameters_mut(), &grad_tensors, lr_at(step, config))?;

        let periodic = config.checkpoint_every > 0 && step % config.checkpoint_every == 0;
        if periodic || step == config.max_steps {
            check_frozen(&hash_before, backbone)?;
            on_checkpoint(TrainProgress {
                step,
                loss_history: &history,
                adapter,
            })?;
        }
    }
    check_frozen(&hash_before, backbone)?;
    Ok(history)
}

fn check_frozen(before: &str, backbone: &FrozenBackbone<f32>) -> Result<(), TrainError> {
    let after = backbone.content_hash();
    if after != before || after != backbone.hash_at_load() {
        return Err(TrainError::BackboneModified {
            before: before.to_string(),
            after,
        });
    }
    Ok(())
}
