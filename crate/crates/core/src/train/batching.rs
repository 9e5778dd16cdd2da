use rand::seq::SliceRandom;

use super::{CorpusEntry, TrainError};
use crate::model::seeded_rng;

/// Shuffles the corpus and packs it greedily into batches whose total frame
/// count stays within `frame_budget` and whose size stays within
/// `max_samples`. Every entry lands in exactly one batch.
pub fn batch_by_frames(
    entries: &[CorpusEntry],
    frame_budget: usize,
    max_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, TrainError> {
    if max_samples == 0 {
        return Err(TrainError::Config("max_samples must be positive".into()));
    }
    if let Some(e) = entries.iter().find(|e| e.n_frames > frame_budget) {
        return Err(TrainError::OversizedSample {
            id: e.id.clone(),
            frames: e.n_frames,
            budget: frame_budget,
        });
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.shuffle(&mut seeded_rng(seed));

    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut frames = 0;
    for idx in order {
        let n = entries[idx].n_frames;
        if !current.is_empty() && (frames + n > frame_budget || current.len() == max_samples) {
            batches.push(std::mem::take(&mut current));
            frames = 0;
        }
        current.push(idx);
        frames += n;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entries(frames: &[usize]) -> Vec<CorpusEntry> {
        frames
            .iter()
            .enumerate()
            .map(|(i, n)| CorpusEntry {
                id: format!("s{i}"),
                text: "x".into(),
                mel_path: format!("s{i}.mel"),
                n_frames: *n,
            })
            .collect()
    }

    #[test]
    fn sample_cap_binds_before_budget() {
        let e = entries(&[100; 300]);
        let batches = batch_by_frames(&e, 16384, 128, 1).unwrap();
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![128, 128, 44]);
    }

    #[test]
    fn full_budget_sample_is_alone() {
        let e = entries(&[16384, 10, 20]);
        let batches = batch_by_frames(&e, 16384, 128, 2).unwrap();
        assert!(batches.iter().any(|b| b == &vec![0]));
    }

    #[test]
    fn oversized_sample_is_named() {
        let e = entries(&[10, 500]);
        match batch_by_frames(&e, 100, 8, 0) {
            Err(TrainError::OversizedSample { id, frames, budget }) => {
                assert_eq!((id.as_str(), frames, budget), ("s1", 500, 100));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shuffle_is_seeded() {
        let e = entries(&(1..50).collect::<Vec<_>>());
        assert_eq!(batch_by_frames(&e, 64, 8, 5).unwrap(), batch_by_frames(&e, 64, 8, 5).unwrap());
        assert_ne!(batch_by_frames(&e, 64, 8, 5).unwrap(), batch_by_frames(&e, 64, 8, 6).unwrap());
    }

    proptest! {
        #[test]
        fn batches_partition_and_respect_limits(
            frames in proptest::collection::vec(1usize..200, 0..80),
            budget in 200usize..1000,
            cap in 1usize..16,
            seed in any::<u64>(),
        ) {
            let e = entries(&frames);
            let batches = batch_by_frames(&e, budget, cap, seed).unwrap();
            let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..frames.len()).collect::<Vec<_>>());
            for b in &batches {
                prop_assert!(!b.is_empty() && b.len() <= cap);
                prop_assert!(b.iter().map(|i| frames[*i]).sum::<usize>() <= budget);
            }
        }
    }
}
