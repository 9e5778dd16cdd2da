//! Dynamic-programming alignment against brute-force enumeration.

use proptest::prelude::*;
use tts_adapter::metrics::{align, align_ops, report, AlignmentCounts, EditOp};

/// Enumerates every alignment path, walking backwards from the end. Keeps the
/// cheapest; among equals keeps the lexicographically smallest op sequence
/// in walk order (hit < substitution < deletion < insertion).
fn exhaustive(r: &[u8], h: &[u8]) -> Vec<EditOp> {
    fn walk(r: &[u8], h: &[u8], i: usize, j: usize, path: &mut Vec<EditOp>, cost: usize, best: &mut Option<(usize, Vec<EditOp>)>) {
        if let Some((c, _)) = best {
            if cost > *c {
                return;
            }
        }
        if i == 0 && j == 0 {
            let better = match best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && path < p),
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        if i > 0 && j > 0 {
            let (op, step) = if r[i - 1] == h[j - 1] { (EditOp::Hit, 0) } else { (EditOp::Substitution, 1) };
            path.push(op);
            walk(r, h, i - 1, j - 1, path, cost + step, best);
            path.pop();
        }
        if i > 0 {
            path.push(EditOp::Deletion);
            walk(r, h, i - 1, j, path, cost + 1, best);
            path.pop();
        }
        if j > 0 {
            path.push(EditOp::Insertion);
            walk(r, h, i, j - 1, path, cost + 1, best);
            path.pop();
        }
    }
    let mut best = None;
    walk(r, h, r.len(), h.len(), &mut Vec::new(), 0, &mut best);
    let mut ops = best.expect("at least one path").1;
    ops.reverse();
    ops
}

fn all_sequences(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in 0..3u8 {
                let mut t: Vec<u8> = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn full_enumeration_up_to_length_four() {
    let seqs = all_sequences(4);
    assert_eq!(seqs.len(), 121);
    for r in &seqs {
        for h in &seqs {
            let oracle = exhaustive(r, h);
            assert_eq!(align_ops(r, h), oracle, "ref {r:?} hyp {h:?}");
        }
    }
}

#[test]
fn hand_case_matches_oracle() {
    let r = ["a", "b", "c"];
    let h = ["a", "x", "c"];
    let c = align(&r, &h);
    let expected = AlignmentCounts {
        hits: 2,
        substitutions: 1,
        deletions: 0,
        insertions: 0,
        n_ref: 3,
        n_hyp: 3,
    };
    assert_eq!(c, expected);
    let rep = report(&c).unwrap();
    assert_eq!((rep.wer, rep.wip), (1.0 / 3.0, 4.0 / 9.0));
}

#[test]
fn hits_can_change_under_swap() {
    let r = [0u8, 2, 0, 0];
    let h = [1u8, 1, 0, 2, 0];
    let forward = align(&r, &h);
    let backward = align(&h, &r);
    assert_eq!(forward.errors(), 3);
    assert_eq!(backward.errors(), 3);
    assert_eq!((forward.hits, forward.substitutions, forward.deletions, forward.insertions), (3, 0, 1, 2));
    assert_eq!((backward.hits, backward.substitutions, backward.deletions, backward.insertions), (2, 2, 1, 0));
}

fn words() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..3, 0..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn dp_equals_exhaustive(r in words(), h in words()) {
        let dp = align(&r, &h);
        prop_assert_eq!(dp, AlignmentCounts::from_ops(&exhaustive(&r, &h)));
        prop_assert_eq!(dp.hits + dp.substitutions + dp.deletions, r.len());
        prop_assert_eq!(dp.hits + dp.substitutions + dp.insertions, h.len());
    }

    #[test]
    fn information_identity_holds(r in words(), h in words()) {
        prop_assume!(!r.is_empty());
        let rep = report(&align(&r, &h)).unwrap();
        prop_assert_eq!(rep.wil + rep.wip, 1.0);
        prop_assert!((0.0..=1.0).contains(&rep.mer));
        prop_assert!(rep.wer >= 0.0);
    }

    #[test]
    fn swapping_sides_swaps_deletions_and_insertions(r in words(), h in words()) {
        let a = align(&r, &h);
        let b = align(&h, &r);
        // Total cost and the D/I balance are tie-break independent; hits are not
        // (see hits_can_change_under_swap).
        prop_assert_eq!(a.errors(), b.errors());
        prop_assert_eq!(a.deletions as i64 - a.insertions as i64, b.insertions as i64 - b.deletions as i64);
    }
}
