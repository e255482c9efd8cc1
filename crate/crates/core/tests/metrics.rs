use pdfsift::metrics::{confusion, rates, threshold_sweep};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.gen_range(1..60);
    let scores = (0..n).map(|_| rng.gen::<f64>()).collect();
    let labels = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    (scores, labels)
}

#[test]
fn extreme_thresholds() {
    let scores = [0.0, 0.3, 1.0, 0.7];
    let labels = [1, 0, 1, 0];
    let rows = threshold_sweep(&scores, &labels, &[0.0, 1.000_000_1]).unwrap();
    assert_eq!((rows[0].tpr, rows[0].fpr), (1.0, 1.0));
    assert_eq!((rows[1].tpr, rows[1].fpr), (0.0, 0.0));
}

#[test]
fn sweep_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for _ in 0..1000 {
        let (s, l) = random_set(&mut rng);
        let rows = threshold_sweep(&s, &l, &thresholds).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].tpr <= w[0].tpr && w[1].fpr <= w[0].fpr);
        }
    }
}

#[test]
fn single_threshold_matches_confusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (s, l) = random_set(&mut rng);
        let r = rates(&confusion(&s, &l, 0.5).unwrap());
        let row = threshold_sweep(&s, &l, &[0.5]).unwrap()[0];
        assert_eq!((row.tpr, row.fpr), (r.tpr, r.fpr));
    }
}

proptest! {
    #[test]
    fn permutation_invariance(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, l) = random_set(&mut rng);
        let mut pairs: Vec<(f64, u8)> = s.iter().copied().zip(l.iter().copied()).collect();
        pairs.shuffle(&mut rng);
        let (s2, l2): (Vec<f64>, Vec<u8>) = pairs.into_iter().unzip();
        prop_assert_eq!(confusion(&s, &l, t).unwrap(), confusion(&s2, &l2, t).unwrap());
    }

    #[test]
    fn complement_swaps_counts(seed in any::<u64>(), t in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, l) = random_set(&mut rng);
        let c = confusion(&s, &l, t).unwrap();
        let flipped_scores: Vec<f64> = s.iter().map(|v| if *v >= t { 0.0 } else { 1.0 }).collect();
        let flipped_labels: Vec<u8> = l.iter().map(|y| 1 - y).collect();
        let d = confusion(&flipped_scores, &flipped_labels, 0.5).unwrap();
        prop_assert_eq!((d.tp, d.tn, d.fp, d.fn_), (c.tn, c.tp, c.fn_, c.fp));
        prop_assert_eq!(c.total(), s.len());
    }
}
