use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::rng;
use crate::{Error, Result};

/// Splits `samples` (indices into `labels`) into disjoint train and test
/// index lists.
///
/// Classes with at least two samples are split individually with
/// `round(count · train_fraction)` clamped to `[1, count − 1]` training
/// samples, so every such class appears on both sides. Singleton classes are
/// pooled and split by the same fraction.
pub fn split_train_test(
    samples: &[usize],
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in samples {
        by_class.entry(labels[i]).or_default().push(i);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut singles = Vec::new();
    for (_, mut idx) in by_class {
        if idx.len() < 2 {
            singles.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let c = idx.len();
        let t = ((c as f64 * train_fraction).round() as usize).clamp(1, c - 1);
        train.extend_from_slice(&idx[..t]);
        test.extend_from_slice(&idx[t..]);
    }
    singles.shuffle(&mut rng);
    let t = (singles.len() as f64 * train_fraction).round() as usize;
    train.extend_from_slice(&singles[..t]);
    test.extend_from_slice(&singles[t..]);

    if train.is_empty() || test.is_empty() {
        return Err(Error::Infeasible(format!(
            "splitting {} samples at fraction {train_fraction} leaves an empty side",
            samples.len()
        )));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_fractions() {
        let labels = [0; 4];
        assert!(matches!(split_train_test(&[0, 1, 2, 3], &labels, 1.0, 0), Err(Error::Config(_))));
        assert!(split_train_test(&[0, 1, 2, 3], &labels, 0.0, 0).is_err());
        assert!(matches!(split_train_test(&[0], &labels, 0.5, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn eight_samples_three_quarters() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        let all: Vec<usize> = (0..8).collect();
        let (tr, te) = split_train_test(&all, &labels, 0.75, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 2));
        let mut both: Vec<usize> = tr.iter().chain(&te).copied().collect();
        both.sort_unstable();
        assert_eq!(both, all);
    }

    #[test]
    fn stratified_counts_follow_rounding() {
        // counting oracle: per class, test count = c − clamp(round(0.75c), 1, c−1)
        let counts = [2usize, 3, 7, 10, 41];
        let mut labels = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(k, c));
        }
        let all: Vec<usize> = (0..labels.len()).collect();
        let (_, te) = split_train_test(&all, &labels, 0.75, 11).unwrap();
        for (k, &c) in counts.iter().enumerate() {
            let in_test = te.iter().filter(|&&i| labels[i] == k).count();
            let mut expect_train = 0;
            let mut best = f64::INFINITY;
            for t in 1..c {
                let d = (t as f64 - 0.75 * c as f64).abs();
                if d < best - 1e-12 || (d - best).abs() < 1e-12 && t > expect_train {
                    best = d;
                    expect_train = t;
                }
            }
            assert_eq!(in_test, c - expect_train, "class {k}");
        }
    }

    #[test]
    fn deterministic() {
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let all: Vec<usize> = (0..30).collect();
        assert_eq!(
            split_train_test(&all, &labels, 0.6, 5).unwrap(),
            split_train_test(&all, &labels, 0.6, 5).unwrap()
        );
    }
}
