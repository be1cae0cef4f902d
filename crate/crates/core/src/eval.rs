//! Clustering error up to relabeling.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::Serialize;

use crate::cluster::Labeling;
use crate::error::{Error, Result};

/// Up to this many communities the best relabeling is found by enumerating
/// all permutations; beyond it by an assignment solver.
pub const EXHAUSTIVE_MAX_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HammingResult {
    pub mismatches: usize,
    pub rate: f64,
    /// `best_perm[t]` is the estimated label matched to true label `t`.
    pub best_perm: Vec<usize>,
    /// `confusion[e][t]` counts nodes with estimated label `e` and true label `t`.
    pub confusion: Vec<Vec<usize>>,
}

/// Minimum number of disagreements between `estimated` and any relabeling
/// `pi(truth)`, together with the minimizing `pi` (lexicographically
/// smallest among ties when `k <= EXHAUSTIVE_MAX_K`).
pub fn hamming_error(estimated: &Labeling, truth: &Labeling, k: usize) -> Result<HammingResult> {
    let n = estimated.len();
    if truth.len() != n {
        return Err(Error::Argument(format!(
            "labelings differ in length: {n} estimated vs {} true",
            truth.len()
        )));
    }
    if n == 0 {
        return Err(Error::Argument("cannot score an empty labeling".into()));
    }
    if k == 0 {
        return Err(Error::Argument("K must be at least 1".into()));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&e, &t) in estimated.as_slice().iter().zip(truth.as_slice()) {
        if e >= k || t >= k {
            return Err(Error::Argument(format!(
                "label out of range for K = {k}: ({e}, {t})"
            )));
        }
        confusion[e][t] += 1;
    }

    let (matched, best_perm) = if k <= EXHAUSTIVE_MAX_K {
        best_permutation_exhaustive(&confusion)
    } else {
        best_permutation_assignment(&confusion)
    };
    let mismatches = n - matched;
    Ok(HammingResult {
        mismatches,
        rate: mismatches as f64 / n as f64,
        best_perm,
        confusion,
    })
}

fn agreement(confusion: &[Vec<usize>], perm: &[usize]) -> usize {
    perm.iter().enumerate().map(|(t, &e)| confusion[e][t]).sum()
}

fn best_permutation_exhaustive(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = confusion.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (agreement(confusion, &perm), perm.clone());
    // lexicographic order; only strict improvements replace the incumbent
    while next_permutation(&mut perm) {
        let a = agreement(confusion, &perm);
        if a > best.0 {
            best = (a, perm.clone());
        }
    }
    best
}

fn best_permutation_assignment(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = confusion.len();
    // rows are true labels, columns estimated labels
    let weights = Matrix::from_fn(k, k, |(t, e)| confusion[e][t] as i64);
    let (total, perm) = kuhn_munkres(&weights);
    (total as usize, perm)
}

/// Advances to the next permutation in lexicographic order.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub sd: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Argument("cannot summarize an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, sd })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(v: &[usize], k: usize) -> Labeling {
        Labeling::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn identical_labelings() {
        let t = lab(&[0, 1, 1, 2], 3);
        let h = hamming_error(&t, &t, 3).unwrap();
        assert_eq!(h.mismatches, 0);
        assert_eq!(h.rate, 0.0);
        assert_eq!(h.best_perm, vec![0, 1, 2]);
    }

    #[test]
    fn swapped_labels_cost_nothing() {
        let t = lab(&[0, 0, 1, 1, 1], 2);
        let e = lab(&[1, 1, 0, 0, 0], 2);
        let h = hamming_error(&e, &t, 2).unwrap();
        assert_eq!(h.mismatches, 0);
        assert_eq!(h.best_perm, vec![1, 0]);
    }

    #[test]
    fn one_error() {
        let t = lab(&[0, 0, 1, 1], 2);
        let e = lab(&[1, 0, 0, 0], 2);
        let h = hamming_error(&e, &t, 2).unwrap();
        assert_eq!(h.mismatches, 1);
        assert_eq!(h.rate, 0.25);
        // trace of the permuted confusion equals n - mismatches
        let trace: usize = h
            .best_perm
            .iter()
            .enumerate()
            .map(|(t, &e)| h.confusion[e][t])
            .sum();
        assert_eq!(trace, 3);
    }

    #[test]
    fn argument_errors() {
        assert!(hamming_error(&lab(&[0], 2), &lab(&[0, 1], 2), 2).is_err());
        assert!(hamming_error(&lab(&[0, 2], 3), &lab(&[0, 1], 3), 2).is_err());
    }

    #[test]
    fn permutations_enumerate_in_order() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 2, 1]);
        assert_eq!(seen[5], vec![2, 1, 0]);
    }

    #[test]
    fn large_k_uses_assignment() {
        let k = 10;
        let truth: Vec<usize> = (0..50).map(|i| i % k).collect();
        let est: Vec<usize> = truth.iter().map(|&t| (t + 3) % k).collect();
        let mut est_noisy = est.clone();
        est_noisy[0] = 9;
        let h = hamming_error(&lab(&est_noisy, k), &lab(&truth, k), k).unwrap();
        assert_eq!(h.mismatches, 1);
        assert_eq!(h.best_perm, (0..k).map(|t| (t + 3) % k).collect::<Vec<_>>());
    }

    #[test]
    fn summaries() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 0.0));
        let s = summarize(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.sd - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(summarize(&[]).is_err());
        assert_eq!(summarize(&[3.0]).unwrap().sd, 0.0);
    }
}
