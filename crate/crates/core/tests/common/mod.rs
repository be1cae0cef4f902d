//! Reference implementations used as oracles by the integration tests.
//!
//! Nothing here calls into the library's numerical routines: the
//! eigensolver is a plain cyclic Jacobi iteration, and the clustering
//! references enumerate every assignment or permutation.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use score_core::cluster::Labeling;
use score_core::dcbm::{population_spectrum, DcbmParams};
use score_core::graph::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Eigenvalues and unit eigenvectors of a symmetric matrix by cyclic Jacobi
/// rotations. Vectors are returned as columns, unsorted.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let total: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// The `k` eigenpairs of largest magnitude from `jacobi_eigen`, each vector
/// signed so its largest-magnitude entry is positive.
pub fn jacobi_leading(m: &DMatrix<f64>, k: usize) -> Vec<(f64, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    let (values, vectors) = jacobi_eigen(&rows);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    idx.into_iter()
        .take(k)
        .map(|j| {
            let mut v = vectors[j].clone();
            let mut best = 0;
            for i in 0..v.len() {
                if v[i].abs() > v[best].abs() {
                    best = i;
                }
            }
            if v[best] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (values[j], v)
        })
        .collect()
}

/// Minimum k-means cost over every assignment of the rows to `k` clusters.
pub fn exhaustive_kmeans_cost(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut assign = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut cost = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = (0..n)
                .filter(|&i| assign[i] == c)
                .map(|i| &points[i])
                .collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..d {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(cost);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            assign[pos] += 1;
            if assign[pos] < k {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

/// All permutations of `0..k` by Heap's algorithm.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn heap(m: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..m {
            heap(m - 1, a, out);
            if m.is_multiple_of(2) {
                a.swap(i, m - 1);
            } else {
                a.swap(0, m - 1);
            }
        }
    }
    let mut a: Vec<usize> = (0..k).collect();
    let mut out = Vec::new();
    heap(k, &mut a, &mut out);
    out
}

/// Minimum over relabelings `pi` of the number of nodes with
/// `estimated[i] != pi(truth[i])`.
pub fn exhaustive_hamming(estimated: &[usize], truth: &[usize], k: usize) -> usize {
    permutations(k)
        .iter()
        .map(|pi| {
            estimated
                .iter()
                .zip(truth)
                .filter(|(&e, &t)| e != pi[t])
                .count()
        })
        .min()
        .unwrap()
}

/// `err_n` transcribed term by term.
pub fn err_n_direct(theta: &[f64]) -> f64 {
    let n = theta.len() as f64;
    let mut l1 = 0.0;
    let mut l2sq = 0.0;
    let mut l3cube = 0.0;
    let mut inv = 0.0;
    let mut min = f64::INFINITY;
    for &t in theta {
        l1 += t;
        l2sq += t * t;
        l3cube += t * t * t;
        inv += 1.0 / t;
        if t < min {
            min = t;
        }
    }
    let norm6 = l2sq * l2sq * l2sq;
    let second = n.ln() / min * (l1 / l2sq) * (l1 / l2sq);
    l3cube / norm6 * (inv + second)
}

/// A random DCBM instance with `n <= n_max`, randomly interleaved
/// communities, and a `DAD` spectrum well enough separated (from itself
/// and from zero) for eigenvectors to be determined to high accuracy.
pub struct Instance {
    pub params: DcbmParams,
    pub labels: Labeling,
    pub seed: u64,
}

pub fn random_instance(seed: u64, k: usize, n_max: usize) -> Instance {
    let mut r = rng(seed);
    loop {
        let n = r.random_range((2 * k).max(4)..=n_max);
        let mut labels: Vec<usize> = (0..n)
            .map(|i| if i < k { i } else { r.random_range(0..k) })
            .collect();
        labels.shuffle(&mut r);
        let theta: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.95)).collect();
        let mut a = DMatrix::from_fn(k, k, |_, _| r.random_range(0.0..1.0));
        a = (&a + a.transpose()) * 0.5;
        for i in 0..k {
            a[(i, i)] += r.random_range(0.0..1.0);
        }
        let max = a.max();
        a /= max;
        let labeling = Labeling::new(labels, k).unwrap();
        let sizes = labeling.community_sizes();
        let Ok(params) = DcbmParams::new(a, theta, sizes) else {
            continue;
        };
        let Ok(ps) = population_spectrum(&params, &labeling) else {
            continue;
        };
        let mu: Vec<f64> = ps
            .lambdas
            .iter()
            .map(|l| l / ps.theta_norm.powi(2))
            .collect();
        let top = mu[0].abs();
        let smallest = mu.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let mut sorted = mu.clone();
        sorted.sort_by(f64::total_cmp);
        let gap = sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if smallest < 1e-3 * top || gap < 1e-3 * top {
            continue;
        }
        return Instance {
            params,
            labels: labeling,
            seed,
        };
    }
}

/// The 200-instance population suite: 50 instances for each `K` in 1..=4.
pub fn population_suite() -> Vec<Instance> {
    (0..200u64)
        .map(|i| random_instance(1000 + i, 1 + (i % 4) as usize, 256))
        .collect()
}

/// A connected graph on `n` nodes: a random spanning tree plus extra edges.
pub fn random_connected_graph(seed: u64, n: usize, extra: usize) -> Graph {
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[r.random_range(0..i)];
        edges.push((order[i], parent));
    }
    for _ in 0..extra {
        let u = r.random_range(0..n);
        let v = r.random_range(0..n);
        edges.push((u, v));
    }
    Graph::with_index_ids(n, edges).unwrap()
}

/// Euclidean distance between rows `i` and `j` of `m`.
pub fn row_distance(m: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (m.row(i) - m.row(j)).norm()
}
