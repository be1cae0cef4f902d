//! k-means over the rows of an embedding, and 1-D threshold classification.
//!
//! k-means solves `min ||R - M||_F^2` over matrices `M` with at most `K`
//! distinct rows: each distinct row is a center and nodes sharing a row form
//! a community. The optimum is approximated by the best of several
//! k-means++-seeded Lloyd runs, each finished with single-point moves.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

/// Community assignment. Labels are `0..k`; communities may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Argument(format!(
                "label {bad} out of range for K = {k}"
            )));
        }
        Ok(Labeling { labels, k })
    }

    /// Contiguous blocks: the first `sizes[0]` nodes get label 0, and so on.
    pub fn from_block_sizes(sizes: &[usize]) -> Self {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        Labeling {
            labels,
            k: sizes.len(),
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of communities the labeling ranges over.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Labels of the nodes listed in `index_map`, e.g. the survivors of
    /// preprocessing.
    pub fn restrict(&self, index_map: &[usize]) -> Labeling {
        Labeling {
            labels: index_map.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Lloyd stops once the relative cost improvement drops below this.
    pub rel_tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 100,
            seed: 0,
            max_iter: 300,
            rel_tol: 1e-9,
        }
    }
}

impl KMeansOptions {
    pub fn with_seed(seed: u64) -> Self {
        KMeansOptions {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labeling: Labeling,
    /// `K x d`; row `k` is the center of community `k`.
    pub centers: DMatrix<f64>,
    /// Sum of squared distances from each point to its center.
    pub cost: f64,
    pub restarts_used: usize,
    /// Restart that produced the returned solution.
    pub best_restart: usize,
    /// Cost after every assignment step of the winning run.
    pub cost_trace: Vec<f64>,
}

struct Run {
    labels: Vec<usize>,
    centers: Vec<f64>,
    cost: f64,
    trace: Vec<f64>,
}

/// Clusters the rows of `points` into at most `k` groups.
pub fn kmeans(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    let (n, d) = points.shape();
    if n == 0 || d == 0 {
        return Err(Error::Argument(format!(
            "k-means needs a non-empty point set, got {n}x{d}"
        )));
    }
    if k == 0 {
        return Err(Error::Argument("k-means needs K >= 1".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument(
            "k-means input contains a non-finite coordinate".into(),
        ));
    }
    let restarts = opts.restarts.max(1);

    // row-major copy for cache-friendly distance loops
    let data: Vec<f64> = (0..n)
        .flat_map(|i| points.row(i).iter().copied().collect::<Vec<_>>())
        .collect();

    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(&data, n, d, k, opts, derive_seed(&[opts.seed, r as u64])))
        .collect();

    // lowest cost wins; earlier restart on ties
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.cost < a.1.cost { b } else { a })
        .expect("at least one restart");

    let (labels, centers) = canonical_order(&best.labels, &best.centers, k, d);
    Ok(KMeansResult {
        labeling: Labeling { labels, k },
        centers: DMatrix::from_row_slice(k, d, &centers),
        cost: best.cost,
        restarts_used: restarts,
        best_restart,
        cost_trace: best.trace,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(d).enumerate() {
        let dist = sq_dist(point, center);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus_init(data: &[f64], n: usize, d: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&data[first * d..(first + 1) * d]);
    let mut dist: Vec<f64> = data
        .chunks_exact(d)
        .map(|p| sq_dist(p, &centers[..d]))
        .collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // fewer distinct points than centers
            rng.random_range(0..n)
        };
        let center = &data[pick * d..(pick + 1) * d];
        for (i, p) in data.chunks_exact(d).enumerate() {
            dist[i] = dist[i].min(sq_dist(p, center));
        }
        centers.extend_from_slice(center);
    }
    centers
}

fn lloyd(data: &[f64], n: usize, d: usize, k: usize, opts: &KMeansOptions, seed: u64) -> Run {
    let mut rng = rng_from(seed);
    let mut centers = plus_plus_init(data, n, d, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    let mut trace = Vec::new();

    for iter in 0..=opts.max_iter {
        let mut cost = 0.0;
        for (i, p) in data.chunks_exact(d).enumerate() {
            let (c, dd) = nearest(p, &centers, d);
            labels[i] = c;
            dist[i] = dd;
            cost += dd;
        }
        let prev = trace.last().copied();
        trace.push(cost);
        if let Some(prev) = prev {
            if prev - cost <= opts.rel_tol * prev {
                break;
            }
        }
        if iter == opts.max_iter {
            break;
        }
        let counts = update_means(data, d, k, &labels, &mut centers);
        for c in (0..k).filter(|&c| counts[c] == 0) {
            // reseed at the point farthest from its current center
            let far = (0..n).fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
            centers[c * d..(c + 1) * d].copy_from_slice(&data[far * d..(far + 1) * d]);
            dist[far] = 0.0;
        }
    }

    // centers become the community means of the final assignment
    let mut counts = update_means(data, d, k, &labels, &mut centers);
    hartigan_refine(
        data,
        d,
        k,
        opts.max_iter,
        &mut labels,
        &mut centers,
        &mut counts,
    );
    update_means(data, d, k, &labels, &mut centers);
    let cost: f64 = data
        .chunks_exact(d)
        .zip(&labels)
        .map(|(p, &c)| sq_dist(p, &centers[c * d..(c + 1) * d]))
        .sum();
    if cost < *trace.last().unwrap() {
        trace.push(cost);
    }
    Run {
        labels,
        centers,
        cost,
        trace,
    }
}

/// Single-point moves that lower the exact cost, with means updated in
/// place, until a full sweep moves nothing. Lloyd stops at assignments where
/// every point is nearest its own center; a move can still pay off because
/// it also shifts both means.
fn hartigan_refine(
    data: &[f64],
    d: usize,
    k: usize,
    max_sweeps: usize,
    labels: &mut [usize],
    centers: &mut [f64],
    counts: &mut [usize],
) {
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (i, p) in data.chunks_exact(d).enumerate() {
            let a = labels[i];
            let na = counts[a] as f64;
            if counts[a] < 2 {
                continue;
            }
            let removal = na / (na - 1.0) * sq_dist(p, &centers[a * d..(a + 1) * d]);
            let mut best = (a, removal);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let add = if counts[b] == 0 {
                    0.0
                } else {
                    nb / (nb + 1.0) * sq_dist(p, &centers[b * d..(b + 1) * d])
                };
                if add < best.1 {
                    best = (b, add);
                }
            }
            let b = best.0;
            if b == a || removal - best.1 <= 1e-12 * removal {
                continue;
            }
            let nb = counts[b] as f64;
            for j in 0..d {
                let x = p[j];
                centers[a * d + j] = (centers[a * d + j] * na - x) / (na - 1.0);
                centers[b * d + j] = if counts[b] == 0 {
                    x
                } else {
                    (centers[b * d + j] * nb + x) / (nb + 1.0)
                };
            }
            counts[a] -= 1;
            counts[b] += 1;
            labels[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
    }
}

/// Overwrites centers of non-empty clusters with their means; returns sizes.
fn update_means(
    data: &[f64],
    d: usize,
    k: usize,
    labels: &[usize],
    centers: &mut [f64],
) -> Vec<usize> {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &c) in data.chunks_exact(d).zip(labels) {
        counts[c] += 1;
        for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(p) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        }
    }
    counts
}

/// Renumbers clusters by their first member; empty clusters go last.
fn canonical_order(
    labels: &[usize],
    centers: &[f64],
    k: usize,
    d: usize,
) -> (Vec<usize>, Vec<f64>) {
    let mut new_id = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &l in labels {
        if new_id[l] == usize::MAX {
            new_id[l] = order.len();
            order.push(l);
        }
    }
    for c in 0..k {
        if new_id[c] == usize::MAX {
            new_id[c] = order.len();
            order.push(c);
        }
    }
    let relabeled = labels.iter().map(|&l| new_id[l]).collect();
    let reordered = order
        .iter()
        .flat_map(|&c| centers[c * d..(c + 1) * d].iter().copied())
        .collect();
    (relabeled, reordered)
}

/// Two-community split of a score vector: label 0 when `r(i) > t`, else 1.
pub fn threshold_classify(r: &[f64], t: f64) -> Labeling {
    Labeling {
        labels: r.iter().map(|&x| if x > t { 0 } else { 1 }).collect(),
        k: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    fn recompute_cost(points: &DMatrix<f64>, res: &KMeansResult) -> f64 {
        (0..points.nrows())
            .map(|i| {
                let c = res.labeling.as_slice()[i];
                (points.row(i) - res.centers.row(c)).norm_squared()
            })
            .sum()
    }

    #[test]
    fn two_obvious_groups() {
        let pts = column(&[0.0, 0.0, 10.0, 10.0]);
        let res = kmeans(&pts, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(res.labeling.as_slice(), &[0, 0, 1, 1]);
        assert_eq!(res.cost, 0.0);
        assert_eq!(res.restarts_used, 100);
    }

    #[test]
    fn single_cluster_sits_at_centroid() {
        let vals = [1.0, 2.0, 4.0, 9.0];
        let pts = column(&vals);
        let res = kmeans(&pts, 1, &KMeansOptions::default()).unwrap();
        let mean = vals.iter().sum::<f64>() / 4.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((res.centers[(0, 0)] - mean).abs() < 1e-12);
        assert!((res.cost - var * 4.0).abs() < 1e-12);
    }

    #[test]
    fn cost_is_recomputable_and_trace_monotone() {
        let mut rng = rng_from(7);
        let pts = DMatrix::from_fn(200, 3, |_, _| rng.random::<f64>());
        let res = kmeans(&pts, 4, &KMeansOptions::with_seed(3)).unwrap();
        assert!((res.cost - recompute_cost(&pts, &res)).abs() < 1e-9);
        for w in res.cost_trace.windows(2) {
            assert!(w[1] <= w[0], "trace increased: {:?}", res.cost_trace);
        }
    }

    #[test]
    fn single_point_moves_escape_lloyd_fixed_points() {
        // Lloyd from data-point seeds settles at cost 24.4845 here
        let pts = DMatrix::from_row_slice(
            7,
            2,
            &[
                0.9635504061281086,
                2.7319005210863834,
                -4.54841122525316,
                -3.8485204284399943,
                3.741876037067879,
                3.4162468837775037,
                2.526548345346564,
                0.5776078725582012,
                -1.4260905301199878,
                1.864002429858247,
                1.356215300289703,
                -2.6486289344701897,
                3.7102828304432798,
                3.3351858014334024,
            ],
        );
        let res = kmeans(&pts, 3, &KMeansOptions::with_seed(58)).unwrap();
        assert!(
            (res.cost - 24.4216667994129).abs() < 1e-9,
            "cost {}",
            res.cost
        );
        assert_eq!(res.labeling.as_slice(), &[0, 1, 0, 2, 2, 2, 0]);
    }

    #[test]
    fn same_seed_same_labels() {
        let mut rng = rng_from(11);
        let pts = DMatrix::from_fn(300, 2, |_, _| rng.random::<f64>());
        let a = kmeans(&pts, 3, &KMeansOptions::with_seed(5)).unwrap();
        let b = kmeans(&pts, 3, &KMeansOptions::with_seed(5)).unwrap();
        assert_eq!(a.labeling, b.labeling);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
    }

    #[test]
    fn more_clusters_than_distinct_points() {
        let pts = column(&[1.0, 1.0, 1.0]);
        let res = kmeans(&pts, 3, &KMeansOptions::default()).unwrap();
        assert_eq!(res.cost, 0.0);
        assert_eq!(res.labeling.as_slice(), &[0, 0, 0]);
        assert_eq!(res.labeling.community_sizes(), vec![3, 0, 0]);
    }

    #[test]
    fn labels_follow_first_member_order() {
        let pts = column(&[5.0, -5.0, 5.1, -5.1, 0.0, 0.1]);
        let res = kmeans(&pts, 3, &KMeansOptions::default()).unwrap();
        assert_eq!(res.labeling.as_slice(), &[0, 1, 0, 1, 2, 2]);
    }

    #[test]
    fn rejects_non_finite_input() {
        let pts = column(&[0.0, f64::NAN]);
        assert!(matches!(
            kmeans(&pts, 2, &KMeansOptions::default()),
            Err(Error::Argument(_))
        ));
        let pts = column(&[0.0, f64::INFINITY]);
        assert!(kmeans(&pts, 2, &KMeansOptions::default()).is_err());
        assert!(kmeans(&column(&[1.0]), 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn threshold_split() {
        let l = threshold_classify(&[0.5, -0.2, 0.0, 3.0], 0.0);
        assert_eq!(l.as_slice(), &[0, 1, 1, 0]);
        let all = threshold_classify(&[1.0, 2.0], -1.0);
        assert_eq!(all.community_sizes(), vec![2, 0]);
    }

    #[test]
    fn labeling_validation() {
        assert!(Labeling::new(vec![0, 2], 2).is_err());
        let l = Labeling::from_block_sizes(&[2, 3]);
        assert_eq!(l.as_slice(), &[0, 0, 1, 1, 1]);
        assert_eq!(l.restrict(&[4, 0]).as_slice(), &[1, 0]);
    }
}
