//! Degree-corrected block model.
//!
//! Edge `(i, j)` with `i` in community `k` and `j` in community `l` appears
//! independently with probability `theta(i) theta(j) A(k, l)`. Besides
//! sampling, this module evaluates the model's population spectrum in closed
//! form through the `K x K` matrix `DAD`, which the test suites use as an
//! oracle for the empirical pipeline.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::cluster::Labeling;
use crate::eigen::{leading_eigs, normalize_sign, EigenOptions, EigenPair, LinearMap, Spectrum};
use crate::embed::RatioMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::rng_from;

/// Default upper bound on `theta`.
pub const DEFAULT_G0: f64 = 0.999;

/// Largest `n` for which `Omega` is materialized densely.
pub const DENSE_OMEGA_MAX_N: usize = 4096;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DcbmParams {
    a: DMatrix<f64>,
    theta: Vec<f64>,
    sizes: Vec<usize>,
}

impl DcbmParams {
    /// Validates with the default bound `theta_max <= DEFAULT_G0`.
    pub fn new(a: DMatrix<f64>, theta: Vec<f64>, sizes: Vec<usize>) -> Result<Self> {
        Self::with_g0(a, theta, sizes, DEFAULT_G0)
    }

    pub fn with_g0(a: DMatrix<f64>, theta: Vec<f64>, sizes: Vec<usize>, g0: f64) -> Result<Self> {
        let k = a.nrows();
        if k == 0 || a.ncols() != k {
            return Err(Error::Model(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if sizes.len() != k {
            return Err(Error::Model(format!(
                "{} community sizes for K = {k}",
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Model("community sizes must be positive".into()));
        }
        if sizes.iter().sum::<usize>() != theta.len() {
            return Err(Error::Model(format!(
                "community sizes sum to {} but theta has {} entries",
                sizes.iter().sum::<usize>(),
                theta.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                if !a[(i, j)].is_finite() || a[(i, j)] < 0.0 {
                    return Err(Error::Model(format!(
                        "A({i},{j}) = {} is not a non-negative number",
                        a[(i, j)]
                    )));
                }
                if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Model(format!("A is not symmetric at ({i},{j})")));
                }
            }
        }
        let max = a.max();
        if (max - 1.0).abs() > SYMMETRY_TOL {
            return Err(Error::Model(format!("max entry of A must be 1, got {max}")));
        }
        if let Some(&bad) = theta.iter().find(|&&t| !(t > 0.0 && t <= g0 && t < 1.0)) {
            return Err(Error::Model(format!("theta entry {bad} outside (0, {g0}]")));
        }
        Ok(DcbmParams { a, theta, sizes })
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Contiguous block labels `V^(k) = {m(k-1)+1, ..., mk}`.
    pub fn block_labels(&self) -> Labeling {
        Labeling::from_block_sizes(&self.sizes)
    }

    fn check_labels(&self, labels: &Labeling) -> Result<()> {
        if labels.len() != self.n()
            || labels.k() != self.k()
            || labels.community_sizes() != self.sizes
        {
            return Err(Error::Argument(
                "labels are inconsistent with the model's community sizes".into(),
            ));
        }
        Ok(())
    }

    /// `Omega(i, j)` for nodes with the given labels.
    pub fn edge_probability(&self, i: usize, j: usize, li: usize, lj: usize) -> f64 {
        self.theta[i] * self.theta[j] * self.a[(li, lj)]
    }
}

/// Equal community sizes; `n` must be divisible by `k`.
pub fn equal_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || !n.is_multiple_of(k) {
        return Err(Error::Argument(format!(
            "n = {n} is not divisible into K = {k} equal communities"
        )));
    }
    Ok(vec![n / k; k])
}

/// Shape of the unpermuted degree vector, evaluated at `i = 1..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum ThetaPattern {
    Constant {
        c: f64,
    },
    /// `d0 + (c0 - d0) (i/n)`
    Linear {
        d0: f64,
        c0: f64,
    },
    /// `d0 + (c0 - d0) (i/n)^2`
    Quadratic {
        d0: f64,
        c0: f64,
    },
    /// `a + b (i/n)^2`
    Power2Offset {
        a: f64,
        b: f64,
    },
    /// `c0` on the first half (`i <= n/2`), `d0` on the rest.
    TwoPoint {
        c0: f64,
        d0: f64,
    },
}

impl ThetaPattern {
    pub fn values(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (1..=n)
            .map(|i| {
                let x = i as f64 / nf;
                match *self {
                    ThetaPattern::Constant { c } => c,
                    ThetaPattern::Linear { d0, c0 } => d0 + (c0 - d0) * x,
                    ThetaPattern::Quadratic { d0, c0 } => d0 + (c0 - d0) * x * x,
                    ThetaPattern::Power2Offset { a, b } => a + b * x * x,
                    ThetaPattern::TwoPoint { c0, d0 } => {
                        if i <= n / 2 {
                            c0
                        } else {
                            d0
                        }
                    }
                }
            })
            .collect()
    }
}

impl fmt::Display for ThetaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThetaPattern::Constant { c } => write!(f, "constant {c}"),
            ThetaPattern::Linear { d0, c0 } => write!(f, "linear {d0} {c0}"),
            ThetaPattern::Quadratic { d0, c0 } => write!(f, "quadratic {d0} {c0}"),
            ThetaPattern::Power2Offset { a, b } => write!(f, "power2_offset {a} {b}"),
            ThetaPattern::TwoPoint { c0, d0 } => write!(f, "two_point {c0} {d0}"),
        }
    }
}

impl FromStr for ThetaPattern {
    type Err = Error;

    /// Parses the `Display` form, e.g. `linear 0.02 0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let name = parts.next().unwrap_or_default();
        let args = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Argument(format!("bad number `{p}` in theta pattern")))
            })
            .collect::<Result<Vec<_>>>()?;
        let want = |count: usize| -> Result<()> {
            if args.len() == count {
                Ok(())
            } else {
                Err(Error::Argument(format!(
                    "theta pattern `{name}` takes {count} numbers, got {}",
                    args.len()
                )))
            }
        };
        match name {
            "constant" => want(1).map(|_| ThetaPattern::Constant { c: args[0] }),
            "linear" => want(2).map(|_| ThetaPattern::Linear {
                d0: args[0],
                c0: args[1],
            }),
            "quadratic" => want(2).map(|_| ThetaPattern::Quadratic {
                d0: args[0],
                c0: args[1],
            }),
            "power2_offset" => want(2).map(|_| ThetaPattern::Power2Offset {
                a: args[0],
                b: args[1],
            }),
            "two_point" => want(2).map(|_| ThetaPattern::TwoPoint {
                c0: args[0],
                d0: args[1],
            }),
            other => Err(Error::Argument(format!("unknown theta pattern `{other}`"))),
        }
    }
}

/// The pattern's values, uniformly shuffled.
pub fn permuted_theta(pattern: &ThetaPattern, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut theta = pattern.values(n);
    if let Some(&bad) = theta.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Model(format!(
            "pattern `{pattern}` yields theta = {bad} outside (0, 1)"
        )));
    }
    theta.shuffle(&mut rng_from(seed));
    Ok(theta)
}

/// Dense `Omega`, diagonal included.
pub fn build_omega(p: &DcbmParams, labels: &Labeling) -> Result<DMatrix<f64>> {
    p.check_labels(labels)?;
    let n = p.n();
    if n > DENSE_OMEGA_MAX_N {
        return Err(Error::Argument(format!(
            "dense Omega limited to n <= {DENSE_OMEGA_MAX_N}, got {n}"
        )));
    }
    let l = labels.as_slice();
    let omega = DMatrix::from_fn(n, n, |i, j| p.edge_probability(i, j, l[i], l[j]));
    if let Some(bad) = omega.iter().find(|&&w| w >= 1.0) {
        return Err(Error::Model(format!("Omega has an entry {bad} >= 1")));
    }
    Ok(omega)
}

/// `y = Omega x` without materializing `Omega`.
pub fn omega_apply(p: &DcbmParams, labels: &Labeling, x: &[f64], y: &mut [f64]) {
    let l = labels.as_slice();
    let mut block = vec![0.0; p.k()];
    for i in 0..p.n() {
        block[l[i]] += p.theta[i] * x[i];
    }
    let mixed: Vec<f64> = (0..p.k())
        .map(|k| (0..p.k()).map(|m| p.a[(k, m)] * block[m]).sum())
        .collect();
    for i in 0..p.n() {
        y[i] = p.theta[i] * mixed[l[i]];
    }
}

/// Graph whose edge `(i, j)`, `i < j`, is present with probability
/// `prob(i, j)`, independently.
pub fn sample_bernoulli_graph<F>(n: usize, prob: F, seed: u64) -> Graph
where
    F: Fn(usize, usize) -> f64,
{
    let mut rng = rng_from(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    Graph::with_index_ids(n, edges).expect("indices are in range")
}

/// One adjacency draw with `E[X] = Omega - diag(Omega)`.
pub fn sample_adjacency(p: &DcbmParams, labels: &Labeling, seed: u64) -> Result<Graph> {
    p.check_labels(labels)?;
    let l = labels.as_slice();
    Ok(sample_bernoulli_graph(
        p.n(),
        |i, j| p.edge_probability(i, j, l[i], l[j]),
        seed,
    ))
}

/// Closed-form nonzero spectrum of `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpectrum {
    /// Overall degree intensities `||theta^(k)|| / ||theta||`.
    pub d: Vec<f64>,
    pub dad: DMatrix<f64>,
    /// Eigenvalues of `Omega`, by non-increasing magnitude.
    pub lambdas: Vec<f64>,
    /// Unit eigenvectors of `DAD`, same order.
    pub a_vectors: Vec<DVector<f64>>,
    /// Unit eigenvectors of `Omega`, same order.
    pub eta_vectors: Vec<DVector<f64>>,
    pub theta_norm: f64,
}

impl PopulationSpectrum {
    pub fn to_spectrum(&self) -> Spectrum {
        let pairs = self
            .lambdas
            .iter()
            .zip(&self.eta_vectors)
            .map(|(&value, vector)| EigenPair {
                value,
                vector: vector.clone(),
            })
            .collect();
        Spectrum::from_pairs(pairs, 0.0)
    }

    /// `sum_k lambda_k eta_k eta_k^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.eta_vectors.first().map_or(0, |v| v.len());
        let mut out = DMatrix::zeros(n, n);
        for (l, v) in self.lambdas.iter().zip(&self.eta_vectors) {
            out += v * v.transpose() * *l;
        }
        out
    }
}

fn community_norms(p: &DcbmParams, labels: &Labeling) -> Vec<f64> {
    let mut sq = vec![0.0; p.k()];
    for (&t, &l) in p.theta.iter().zip(labels.as_slice()) {
        sq[l] += t * t;
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Minimum gap between adjacent eigenvalues of a symmetric matrix
/// (infinite for a `1 x 1` matrix).
pub fn eigengap(m: &DMatrix<f64>) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min)
}

/// Eigenpairs of `Omega` from the `K x K` problem on `DAD`:
/// `lambda_k = ||theta||^2 mu_k` and
/// `eta_k = sum_l [a_k(l) / ||theta^(l)||] theta^(l)`.
pub fn population_spectrum(p: &DcbmParams, labels: &Labeling) -> Result<PopulationSpectrum> {
    p.check_labels(labels)?;
    let k = p.k();
    let norms = community_norms(p, labels);
    let theta_norm = norms.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d: Vec<f64> = norms.iter().map(|x| x / theta_norm).collect();
    let dmat = DMatrix::from_diagonal(&DVector::from_column_slice(&d));
    let dad = &dmat * &p.a * &dmat;
    let dad = (&dad + dad.transpose()) * 0.5;

    let gap = eigengap(&dad);
    if gap < 1e-12 {
        return Err(Error::Degenerate(format!(
            "DAD has a repeated eigenvalue (gap {gap:e})"
        )));
    }
    let eig = SymmetricEigen::new(dad.clone());
    let mut order: Vec<usize> = (0..k).collect();
    let mu = &eig.eigenvalues;
    order.sort_by(|&x, &y| {
        mu[y]
            .abs()
            .total_cmp(&mu[x].abs())
            .then(mu[y].total_cmp(&mu[x]))
    });

    let l = labels.as_slice();
    let mut lambdas = Vec::with_capacity(k);
    let mut a_vectors = Vec::with_capacity(k);
    let mut eta_vectors = Vec::with_capacity(k);
    for &j in &order {
        let mut a = eig.eigenvectors.column(j).normalize();
        let mut eta = DVector::from_fn(p.n(), |i, _| a[l[i]] / norms[l[i]] * p.theta[i]);
        let before = eta.clone();
        normalize_sign(&mut eta);
        if eta != before {
            a.neg_mut();
        }
        lambdas.push(theta_norm * theta_norm * mu[j]);
        a_vectors.push(a);
        eta_vectors.push(eta);
    }
    Ok(PopulationSpectrum {
        d,
        dad,
        lambdas,
        a_vectors,
        eta_vectors,
        theta_norm,
    })
}

/// The two nonzero eigenvalues of `Omega` for `A = [[a, b], [b, c]]`:
/// `||theta||^2 / 2 (a d1^2 + c d2^2 +- sqrt((a d1^2 - c d2^2)^2 + 4 b^2 d1^2 d2^2))`.
pub fn two_block_eigenvalues(
    a: f64,
    b: f64,
    c: f64,
    d1: f64,
    d2: f64,
    theta_norm_sq: f64,
) -> (f64, f64) {
    let u = a * d1 * d1 - c * d2 * d2;
    let s = (u * u + 4.0 * b * b * d1 * d1 * d2 * d2).sqrt();
    let t = a * d1 * d1 + c * d2 * d2;
    (0.5 * theta_norm_sq * (t + s), 0.5 * theta_norm_sq * (t - s))
}

/// Values of `r0` on community 1 and community 2: the ratio of the two
/// population eigenvectors, scaled to 1 on community 1.
pub fn r0_vector(a: f64, b: f64, c: f64, d1: f64, d2: f64) -> Result<[f64; 2]> {
    if !(b > 0.0) {
        return Err(Error::Argument(format!("r0 needs b > 0, got {b}")));
    }
    if (a * c - b * b).abs() <= f64::EPSILON * (a * c).abs().max(b * b) {
        return Err(Error::Argument("r0 needs ac != b^2".into()));
    }
    let u = a * d1 * d1 - c * d2 * d2;
    let s = (u * u + 4.0 * b * b * d1 * d1 * d2 * d2).sqrt();
    let ratio = (u + s) / (2.0 * b * d1 * d2);
    Ok([1.0, -ratio * ratio])
}

/// `R(i, k) = eta_{k+1}(i) / eta_1(i)` for the population eigenvectors.
pub fn population_ratio_matrix(ps: &PopulationSpectrum) -> Result<RatioMatrix> {
    let lead = &ps.eta_vectors[0];
    let n = lead.len();
    if let Some(i) = lead.iter().position(|&x| x == 0.0) {
        return Err(Error::Degenerate(format!(
            "population leading eigenvector vanishes at node {i}"
        )));
    }
    let k = ps.eta_vectors.len();
    let ratios = DMatrix::from_fn(n, k - 1, |i, c| ps.eta_vectors[c + 1][i] / lead[i]);
    Ok(RatioMatrix {
        ratios,
        threshold: f64::INFINITY,
        truncated_count: 0,
    })
}

/// Scalar summaries of how hard an instance is.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Minimum adjacent-eigenvalue gap of `DAD`.
    pub eigengap: f64,
    pub err_n: f64,
    pub osnr: f64,
    pub nsnr: f64,
    /// High-probability bound on `||W - diag(Omega)||`.
    pub wnorm_bound: f64,
    /// `max_ij (eta_1(i)/theta(i)) / (eta_1(j)/theta(j))`.
    pub osc: f64,
    /// `log(n) theta_max ||theta||_1 / ||theta||^4`; small is good.
    pub sparsity_ratio: f64,
    /// Both vector moderate-deviation inequalities hold with the given constant.
    pub mdv_holds: bool,
    /// The matrix moderate-deviation inequality holds.
    pub mdm_holds: bool,
    pub constant: f64,
}

/// Moment summaries of `theta` used by several formulas.
struct ThetaNorms {
    n: f64,
    l1: f64,
    l2sq: f64,
    l3cube: f64,
    min: f64,
    max: f64,
    inv_sum: f64,
}

impl ThetaNorms {
    fn of(theta: &[f64]) -> Self {
        ThetaNorms {
            n: theta.len() as f64,
            l1: theta.iter().sum(),
            l2sq: theta.iter().map(|t| t * t).sum(),
            l3cube: theta.iter().map(|t| t * t * t).sum(),
            min: theta.iter().copied().fold(f64::INFINITY, f64::min),
            max: theta.iter().copied().fold(0.0, f64::max),
            inv_sum: theta.iter().map(|t| 1.0 / t).sum(),
        }
    }
}

/// `||theta||_3^3 / ||theta||^6 [ sum 1/theta(i) + log(n)/theta_min (||theta||_1 / ||theta||^2)^2 ]`.
pub fn err_n(theta: &[f64]) -> f64 {
    let t = ThetaNorms::of(theta);
    let log_n = t.n.ln();
    t.l3cube / t.l2sq.powi(3) * (t.inv_sum + log_n / t.min * (t.l1 / t.l2sq).powi(2))
}

/// Evaluates the diagnostics with moderate-deviation constant `constant`.
pub fn diagnostics_with_constant(
    p: &DcbmParams,
    labels: &Labeling,
    constant: f64,
) -> Result<Diagnostics> {
    p.check_labels(labels)?;
    let t = ThetaNorms::of(&p.theta);
    let log_n = t.n.ln();

    let norms = community_norms(p, labels);
    let theta_norm = t.l2sq.sqrt();
    let dmat = DMatrix::from_diagonal(&DVector::from_iterator(
        p.k(),
        norms.iter().map(|x| x / theta_norm),
    ));
    let dad = &dmat * &p.a * &dmat;
    let gap = if p.k() > 1 {
        eigengap(&dad)
    } else {
        f64::INFINITY
    };

    let osc = match population_spectrum(p, labels) {
        Ok(ps) => {
            let scaled: Vec<f64> = ps.eta_vectors[0]
                .iter()
                .zip(&p.theta)
                .map(|(e, t)| (e / t).abs())
                .collect();
            let hi = scaled.iter().copied().fold(0.0, f64::max);
            let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo
        }
        Err(_) => f64::INFINITY,
    };

    let spike = log_n * t.max * t.max / t.l3cube;
    let mdv_first: f64 = p.theta.iter().map(|&x| x.max(spike)).sum();
    let mdv_second: f64 = p
        .theta
        .iter()
        .map(|&x| (1.0 / x).max(spike / (x * x)))
        .sum();
    let mdv_holds = mdv_first <= constant * t.l1 && mdv_second <= constant * t.inv_sum;
    let mdm_holds = log_n / (t.min * t.min) <= (t.l1 / t.min).max(t.max * t.inv_sum);

    Ok(Diagnostics {
        eigengap: gap,
        err_n: err_n(&p.theta),
        osnr: t.l2sq / (log_n * t.max * t.l1).sqrt(),
        nsnr: t.l1 / (log_n * t.n).sqrt(),
        wnorm_bound: 4.0 * (log_n * t.max * t.l1).sqrt(),
        osc,
        sparsity_ratio: log_n * t.max * t.l1 / (t.l2sq * t.l2sq),
        mdv_holds,
        mdm_holds,
        constant,
    })
}

pub fn diagnostics(p: &DcbmParams, labels: &Labeling) -> Result<Diagnostics> {
    diagnostics_with_constant(p, labels, 1.0)
}

/// Spectral norm of `X - Omega = W - diag(Omega)` for a sampled graph.
pub fn noise_spectral_norm(
    g: &Graph,
    p: &DcbmParams,
    labels: &Labeling,
    opts: &EigenOptions,
) -> Result<f64> {
    p.check_labels(labels)?;
    if g.node_count() != p.n() {
        return Err(Error::Argument("graph and model disagree on n".into()));
    }
    let op = LinearMap::new(p.n(), |x: &[f64], y: &mut [f64]| {
        let mut om = vec![0.0; x.len()];
        omega_apply(p, labels, x, &mut om);
        g.matvec(x, y);
        for (a, b) in y.iter_mut().zip(&om) {
            *a -= b;
        }
    });
    let spec = leading_eigs(&op, 1, opts)?;
    Ok(spec.pairs[0].value.abs())
}
