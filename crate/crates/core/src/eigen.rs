//! Leading eigenpairs of symmetric operators.
//!
//! "Leading" ranks eigenvalues by magnitude, so large negative eigenvalues
//! (common in adjacency spectra) count as much as positive ones. Small
//! problems go through a dense symmetric eigendecomposition; larger ones
//! through a thick-restart Lanczos iteration with full reorthogonalization
//! whose Ritz values from both ends of the spectrum are pooled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed::rng_from;

/// A symmetric linear map given by its action on vectors.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`; `y` has length `dim()` and is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Dense copy, one column per unit vector.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        // remove round-off asymmetry
        let t = m.transpose();
        (m + t) * 0.5
    }
}

impl SymmetricOperator for Graph {
    fn dim(&self) -> usize {
        self.node_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// `S^{-1/2} X S^{-1/2}` with `S` the diagonal degree matrix.
pub struct NormalizedAdjacency<'a> {
    graph: &'a Graph,
    inv_sqrt_degree: Vec<f64>,
}

impl<'a> NormalizedAdjacency<'a> {
    pub fn new(graph: &'a Graph) -> Result<Self> {
        let inv_sqrt_degree = graph
            .degrees()
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d == 0 {
                    Err(Error::Data(format!(
                        "node `{}` has degree zero; remove isolated nodes first",
                        graph.original_id(i)
                    )))
                } else {
                    Ok(1.0 / (d as f64).sqrt())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalizedAdjacency {
            graph,
            inv_sqrt_degree,
        })
    }
}

impl SymmetricOperator for NormalizedAdjacency<'_> {
    fn dim(&self) -> usize {
        self.graph.node_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let scaled: Vec<f64> = x
            .iter()
            .zip(&self.inv_sqrt_degree)
            .map(|(a, s)| a * s)
            .collect();
        self.graph.matvec(&scaled, y);
        for (out, s) in y.iter_mut().zip(&self.inv_sqrt_degree) {
            *out *= s;
        }
    }
}

/// Operator backed by a closure.
pub struct LinearMap<F> {
    dim: usize,
    f: F,
}

impl<F> LinearMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        LinearMap { dim, f }
    }
}

impl<F> SymmetricOperator for LinearMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm; the entry of largest magnitude is positive.
    pub vector: DVector<f64>,
}

/// Leading eigenpairs, by non-increasing `|value|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    /// Largest relative residual `||M v - l v|| / max(1, |l|)` over the pairs.
    pub tol: f64,
}

impl Spectrum {
    /// Wraps pairs that are already sorted and normalized.
    pub fn from_pairs(pairs: Vec<EigenPair>, tol: f64) -> Self {
        Spectrum { pairs, tol }
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// Length of the eigenvectors.
    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.vector.len())
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn vector(&self, k: usize) -> &DVector<f64> {
        &self.pairs[k].vector
    }

    /// `n x K` matrix with the eigenvectors as columns.
    pub fn vector_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.pairs.iter().map(|p| p.vector.clone()).collect();
        DMatrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Target relative residual.
    pub tol: f64,
    /// Restarts of the Krylov build before giving up.
    pub max_restarts: usize,
    /// Seed of the random starting vector.
    pub seed: u64,
    /// Problems of at most this dimension are solved densely.
    pub dense_threshold: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-10,
            max_restarts: 50,
            seed: 0,
            dense_threshold: 512,
        }
    }
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties)
/// is positive.
pub fn normalize_sign(v: &mut DVector<f64>) {
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if !v.is_empty() && v[pivot] < 0.0 {
        v.neg_mut();
    }
}

/// Magnitudes this close (relative to the largest) count as tied.
const MAGNITUDE_TIE: f64 = 1e-12;

/// Orders by descending magnitude; on ties, up to roundoff, the positive
/// value comes first.
fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
    });
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 1..idx.len() {
        let (prev, cur) = (values[idx[i - 1]], values[idx[i]]);
        if prev < 0.0 && cur > 0.0 && prev.abs() - cur <= MAGNITUDE_TIE * scale {
            idx.swap(i - 1, i);
        }
    }
    idx
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Argument(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    Ok(())
}

fn relative_residual<O: SymmetricOperator + ?Sized>(op: &O, value: f64, v: &DVector<f64>) -> f64 {
    let mut mv = vec![0.0; v.len()];
    op.apply(v.as_slice(), &mut mv);
    let r: f64 = mv
        .iter()
        .zip(v.iter())
        .map(|(a, b)| (a - value * b).powi(2))
        .sum();
    r.sqrt() / value.abs().max(1.0)
}

/// The `k` leading eigenpairs, dense for small operators and Lanczos
/// otherwise.
pub fn leading_eigs<O: SymmetricOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    if op.dim() <= opts.dense_threshold {
        dense_eigs(op, k)
    } else {
        lanczos_eigs(op, k, opts)
    }
}

/// Full symmetric eigendecomposition of the materialized operator.
pub fn dense_eigs<O: SymmetricOperator + ?Sized>(op: &O, k: usize) -> Result<Spectrum> {
    let n = op.dim();
    check_k(k, n)?;
    let dense = op.to_dense();
    let eig = SymmetricEigen::new(dense.clone());
    let order = magnitude_order(eig.eigenvalues.as_slice());
    let mut pairs = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for &j in order.iter().take(k) {
        let value = eig.eigenvalues[j];
        let mut vector = eig.eigenvectors.column(j).normalize();
        normalize_sign(&mut vector);
        let res = (&dense * &vector - &vector * value).norm() / value.abs().max(1.0);
        worst = worst.max(res);
        pairs.push(EigenPair { value, vector });
    }
    Ok(Spectrum { pairs, tol: worst })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = dot(w, b);
            for (x, y) in w.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
}

/// A unit vector orthogonal to `basis`, or `None` if the basis spans
/// (numerically) everything reachable from random draws.
fn random_orthogonal(n: usize, basis: &[Vec<f64>], rng: &mut impl Rng) -> Option<Vec<f64>> {
    for _ in 0..3 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let before = norm(&v);
        orthogonalize(&mut v, basis);
        let after = norm(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            return Some(v);
        }
    }
    None
}

fn combine(vectors: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (v, c) in vectors.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Thick-restart Lanczos for the `k` eigenpairs of largest magnitude.
///
/// The Krylov basis has dimension `min(n, max(2k + 20, 40))`. After each
/// build the projected matrix is diagonalized; if some wanted Ritz pair has
/// not reached `opts.tol`, the leading half of the Ritz vectors is kept and
/// the basis is extended again from the Lanczos continuation vector.
pub fn lanczos_eigs<O: SymmetricOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    let n = op.dim();
    check_k(k, n)?;
    let m = n.min((2 * k + 20).max(40));
    let mut rng = rng_from(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut next = random_orthogonal(n, &basis, &mut rng);
    let mut best_residuals = vec![f64::INFINITY; k];

    for restart in 0..=opts.max_restarts {
        while basis.len() < m {
            let Some(v) = next.take() else { break };
            let mut w = vec![0.0; n];
            op.apply(&v, &mut w);
            basis.push(v);
            let mut cont = w.clone();
            images.push(w);
            orthogonalize(&mut cont, &basis);
            let scale = norm(&images[images.len() - 1]).max(f64::MIN_POSITIVE);
            let len = norm(&cont);
            next = if len > 1e-10 * scale {
                cont.iter_mut().for_each(|x| *x /= len);
                Some(cont)
            } else {
                // invariant subspace; keep exploring from a fresh direction
                random_orthogonal(n, &basis, &mut rng)
            };
        }

        let p = basis.len();
        let projected = DMatrix::from_fn(p, p, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(projected);
        let order = magnitude_order(eig.eigenvalues.as_slice());

        let ritz = |j: usize| -> (f64, Vec<f64>, Vec<f64>) {
            let s = eig.eigenvectors.column(j);
            (
                eig.eigenvalues[j],
                combine(&basis, s.iter().copied()),
                combine(&images, s.iter().copied()),
            )
        };

        let mut pairs = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &j in order.iter().take(k) {
            let (value, y, _) = ritz(j);
            let mut vector = DVector::from_vec(y);
            let len = vector.norm();
            vector /= len;
            residuals.push(relative_residual(op, value, &vector));
            pairs.push((value, vector));
        }
        for (best, &r) in best_residuals.iter_mut().zip(&residuals) {
            *best = best.min(r);
        }

        let exhausted = next.is_none() || p == n;
        if residuals.iter().all(|&r| r <= opts.tol) || exhausted {
            let tol = residuals.iter().copied().fold(0.0, f64::max);
            let pairs = pairs
                .into_iter()
                .map(|(value, mut vector)| {
                    normalize_sign(&mut vector);
                    EigenPair { value, vector }
                })
                .collect();
            return Ok(Spectrum { pairs, tol });
        }
        if restart == opts.max_restarts {
            break;
        }

        let keep = (k + (m - k) / 2).min(p - 1).max(k);
        let (kept_basis, kept_images): (Vec<_>, Vec<_>) = order
            .iter()
            .take(keep)
            .map(|&j| {
                let (_, y, ay) = ritz(j);
                (y, ay)
            })
            .unzip();
        basis = kept_basis;
        images = kept_images;
        if let Some(v) = next.as_mut() {
            orthogonalize(v, &basis);
            let len = norm(v);
            v.iter_mut().for_each(|x| *x /= len);
        }
    }

    Err(Error::NoConvergence {
        restarts: opts.max_restarts,
        residuals: best_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn roundoff_ties_put_positive_first() {
        assert_eq!(magnitude_order(&[-(1.0 + 1e-15), 1.0, 0.5]), vec![1, 0, 2]);
        assert_eq!(magnitude_order(&[-1.1, 1.0, 0.5]), vec![0, 1, 2]);
    }

    #[test]
    fn two_by_two_swap() {
        let spec = dense_eigs(&swap_matrix(), 2).unwrap();
        assert_eq!(spec.k(), 2);
        assert!((spec.pairs[0].value - 1.0).abs() < 1e-14);
        assert!((spec.pairs[1].value + 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((spec.vector(0) - DVector::from_vec(vec![h, h])).norm() < 1e-14);
        // tie in magnitude: lowest index decides the sign
        assert!((spec.vector(1) - DVector::from_vec(vec![h, -h])).norm() < 1e-14);

        let lz = lanczos_eigs(&swap_matrix(), 2, &EigenOptions::default()).unwrap();
        assert!((lz.pairs[0].value - 1.0).abs() < 1e-12);
        assert!((lz.pairs[1].value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention() {
        let mut v = DVector::from_vec(vec![0.1, -0.9, 0.3]);
        normalize_sign(&mut v);
        assert_eq!(v[1], 0.9);
        let mut tie = DVector::from_vec(vec![-0.5, 0.5]);
        normalize_sign(&mut tie);
        assert_eq!(tie[0], 0.5);
    }

    #[test]
    fn k_out_of_range() {
        assert!(matches!(
            dense_eigs(&swap_matrix(), 3),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            lanczos_eigs(&swap_matrix(), 0, &EigenOptions::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn large_negative_eigenvalue_is_found() {
        // diag(1, -5, 2, 0.5, ...) : the leading pair is -5
        let n = 100;
        let mut d = vec![0.01; n];
        d[0] = 1.0;
        d[1] = -5.0;
        d[2] = 2.0;
        let m = DMatrix::from_diagonal(&DVector::from_vec(d));
        let spec = lanczos_eigs(&m, 3, &EigenOptions::default()).unwrap();
        assert_eq!(spec.values().len(), 3);
        assert!((spec.pairs[0].value + 5.0).abs() < 1e-10);
        assert!((spec.pairs[1].value - 2.0).abs() < 1e-10);
        assert!((spec.pairs[2].value - 1.0).abs() < 1e-10);
        assert!((spec.vector(0)[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn disconnected_graph_needs_fresh_directions() {
        // two disjoint cliques of different sizes
        let mut edges = Vec::new();
        for i in 0..30 {
            for j in (i + 1)..30 {
                edges.push((i, j));
            }
        }
        for i in 30..40 {
            for j in (i + 1)..40 {
                edges.push((i, j));
            }
        }
        let g = Graph::with_index_ids(60, edges).unwrap();
        let spec = lanczos_eigs(&g, 2, &EigenOptions::default()).unwrap();
        assert!((spec.pairs[0].value - 29.0).abs() < 1e-9);
        assert!((spec.pairs[1].value - 9.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_adjacency_rejects_isolated_node() {
        let g = Graph::with_index_ids(3, [(0, 1)]).unwrap();
        assert!(matches!(NormalizedAdjacency::new(&g), Err(Error::Data(_))));
    }

    #[test]
    fn regular_graph_normalization_scales_spectrum() {
        // cycle C_8 is 2-regular
        let g = Graph::with_index_ids(8, (0..8).map(|i| (i, (i + 1) % 8))).unwrap();
        let plain = dense_eigs(&g, 2).unwrap();
        let norm = dense_eigs(&NormalizedAdjacency::new(&g).unwrap(), 2).unwrap();
        for (a, b) in plain.pairs.iter().zip(&norm.pairs) {
            assert!((a.value / 2.0 - b.value).abs() < 1e-12);
        }
        assert!((plain.vector(0) - norm.vector(0)).norm() < 1e-10);
    }
}
