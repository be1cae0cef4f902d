//! Point sets built from leading eigenvectors.
//!
//! SCORE divides every eigenvector entrywise by the leading one, which
//! cancels the per-node degree factor; SCOREq applies the more general
//! row map `x -> x / ||x||_q`. oPCA and nPCA cluster the raw eigenvectors of
//! the adjacency matrix and of its degree-normalized version.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eigen::{leading_eigs, EigenOptions, NormalizedAdjacency, Spectrum};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Denominators below this magnitude are treated as an overflowing ratio.
const TINY_LEADING_ENTRY: f64 = 1e-300;

/// Entrywise eigenvector ratios `eta_{k+1}(i) / eta_1(i)`, clipped to
/// `[-threshold, threshold]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    /// `n x (K - 1)`.
    pub ratios: DMatrix<f64>,
    pub threshold: f64,
    pub truncated_count: usize,
}

impl RatioMatrix {
    /// First ratio column; the whole matrix when `K = 2`.
    pub fn ratio_vector(&self) -> Vec<f64> {
        self.ratios.column(0).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "q", rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Score,
    ScoreQ(f64),
    Opca,
    Npca,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// One row per node.
    pub points: DMatrix<f64>,
    pub method: EmbeddingMethod,
    /// Rows that were entirely zero and were left at the origin.
    pub zero_rows: usize,
}

/// The `log(n)` clipping level.
pub fn default_threshold(n: usize) -> f64 {
    (n as f64).ln()
}

/// SCORE's ratio matrix. `threshold` defaults to `log(n)`; pass
/// `f64::INFINITY` to disable clipping.
pub fn score_ratio(spec: &Spectrum, threshold: Option<f64>) -> Result<RatioMatrix> {
    let k = spec.k();
    if k < 2 {
        return Err(Error::Argument(format!(
            "SCORE needs K >= 2 eigenvectors, got {k}"
        )));
    }
    let n = spec.dim();
    let tn = threshold.unwrap_or_else(|| default_threshold(n));
    if tn.is_nan() || tn < 0.0 {
        return Err(Error::Argument(format!(
            "truncation level must be non-negative, got {tn}"
        )));
    }
    let lead = spec.vector(0);
    if let Some(i) = lead.iter().position(|&x| x == 0.0) {
        return Err(Error::Data(format!(
            "leading eigenvector vanishes at node {i}; restrict the graph to its giant component first"
        )));
    }

    let mut truncated = 0;
    let mut ratios = DMatrix::zeros(n, k - 1);
    for col in 1..k {
        let v = spec.vector(col);
        for i in 0..n {
            let raw = if lead[i].abs() < TINY_LEADING_ENTRY {
                // sign of the ratio, magnitude beyond any threshold
                if v[i] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY * v[i].signum() * lead[i].signum()
                }
            } else {
                v[i] / lead[i]
            };
            let clipped = raw.clamp(-tn, tn);
            if clipped != raw {
                truncated += 1;
            }
            if !clipped.is_finite() {
                return Err(Error::Data(format!(
                    "eigenvector ratio at node {i} overflows and no finite truncation level is set"
                )));
            }
            ratios[(i, col - 1)] = clipped;
        }
    }
    Ok(RatioMatrix {
        ratios,
        threshold: tn,
        truncated_count: truncated,
    })
}

pub fn score_embed(spec: &Spectrum, threshold: Option<f64>) -> Result<Embedding> {
    let r = score_ratio(spec, threshold)?;
    Ok(Embedding {
        points: r.ratios,
        method: EmbeddingMethod::Score,
        zero_rows: 0,
    })
}

/// Rows of `[eta_1 ... eta_K]` scaled to unit `l^q` norm.
pub fn scoreq_embed(spec: &Spectrum, q: f64) -> Result<Embedding> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Argument(format!(
            "norm exponent q must be positive, got {q}"
        )));
    }
    if spec.k() < 2 {
        return Err(Error::Argument(format!(
            "SCOREq needs K >= 2 eigenvectors, got {}",
            spec.k()
        )));
    }
    let mut points = spec.vector_matrix();
    let mut zero_rows = 0;
    for mut row in points.row_iter_mut() {
        let qnorm = row
            .iter()
            .map(|x| x.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q);
        if qnorm == 0.0 {
            zero_rows += 1;
        } else {
            row /= qnorm;
        }
    }
    Ok(Embedding {
        points,
        method: EmbeddingMethod::ScoreQ(q),
        zero_rows,
    })
}

/// The eigenvector rows, unmodified.
pub fn opca_embed(spec: &Spectrum) -> Result<Embedding> {
    if spec.k() < 2 {
        return Err(Error::Argument(format!(
            "oPCA needs K >= 2 eigenvectors, got {}",
            spec.k()
        )));
    }
    Ok(Embedding {
        points: spec.vector_matrix(),
        method: EmbeddingMethod::Opca,
        zero_rows: 0,
    })
}

/// Leading eigenpairs of `S^{-1/2} X S^{-1/2}`.
pub fn npca_spectrum(g: &Graph, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    if k < 2 {
        return Err(Error::Argument(format!("nPCA needs K >= 2, got {k}")));
    }
    let op = NormalizedAdjacency::new(g)?;
    leading_eigs(&op, k, opts)
}

/// Leading eigenvectors of `S^{-1/2} X S^{-1/2}` as rows.
pub fn npca_embed(g: &Graph, k: usize, opts: &EigenOptions) -> Result<Embedding> {
    let spec = npca_spectrum(g, k, opts)?;
    Ok(Embedding {
        points: spec.vector_matrix(),
        method: EmbeddingMethod::Npca,
        zero_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::EigenPair;
    use nalgebra::DVector;

    fn spectrum(columns: &[&[f64]]) -> Spectrum {
        let pairs = columns
            .iter()
            .enumerate()
            .map(|(j, c)| EigenPair {
                value: (columns.len() - j) as f64,
                vector: DVector::from_column_slice(c),
            })
            .collect();
        Spectrum::from_pairs(pairs, 0.0)
    }

    #[test]
    fn proportional_second_vector_gives_constant_column() {
        let lead = [0.5, 0.5, 0.5, 0.5];
        let second: Vec<f64> = lead.iter().map(|x| -0.3 * x).collect();
        let r = score_ratio(&spectrum(&[&lead, &second]), None).unwrap();
        assert_eq!(r.truncated_count, 0);
        assert!(r.ratio_vector().iter().all(|&x| (x + 0.3).abs() < 1e-15));
        assert!((r.threshold - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ratios_are_clipped() {
        let lead = [0.01, 0.7, 0.7, 0.1];
        let second = [0.5, 0.1, -0.1, -0.6];
        let r = score_ratio(&spectrum(&[&lead, &second]), Some(2.0)).unwrap();
        assert_eq!(r.ratio_vector(), vec![2.0, 0.1 / 0.7, -0.1 / 0.7, -2.0]);
        assert_eq!(r.truncated_count, 2);

        let open = score_ratio(&spectrum(&[&lead, &second]), Some(f64::INFINITY)).unwrap();
        assert_eq!(open.truncated_count, 0);
        assert!((open.ratios[(0, 0)] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_leading_entry_clips_by_sign() {
        let lead = [1e-310, 1.0];
        let second = [-0.5, 0.0];
        let r = score_ratio(&spectrum(&[&lead, &second]), Some(3.0)).unwrap();
        assert_eq!(r.ratios[(0, 0)], -3.0);
        assert_eq!(r.truncated_count, 1);
        assert!(score_ratio(&spectrum(&[&lead, &second]), Some(f64::INFINITY)).is_err());
    }

    #[test]
    fn zero_leading_entry_is_rejected() {
        let err = score_ratio(&spectrum(&[&[0.0, 1.0], &[1.0, 0.0]]), None).unwrap_err();
        assert!(err.to_string().contains("giant component"));
        assert!(score_ratio(&spectrum(&[&[1.0, 1.0]]), None).is_err());
    }

    #[test]
    fn scoreq_row_norms() {
        let spec = spectrum(&[&[3.0, 0.0], &[4.0, 0.0]]);
        let e2 = scoreq_embed(&spec, 2.0).unwrap();
        assert!((e2.points[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((e2.points[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(e2.zero_rows, 1);
        let e1 = scoreq_embed(&spec, 1.0).unwrap();
        assert!((e1.points[(0, 0)] - 3.0 / 7.0).abs() < 1e-15);
        assert!((e1.points[(0, 1)] - 4.0 / 7.0).abs() < 1e-15);
        assert!(matches!(scoreq_embed(&spec, 0.0), Err(Error::Argument(_))));
        assert!(scoreq_embed(&spec, -1.0).is_err());
    }

    #[test]
    fn scoreq_ignores_positive_row_scaling() {
        let base = spectrum(&[&[0.2, 0.5, 0.1], &[-0.3, 0.4, 0.9]]);
        let scaled = spectrum(&[
            &[0.2 * 7.0, 0.5 * 0.01, 0.1],
            &[-0.3 * 7.0, 0.4 * 0.01, 0.9],
        ]);
        for q in [0.5, 1.0, 2.0, 3.5] {
            let a = scoreq_embed(&base, q).unwrap().points;
            let b = scoreq_embed(&scaled, q).unwrap().points;
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn opca_is_the_eigenvector_matrix() {
        let spec = spectrum(&[&[0.6, 0.8], &[0.8, -0.6]]);
        let e = opca_embed(&spec).unwrap();
        assert_eq!(e.points, spec.vector_matrix());
        assert_eq!(e.method, EmbeddingMethod::Opca);
    }
}
