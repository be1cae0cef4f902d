//! End-to-end community detection on one graph.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::cluster::{kmeans, threshold_classify, KMeansOptions, Labeling};
use crate::eigen::{leading_eigs, EigenOptions, Spectrum};
use crate::embed::{npca_spectrum, opca_embed, score_ratio, scoreq_embed};
use crate::error::{Error, Result};
use crate::eval::{hamming_error, HammingResult};
use crate::graph::{giant_component, Graph, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Score,
    /// Row normalization by the `l^q` norm.
    ScoreQ(f64),
    Opca,
    Npca,
}

impl Method {
    /// Whether the method clusters the adjacency matrix's own eigenvectors.
    pub fn uses_adjacency_spectrum(&self) -> bool {
        !matches!(self, Method::Npca)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Method::Score => write!(f, "SCORE"),
            Method::ScoreQ(q) if q == 1.0 || q == 2.0 => write!(f, "SCORE{q}"),
            Method::ScoreQ(q) => write!(f, "SCOREq({q})"),
            Method::Opca => write!(f, "oPCA"),
            Method::Npca => write!(f, "nPCA"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `score`, `scoreq:<q>`, `score1`, `score2`, `opca`, `npca`
    /// (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "score" => return Ok(Method::Score),
            "score1" => return Ok(Method::ScoreQ(1.0)),
            "score2" => return Ok(Method::ScoreQ(2.0)),
            "opca" => return Ok(Method::Opca),
            "npca" => return Ok(Method::Npca),
            _ => {}
        }
        let q = lower
            .strip_prefix("scoreq:")
            .or_else(|| {
                lower
                    .strip_prefix("scoreq(")
                    .and_then(|r| r.strip_suffix(')'))
            })
            .ok_or_else(|| Error::Argument(format!("unknown method `{s}`")))?;
        let q: f64 = q
            .parse()
            .map_err(|_| Error::Argument(format!("bad exponent in method `{s}`")))?;
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Argument(format!(
                "norm exponent q must be positive, got {q}"
            )));
        }
        Ok(Method::ScoreQ(q))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// How a two-community SCORE split is read off the ratio vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdChoice {
    Value(f64),
    /// The threshold with the fewest mismatches; needs ground truth.
    Auto,
}

impl FromStr for ThresholdChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ThresholdChoice::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(ThresholdChoice::Value)
            .ok_or_else(|| {
                Error::Argument(format!("threshold must be a number or `auto`, got `{s}`"))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    pub k: usize,
    pub method: Method,
    pub threshold: Option<ThresholdChoice>,
    /// Ratio truncation level; `None` means `log(n)`.
    pub tn: Option<f64>,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub eigen: EigenOptions,
}

impl DetectOptions {
    pub fn new(k: usize, method: Method) -> Self {
        DetectOptions {
            k,
            method,
            threshold: None,
            tn: None,
            seed: 0,
            kmeans_restarts: KMeansOptions::default().restarts,
            eigen: EigenOptions::default(),
        }
    }
}

/// Labels for one graph, with the eigenvalues that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labeling: Labeling,
    pub eigenvalues: Vec<f64>,
    /// Threshold actually applied, when thresholding was used.
    pub threshold: Option<f64>,
    pub truncated_count: usize,
}

/// Runs `method` on `g` as given, with an adjacency spectrum computed
/// beforehand when the caller shares it across methods.
pub fn cluster_graph(
    g: &Graph,
    opts: &DetectOptions,
    shared: Option<&Spectrum>,
    truth: Option<&Labeling>,
) -> Result<Clustering> {
    let n = g.node_count();
    let k = opts.k;
    if k < 2 {
        return Err(Error::Argument(format!("K must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!(
            "K = {k} exceeds the number of nodes {n}"
        )));
    }
    if opts.threshold.is_some() && (opts.method != Method::Score || k != 2) {
        return Err(Error::Argument(
            "thresholding applies to SCORE with K = 2 only".into(),
        ));
    }

    let owned;
    let spectrum = if opts.method.uses_adjacency_spectrum() {
        match shared {
            Some(s) if s.k() == k => Some(s),
            _ => {
                owned = leading_eigs(g, k, &opts.eigen)?;
                Some(&owned)
            }
        }
    } else {
        None
    };

    let kopts = KMeansOptions {
        restarts: opts.kmeans_restarts,
        ..KMeansOptions::with_seed(opts.seed)
    };
    let mut truncated_count = 0;
    let mut applied = None;
    let (labeling, eigenvalues) = match opts.method {
        Method::Score => {
            let spec = spectrum.expect("adjacency spectrum");
            let r = score_ratio(spec, opts.tn)?;
            truncated_count = r.truncated_count;
            let labeling = match opts.threshold {
                Some(choice) => {
                    let ratio = r.ratio_vector();
                    let t = match choice {
                        ThresholdChoice::Value(t) => t,
                        ThresholdChoice::Auto => {
                            let truth = truth.ok_or_else(|| {
                                Error::Argument("threshold `auto` needs ground-truth labels".into())
                            })?;
                            best_threshold(&ratio, truth)?
                        }
                    };
                    applied = Some(t);
                    threshold_classify(&ratio, t)
                }
                None => kmeans(&r.ratios, k, &kopts)?.labeling,
            };
            (labeling, spec.values())
        }
        Method::ScoreQ(q) => {
            let spec = spectrum.expect("adjacency spectrum");
            (
                kmeans(&scoreq_embed(spec, q)?.points, k, &kopts)?.labeling,
                spec.values(),
            )
        }
        Method::Opca => {
            let spec = spectrum.expect("adjacency spectrum");
            (
                kmeans(&opca_embed(spec)?.points, k, &kopts)?.labeling,
                spec.values(),
            )
        }
        Method::Npca => {
            let spec = npca_spectrum(g, k, &opts.eigen)?;
            (
                kmeans(&spec.vector_matrix(), k, &kopts)?.labeling,
                spec.values(),
            )
        }
    };
    Ok(Clustering {
        labeling,
        eigenvalues: eigenvalues.into_iter().take(k).collect(),
        threshold: applied,
        truncated_count,
    })
}

/// Threshold between consecutive sorted ratio values (or beyond either
/// end) with the fewest mismatches; the smallest such threshold on ties.
pub fn best_threshold(ratio: &[f64], truth: &Labeling) -> Result<f64> {
    let mut sorted: Vec<f64> = ratio.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    let mut best = (usize::MAX, candidates[0]);
    for t in candidates {
        let m = hamming_error(&threshold_classify(ratio, t), truth, 2)?.mismatches;
        if m < best.0 {
            best = (m, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectReport {
    pub method: Method,
    pub k: usize,
    pub nodes_input: usize,
    pub edges_input: usize,
    /// Size of the giant component the method ran on.
    pub n0: usize,
    pub eigenvalues: Vec<f64>,
    pub threshold: Option<f64>,
    pub truncated_count: usize,
    pub seed: u64,
    /// `(node id, 1-based community)` for each node of the giant component.
    pub assignments: Vec<(String, usize)>,
    pub hamming: Option<HammingResult>,
}

/// Giant component, then `cluster_graph`, then Hamming error when labels
/// are supplied.
pub fn detect(
    g: &Graph,
    truth: Option<&GroundTruth>,
    opts: &DetectOptions,
) -> Result<DetectReport> {
    let (giant, _) = giant_component(g);
    let aligned = truth.map(|t| t.align(&giant)).transpose()?;
    if let (Some(t), Some(a)) = (truth, &aligned) {
        if t.community_count() != opts.k {
            return Err(Error::Argument(format!(
                "labels name {} communities but K = {}",
                t.community_count(),
                opts.k
            )));
        }
        debug_assert_eq!(a.len(), giant.node_count());
    }
    let c = cluster_graph(&giant, opts, None, aligned.as_ref())?;
    let hamming = aligned
        .as_ref()
        .map(|t| hamming_error(&c.labeling, t, opts.k))
        .transpose()?;
    Ok(DetectReport {
        method: opts.method,
        k: opts.k,
        nodes_input: g.node_count(),
        edges_input: g.edge_count(),
        n0: giant.node_count(),
        eigenvalues: c.eigenvalues,
        threshold: c.threshold,
        truncated_count: c.truncated_count,
        seed: opts.seed,
        assignments: giant
            .original_ids()
            .iter()
            .zip(c.labeling.as_slice())
            .map(|(id, &l)| (id.clone(), l + 1))
            .collect(),
        hamming,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        for (text, m, shown) in [
            ("score", Method::Score, "SCORE"),
            ("SCORE1", Method::ScoreQ(1.0), "SCORE1"),
            ("scoreq:2", Method::ScoreQ(2.0), "SCORE2"),
            ("scoreq:0.5", Method::ScoreQ(0.5), "SCOREq(0.5)"),
            ("opca", Method::Opca, "oPCA"),
            ("nPCA", Method::Npca, "nPCA"),
        ] {
            let parsed: Method = text.parse().unwrap();
            assert_eq!(parsed, m);
            assert_eq!(parsed.to_string(), shown);
            assert_eq!(shown.parse::<Method>().unwrap(), m);
        }
        assert!("pca".parse::<Method>().is_err());
        assert!("scoreq:-1".parse::<Method>().is_err());
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!(
            "auto".parse::<ThresholdChoice>().unwrap(),
            ThresholdChoice::Auto
        );
        assert_eq!(
            "-0.6".parse::<ThresholdChoice>().unwrap(),
            ThresholdChoice::Value(-0.6)
        );
        assert!("x".parse::<ThresholdChoice>().is_err());
    }

    #[test]
    fn best_threshold_separates_perfectly() {
        let ratio = [1.0, 0.8, -0.9, 0.9, -1.0];
        let truth = Labeling::new(vec![0, 0, 1, 0, 1], 2).unwrap();
        let t = best_threshold(&ratio, &truth).unwrap();
        assert!(t > -0.9 && t < 0.8);
    }

    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in (i + 1)..5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((4, 5));
        Graph::with_index_ids(10, edges).unwrap()
    }

    #[test]
    fn all_methods_split_two_cliques() {
        let g = two_cliques();
        let truth = Labeling::from_block_sizes(&[5, 5]);
        for m in [
            Method::Score,
            Method::ScoreQ(2.0),
            Method::Opca,
            Method::Npca,
        ] {
            let c = cluster_graph(&g, &DetectOptions::new(2, m), None, None).unwrap();
            assert_eq!(
                hamming_error(&c.labeling, &truth, 2).unwrap().mismatches,
                0,
                "{m}"
            );
        }
    }

    #[test]
    fn argument_errors() {
        let g = two_cliques();
        let big = DetectOptions::new(11, Method::Score);
        assert!(matches!(
            cluster_graph(&g, &big, None, None),
            Err(Error::Argument(_))
        ));
        let mut thr = DetectOptions::new(2, Method::Opca);
        thr.threshold = Some(ThresholdChoice::Value(0.0));
        assert!(cluster_graph(&g, &thr, None, None).is_err());
        let mut auto = DetectOptions::new(2, Method::Score);
        auto.threshold = Some(ThresholdChoice::Auto);
        assert!(cluster_graph(&g, &auto, None, None).is_err());
    }
}
