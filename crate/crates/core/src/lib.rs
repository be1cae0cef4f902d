//! Spectral community detection for degree-corrected networks.
//!
//! The central method, SCORE, clusters the entrywise ratios of the leading
//! eigenvectors of the adjacency matrix to the first one. The crate also
//! provides the oPCA, nPCA and SCOREq variants, a degree-corrected block
//! model sampler with its closed-form population spectrum, and the
//! experiment harness used to compare the methods.

pub mod cluster;
pub mod datasets;
pub mod dcbm;
pub mod eigen;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod pipeline;
pub mod seed;

pub use cluster::{kmeans, threshold_classify, KMeansOptions, KMeansResult, Labeling};
pub use eigen::{leading_eigs, EigenOptions, EigenPair, Spectrum, SymmetricOperator};
pub use embed::{score_ratio, Embedding, EmbeddingMethod, RatioMatrix};
pub use error::{Error, ErrorKind, Result};
pub use eval::{hamming_error, summarize, HammingResult, Summary};
pub use graph::{giant_component, load_edge_list, remove_isolated, Graph, GroundTruth};
