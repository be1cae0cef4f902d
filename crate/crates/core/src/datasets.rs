//! Named inputs: the embedded karate club network and files found on the
//! `SCORE_DATA_DIR` search path.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::graph::{load_edge_list, Graph, GroundTruth, LoadSummary};

/// Environment variable holding extra directories to search for inputs.
pub const DATA_DIR_VAR: &str = "SCORE_DATA_DIR";

const BUILTIN_PREFIX: &str = "builtin:";

const KARATE_EDGES: &str = include_str!("../data/karate.edges");
const KARATE_LABELS: &str = include_str!("../data/karate.labels");

pub const BUILTIN_NAMES: [&str; 1] = ["karate"];

fn builtin(name: &str) -> Result<(&'static str, &'static str)> {
    match name {
        "karate" => Ok((KARATE_EDGES, KARATE_LABELS)),
        other => Err(Error::Argument(format!(
            "unknown builtin dataset `{other}`; available: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// `path` itself if it exists, else the first `dir/path` for `dir` on the
/// `SCORE_DATA_DIR` search path.
pub fn find_data_file(path: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(path);
    if direct.is_file() {
        return Ok(direct);
    }
    if direct.is_relative() {
        if let Some(dirs) = std::env::var_os(DATA_DIR_VAR) {
            for dir in std::env::split_paths(&dirs) {
                let candidate = dir.join(path);
                if candidate.is_file() {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(Error::Data(format!(
        "input `{path}` not found (also searched {DATA_DIR_VAR})"
    )))
}

fn open(spec: &str, pick_labels: bool) -> Result<Box<dyn BufRead>> {
    if let Some(name) = spec.strip_prefix(BUILTIN_PREFIX) {
        let (edges, labels) = builtin(name)?;
        let text = if pick_labels { labels } else { edges };
        return Ok(Box::new(text.as_bytes()));
    }
    Ok(Box::new(BufReader::new(File::open(find_data_file(spec)?)?)))
}

/// Loads an edge list given as `builtin:<name>` or a path.
pub fn load_graph(spec: &str, directed_collapse: bool) -> Result<(Graph, LoadSummary)> {
    load_edge_list(open(spec, false)?, directed_collapse)
}

/// Loads community labels given as `builtin:<name>` or a path.
pub fn load_labels(spec: &str) -> Result<GroundTruth> {
    GroundTruth::parse(open(spec, true)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn karate_is_embedded() {
        let (g, summary) = load_graph("builtin:karate", false).unwrap();
        assert_eq!(g.node_count(), 34);
        assert_eq!(g.edge_count(), 78);
        assert_eq!(summary.duplicates_merged, 0);
        assert!(g.is_connected());
        let truth = load_labels("builtin:karate").unwrap();
        let labels = truth.align(&g).unwrap();
        let mut sizes = labels.community_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![17, 17]);
    }

    #[test]
    fn missing_inputs() {
        assert!(matches!(
            load_graph("builtin:nope", false),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            load_graph("/no/such/file.edges", false),
            Err(Error::Data(_))
        ));
    }
}
