//! Undirected simple graphs stored as compressed sparse rows.
//!
//! Nodes are dense indices `0..n`; every index keeps the token it had in the
//! source file so results can be reported against the original labels.

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;

use crate::cluster::Labeling;
use crate::error::{Error, Result};

/// Undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    original_ids: Vec<String>,
}

/// Node degrees `d(i) = sum_j X(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(Vec<usize>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn min(&self) -> Option<usize> {
        self.0.iter().copied().min()
    }
}

impl Graph {
    /// Builds a graph from an edge iterator. Self-loops are dropped and
    /// repeated pairs (in either orientation) collapse to one edge.
    pub fn from_edges<I>(original_ids: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = original_ids.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Argument(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self::from_adjacency_lists(original_ids, adj))
    }

    /// Graph on nodes labelled `0..n` by their index.
    pub fn with_index_ids<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    fn from_adjacency_lists(original_ids: Vec<String>, mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        Graph {
            offsets,
            neighbors,
            original_ids,
        }
    }

    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.original_ids.is_empty()
    }

    /// Sorted neighbor list of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector((0..self.node_count()).map(|i| self.degree(i)).collect())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn original_id(&self, i: usize) -> &str {
        &self.original_ids[i]
    }

    pub fn original_ids(&self) -> &[String] {
        &self.original_ids
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// `y = X x` for the 0/1 adjacency matrix `X`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.neighbors(i).iter().map(|&j| x[j]).sum();
        }
    }

    /// Subgraph induced by `keep`, re-indexed in the order given.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Graph {
        let mut new_index = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let adj = keep
            .iter()
            .map(|&old| {
                self.neighbors(old)
                    .iter()
                    .filter_map(|&j| (new_index[j] != usize::MAX).then_some(new_index[j]))
                    .collect()
            })
            .collect();
        let ids = keep
            .iter()
            .map(|&old| self.original_ids[old].clone())
            .collect();
        Self::from_adjacency_lists(ids, adj)
    }

    /// Component id for every node; components are numbered in order of
    /// their smallest node index.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let n = self.node_count();
        let mut component = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            component[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if component[v] == usize::MAX {
                        component[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (count, component)
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().0 <= 1
    }
}

/// What `load_edge_list` saw while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub lines_read: usize,
    pub self_loops_dropped: usize,
    /// Pairs listed more than once in the same orientation (or in either
    /// orientation when the input is read as undirected).
    pub duplicates_merged: usize,
    /// Arcs whose reverse arc was also present; only counted for directed input.
    pub reciprocal_arcs_merged: usize,
}

/// Reads a whitespace-separated edge list.
///
/// Lines starting with `#` or `%` and blank lines are ignored. Node tokens
/// are arbitrary strings and get dense indices by first appearance. With
/// `directed_collapse` each line is an arc `u -> v`, and an arc together with
/// its reverse collapses to one undirected edge; either way the result is an
/// undirected simple graph.
pub fn load_edge_list<R: BufRead>(
    source: R,
    directed_collapse: bool,
) -> Result<(Graph, LoadSummary)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut arcs: Vec<(usize, usize)> = Vec::new();
    let mut summary = LoadSummary::default();

    let mut intern = |token: &str, ids: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(token) {
            return i;
        }
        let i = ids.len();
        ids.push(token.to_owned());
        index.insert(token.to_owned(), i);
        i
    };

    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected two node tokens, found {}", tokens.len()),
            });
        }
        summary.lines_read += 1;
        let u = intern(tokens[0], &mut ids);
        let v = intern(tokens[1], &mut ids);
        if u == v {
            summary.self_loops_dropped += 1;
            continue;
        }
        arcs.push((u, v));
    }
    if summary.lines_read == 0 {
        return Err(Error::Data("edge list is empty".into()));
    }

    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(arcs.len());
    for &(u, v) in &arcs {
        let key = if directed_collapse {
            (u, v)
        } else {
            (u.min(v), u.max(v))
        };
        if !seen.insert(key) {
            summary.duplicates_merged += 1;
            continue;
        }
        if directed_collapse && seen.contains(&(v, u)) {
            summary.reciprocal_arcs_merged += 1;
            continue;
        }
        edges.push((u, v));
    }
    let graph = Graph::from_edges(ids, edges)?;
    Ok((graph, summary))
}

/// Restricts `g` to its largest connected component.
///
/// Returns the component and, for each of its nodes, the index the node had
/// in `g`. Ties between equally large components go to the one holding the
/// smallest node index, i.e. the earliest-appearing source token.
pub fn giant_component(g: &Graph) -> (Graph, Vec<usize>) {
    let (count, component) = g.connected_components();
    if count <= 1 {
        return (g.clone(), (0..g.node_count()).collect());
    }
    let mut sizes = vec![0usize; count];
    for &c in &component {
        sizes[c] += 1;
    }
    // components are numbered by their smallest member, so the first
    // maximum is the tie-break winner
    let best = sizes
        .iter()
        .enumerate()
        .fold(0, |best, (c, &s)| if s > sizes[best] { c } else { best });
    let keep: Vec<usize> = (0..g.node_count())
        .filter(|&i| component[i] == best)
        .collect();
    (g.induced_subgraph(&keep), keep)
}

/// Drops every node of degree zero.
pub fn remove_isolated(g: &Graph) -> Result<(Graph, Vec<usize>)> {
    let keep: Vec<usize> = (0..g.node_count()).filter(|&i| g.degree(i) > 0).collect();
    if keep.is_empty() {
        return Err(Error::Data("empty graph after preprocessing".into()));
    }
    if keep.len() == g.node_count() {
        return Ok((g.clone(), keep));
    }
    Ok((g.induced_subgraph(&keep), keep))
}

/// Community labels read from a `node_token label_token` file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    by_node: HashMap<String, usize>,
    /// Label tokens in order of first appearance; label `k` is `names[k]`.
    pub names: Vec<String>,
}

impl GroundTruth {
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut by_node = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected `node label`, found {} tokens", tokens.len()),
                });
            }
            let label = match names.iter().position(|n| n == tokens[1]) {
                Some(k) => k,
                None => {
                    names.push(tokens[1].to_owned());
                    names.len() - 1
                }
            };
            if by_node.insert(tokens[0].to_owned(), label).is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("node `{}` labelled twice", tokens[0]),
                });
            }
        }
        if by_node.is_empty() {
            return Err(Error::Data("label file is empty".into()));
        }
        Ok(GroundTruth { by_node, names })
    }

    pub fn community_count(&self) -> usize {
        self.names.len()
    }

    pub fn label_of(&self, token: &str) -> Option<usize> {
        self.by_node.get(token).copied()
    }

    /// `(node token, label)` pairs sorted by token.
    pub fn entries(&self) -> Vec<(&str, usize)> {
        let mut out: Vec<(&str, usize)> =
            self.by_node.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        out.sort_unstable();
        out
    }

    /// Labels for the nodes of `g`, in `g`'s index order.
    pub fn align(&self, g: &Graph) -> Result<Labeling> {
        let labels = g
            .original_ids()
            .iter()
            .map(|id| {
                self.label_of(id)
                    .ok_or_else(|| Error::Data(format!("node `{id}` has no ground-truth label")))
            })
            .collect::<Result<Vec<_>>>()?;
        Labeling::new(labels, self.community_count())
    }
}
