//! Dense undirected graphs, cluster assignments and the indicator matrices
//! built from them.

use std::io::{BufRead, Write};

use faer::Mat;

use crate::error::{Error, Result};

/// Undirected, unweighted graph stored as a dense symmetric 0/1 matrix.
///
/// Similarity graphs never carry self-loops; representation graphs may.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<u8>,
    allows_self_loops: bool,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n_nodes", &self.n_nodes)
            .field("n_edges", &self.n_edges())
            .field("allows_self_loops", &self.allows_self_loops)
            .finish()
    }
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(n_nodes: usize, allows_self_loops: bool) -> Self {
        Self {
            n_nodes,
            adjacency: vec![0; n_nodes * n_nodes],
            allows_self_loops,
        }
    }

    /// Builds a graph by evaluating `edge(i, j)` for `i <= j` (or `i < j` when
    /// self-loops are not allowed) and mirroring the result.
    pub fn from_fn(
        n_nodes: usize,
        allows_self_loops: bool,
        mut edge: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let mut g = Self::empty(n_nodes, allows_self_loops);
        for i in 0..n_nodes {
            let start = if allows_self_loops { i } else { i + 1 };
            for j in start..n_nodes {
                if edge(i, j) {
                    g.set(i, j);
                }
            }
        }
        g
    }

    /// Builds a graph from 0-based undirected edges. Duplicates are merged.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        allows_self_loops: bool,
    ) -> Result<Self> {
        let mut g = Self::empty(n_nodes, allows_self_loops);
        for (i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::config(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j && !allows_self_loops {
                return Err(Error::config(format!("self-loop on node {i} not allowed")));
            }
            g.set(i, j);
        }
        Ok(g)
    }

    /// Builds a graph from a row-major dense 0/1 matrix, validating symmetry.
    pub fn from_dense(n_nodes: usize, adjacency: Vec<u8>, allows_self_loops: bool) -> Result<Self> {
        if adjacency.len() != n_nodes * n_nodes {
            return Err(Error::config("adjacency length is not n_nodes^2"));
        }
        for i in 0..n_nodes {
            for j in 0..n_nodes {
                let a = adjacency[i * n_nodes + j];
                if a > 1 {
                    return Err(Error::config(format!("entry ({i}, {j}) is not 0 or 1")));
                }
                if a != adjacency[j * n_nodes + i] {
                    return Err(Error::config(format!(
                        "adjacency not symmetric at ({i}, {j})"
                    )));
                }
            }
            if !allows_self_loops && adjacency[i * n_nodes + i] != 0 {
                return Err(Error::config(format!("self-loop on node {i} not allowed")));
            }
        }
        Ok(Self {
            n_nodes,
            adjacency,
            allows_self_loops,
        })
    }

    fn set(&mut self, i: usize, j: usize) {
        let n = self.n_nodes;
        self.adjacency[i * n + j] = 1;
        self.adjacency[j * n + i] = 1;
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn allows_self_loops(&self) -> bool {
        self.allows_self_loops
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_nodes + j] == 1
    }

    /// Row `i` of the adjacency matrix.
    pub fn row(&self, i: usize) -> &[u8] {
        &self.adjacency[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    /// Neighbors of `i`, including `i` itself when it has a self-loop.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &a)| (a == 1).then_some(j))
    }

    /// Row sum of the adjacency matrix (a self-loop counts once).
    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|&a| a as usize).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_nodes).map(|i| self.degree(i)).collect()
    }

    /// Number of undirected edges, self-loops included.
    pub fn n_edges(&self) -> usize {
        let n = self.n_nodes;
        let mut count = 0;
        for i in 0..n {
            for j in i..n {
                count += self.adjacency[i * n + j] as usize;
            }
        }
        count
    }

    /// Undirected edges `(i, j)` with `i <= j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                if self.adjacency[i * n + j] == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Same edges, with self-loops removed.
    pub fn without_self_loops(&self) -> Graph {
        let mut g = self.clone();
        g.allows_self_loops = false;
        for i in 0..self.n_nodes {
            g.adjacency[i * self.n_nodes + i] = 0;
        }
        g
    }

    /// Same edges, with every self-loop present.
    pub fn with_self_loops(&self) -> Graph {
        let mut g = self.clone();
        g.allows_self_loops = true;
        for i in 0..self.n_nodes {
            g.adjacency[i * self.n_nodes + i] = 1;
        }
        g
    }

    /// Relabels nodes: node `i` of the result is node `order[i]` of `self`.
    pub fn permute_nodes(&self, order: &[usize]) -> Graph {
        Graph::from_fn(self.n_nodes, self.allows_self_loops, |i, j| {
            self.has_edge(order[i], order[j])
        })
    }

    pub fn to_matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.n_nodes, self.n_nodes, |i, j| {
            self.adjacency[i * self.n_nodes + j] as f64
        })
    }

    /// Reads the edge-list text format: one `i j` pair per line, 1-based ids,
    /// `#` starts a comment line. When `n_nodes` is `None` the count comes
    /// from a `# nodes N` header if present, else from the largest id seen.
    pub fn read_edge_list(
        reader: impl BufRead,
        n_nodes: Option<usize>,
        allows_self_loops: bool,
    ) -> Result<Graph> {
        let mut header_nodes = None;
        let mut edges = Vec::new();
        let mut max_id = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("nodes") {
                    if let Some(Ok(n)) = parts.next().map(str::parse::<usize>) {
                        header_nodes = Some(n);
                    }
                }
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected two node ids, got {trimmed:?}"),
                });
            };
            let parse = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(0) | Err(_) => Err(Error::Parse {
                        line: lineno,
                        message: format!("invalid 1-based node id {s:?}"),
                    }),
                    Ok(v) => Ok(v),
                }
            };
            let (i, j) = (parse(a)?, parse(b)?);
            if i == j && !allows_self_loops {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("self-loop on node {i} not allowed in a similarity graph"),
                });
            }
            max_id = max_id.max(i).max(j);
            edges.push((i - 1, j - 1));
        }
        let n = n_nodes.or(header_nodes).unwrap_or(max_id);
        if max_id > n {
            return Err(Error::config(format!(
                "edge list references node {max_id} but graph has {n} nodes"
            )));
        }
        Graph::from_edges(n, edges, allows_self_loops)
    }

    /// Writes the edge-list text format with a `# nodes N` header.
    pub fn write_edge_list(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# nodes {}", self.n_nodes)?;
        for (i, j) in self.edges() {
            writeln!(w, "{} {}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

/// Anything that can be viewed as a dense symmetric adjacency matrix: a
/// [`Graph`], or a real-valued matrix such as an expected adjacency or a
/// low-rank approximation.
pub trait Adjacency {
    fn n_nodes(&self) -> usize;
    fn to_dense(&self) -> Mat<f64>;
}

impl Adjacency for Graph {
    fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    fn to_dense(&self) -> Mat<f64> {
        self.to_matrix()
    }
}

impl Adjacency for Mat<f64> {
    fn n_nodes(&self) -> usize {
        self.nrows()
    }
    fn to_dense(&self) -> Mat<f64> {
        self.clone()
    }
}

impl<T: Adjacency + ?Sized> Adjacency for &T {
    fn n_nodes(&self) -> usize {
        (**self).n_nodes()
    }
    fn to_dense(&self) -> Mat<f64> {
        (**self).to_dense()
    }
}

/// Map from nodes to clusters. Labels are 0-based internally; use
/// [`ClusterAssignment::from_one_based`] and
/// [`ClusterAssignment::to_one_based`] at file boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl ClusterAssignment {
    /// Empty clusters are allowed here; they are rejected when a matrix
    /// that needs them is built.
    pub fn new(labels: Vec<usize>, n_clusters: usize) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::config("n_clusters must be positive"));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_clusters) {
            return Err(Error::config(format!(
                "node {i} has label {l}, expected < {n_clusters}"
            )));
        }
        Ok(Self { labels, n_clusters })
    }

    pub fn from_one_based(labels: &[usize], n_clusters: usize) -> Result<Self> {
        let zero_based = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                l.checked_sub(1)
                    .ok_or_else(|| Error::config(format!("node {} has label 0", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based, n_clusters)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    /// Equal contiguous blocks: node `i` belongs to cluster `i / (N / K)`.
    pub fn ground_truth(n_nodes: usize, n_clusters: usize) -> Result<Self> {
        if n_clusters < 2 {
            return Err(Error::config("ground truth needs at least 2 clusters"));
        }
        if n_nodes == 0 || !n_nodes.is_multiple_of(n_clusters) {
            return Err(Error::config(format!(
                "n_clusters = {n_clusters} does not divide n_nodes = {n_nodes}"
            )));
        }
        let block = n_nodes / n_clusters;
        Ok(Self {
            labels: (0..n_nodes).map(|i| i / block).collect(),
            n_clusters,
        })
    }

    /// Round-robin assignment `i mod K`.
    pub fn interleaved(n_nodes: usize, n_clusters: usize) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::config("n_clusters must be positive"));
        }
        Ok(Self {
            labels: (0..n_nodes).map(|i| i % n_clusters).collect(),
            n_clusters,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == cluster).then_some(i))
            .collect()
    }

    /// Applies a cluster relabeling: old label `l` becomes `perm[l]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_clusters {
            return Err(Error::config("relabeling has wrong length"));
        }
        Self::new(
            self.labels.iter().map(|&l| perm[l]).collect(),
            self.n_clusters,
        )
    }

    /// Node `i` of the result carries the label of node `order[i]`.
    pub fn permute_nodes(&self, order: &[usize]) -> Self {
        Self {
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            n_clusters: self.n_clusters,
        }
    }

    fn first_empty(&self) -> Option<usize> {
        self.cluster_sizes().iter().position(|&s| s == 0)
    }

    /// One-hot N×K matrix Θ.
    pub fn indicator_matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.n_nodes(), self.n_clusters, |i, k| {
            if self.labels[i] == k {
                1.0
            } else {
                0.0
            }
        })
    }

    /// H with `1/sqrt(|C_k|)` on memberships, so that `HᵀH = I`.
    pub fn h_matrix(&self) -> Result<Mat<f64>> {
        if let Some(cluster) = self.first_empty() {
            return Err(Error::DegenerateCluster {
                cluster,
                reason: "empty cluster",
            });
        }
        let scale: Vec<f64> = self
            .cluster_sizes()
            .iter()
            .map(|&s| 1.0 / (s as f64).sqrt())
            .collect();
        Ok(Mat::from_fn(self.n_nodes(), self.n_clusters, |i, k| {
            if self.labels[i] == k {
                scale[k]
            } else {
                0.0
            }
        }))
    }

    /// T with `1/sqrt(Vol(C_k))` on memberships, so that `TᵀDT = I`.
    pub fn t_matrix(&self, degrees: &[f64]) -> Result<Mat<f64>> {
        if degrees.len() != self.n_nodes() {
            return Err(Error::config(
                "degree vector length does not match assignment",
            ));
        }
        let volumes = self.volumes(degrees);
        if let Some(cluster) = volumes.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateCluster {
                cluster,
                reason: "zero volume",
            });
        }
        Ok(Mat::from_fn(self.n_nodes(), self.n_clusters, |i, k| {
            if self.labels[i] == k {
                1.0 / volumes[k].sqrt()
            } else {
                0.0
            }
        }))
    }

    /// Sum of `degrees` over each cluster.
    pub fn volumes(&self, degrees: &[f64]) -> Vec<f64> {
        let mut vol = vec![0.0; self.n_clusters];
        for (&l, &d) in self.labels.iter().zip(degrees) {
            vol[l] += d;
        }
        vol
    }

    /// Reads one 1-based label per line (blank and `#` lines skipped).
    /// When `n_clusters` is `None`, the largest label is used.
    pub fn read_labels(reader: impl BufRead, n_clusters: Option<usize>) -> Result<Self> {
        let mut labels = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let l: usize = t.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid label {t:?}"),
            })?;
            labels.push(l);
        }
        let k = n_clusters.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(1));
        Self::from_one_based(&labels, k)
    }

    pub fn write_labels(&self, mut w: impl Write) -> Result<()> {
        for l in self.to_one_based() {
            writeln!(w, "{l}")?;
        }
        Ok(())
    }
}
