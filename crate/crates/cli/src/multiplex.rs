//! Multiplex network ingestion.
//!
//! Input is one weighted pair per line, `layer i j w`, with 1-based layer and
//! node ids and `#` comments. Each line is an undirected pair; repeated pairs
//! within a layer have their weights summed. Every layer is reduced to a kNN
//! graph (each node keeps its `knn` heaviest neighbors, ties to the lower id),
//! symmetrized by union, and the layers in a range are OR-ed together.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::PathBuf;

use serde::Deserialize;

use repsc::{Error, Graph, Result};

fn default_knn() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MultiplexSpec {
    pub path: PathBuf,
    /// Node count; defaults to the largest id in the file.
    pub n_nodes: Option<usize>,
    /// Inclusive 1-based layer range building the representation graph.
    pub representation_layers: [usize; 2],
    /// Inclusive 1-based layer range building the similarity graph.
    pub similarity_layers: [usize; 2],
    #[serde(default = "default_knn")]
    pub knn: usize,
}

impl MultiplexSpec {
    pub fn validate(&self) -> Result<()> {
        if self.knn == 0 {
            return Err(Error::config("multiplex.knn: must be at least 1"));
        }
        for (name, [lo, hi]) in [
            ("representation_layers", self.representation_layers),
            ("similarity_layers", self.similarity_layers),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::config(format!(
                    "multiplex.{name}: [{lo}, {hi}] is not a 1-based inclusive range"
                )));
            }
        }
        let [a, b] = self.representation_layers;
        let [c, d] = self.similarity_layers;
        if a <= d && c <= b {
            return Err(Error::config(
                "multiplex: representation_layers and similarity_layers overlap",
            ));
        }
        Ok(())
    }
}

/// Weighted layers keyed by 1-based layer id; pairs are 0-based with `i < j`.
#[derive(Clone, Debug, Default)]
pub struct MultiplexData {
    pub n_nodes: usize,
    pub layers: BTreeMap<usize, BTreeMap<(usize, usize), f64>>,
}

pub fn parse_multiplex(reader: impl BufRead) -> Result<MultiplexData> {
    let mut data = MultiplexData::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected `layer i j w`, found {} fields",
                fields.len()
            )));
        }
        let id = |s: &str, what: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err(format!("{what} {s:?} is not a positive integer"))),
            }
        };
        let layer = id(fields[0], "layer")?;
        let i = id(fields[1], "node id")?;
        let j = id(fields[2], "node id")?;
        let w: f64 = fields[3]
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| parse_err(format!("weight {:?} is not a finite number", fields[3])))?;
        data.n_nodes = data.n_nodes.max(i).max(j);
        if i == j {
            continue;
        }
        let key = (i.min(j) - 1, i.max(j) - 1);
        *data
            .layers
            .entry(layer)
            .or_default()
            .entry(key)
            .or_insert(0.0) += w;
    }
    Ok(data)
}

/// Undirected kNN graph of one weighted layer.
pub fn knn_graph(n_nodes: usize, pairs: &BTreeMap<(usize, usize), f64>, knn: usize) -> Graph {
    let mut candidates: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n_nodes];
    for (&(i, j), &w) in pairs {
        candidates[i].push((w, j));
        candidates[j].push((w, i));
    }
    let mut edges = Vec::new();
    for (i, list) in candidates.iter_mut().enumerate() {
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        edges.extend(list.iter().take(knn).map(|&(_, j)| (i, j)));
    }
    Graph::from_edges(n_nodes, edges, false).expect("kNN edges are in range and loop-free")
}

fn union_of_layers(
    data: &MultiplexData,
    n_nodes: usize,
    [lo, hi]: [usize; 2],
    knn: usize,
) -> Graph {
    let mut adjacency = vec![0u8; n_nodes * n_nodes];
    for layer in lo..=hi {
        let Some(pairs) = data.layers.get(&layer).filter(|p| !p.is_empty()) else {
            log::warn!("layer {layer} has no edges; treating it as edgeless");
            continue;
        };
        let g = knn_graph(n_nodes, pairs, knn);
        for i in 0..n_nodes {
            for j in g.neighbors(i) {
                adjacency[i * n_nodes + j] = 1;
            }
        }
    }
    Graph::from_dense(n_nodes, adjacency, false).expect("union of simple graphs is simple")
}

/// Representation graph (with self-loops) and similarity graph from parsed
/// multiplex data.
pub fn build_multiplex(data: &MultiplexData, spec: &MultiplexSpec) -> Result<(Graph, Graph)> {
    spec.validate()?;
    let n = spec.n_nodes.unwrap_or(data.n_nodes);
    if n < data.n_nodes {
        return Err(Error::config(format!(
            "multiplex.n_nodes = {n} but the file mentions node {}",
            data.n_nodes
        )));
    }
    if n == 0 {
        return Err(Error::config("multiplex data contains no nodes"));
    }
    let representation =
        union_of_layers(data, n, spec.representation_layers, spec.knn).with_self_loops();
    let similarity = union_of_layers(data, n, spec.similarity_layers, spec.knn);
    Ok((representation, similarity))
}

pub fn ingest_multiplex(spec: &MultiplexSpec) -> Result<(Graph, Graph)> {
    spec.validate()?;
    let file = std::fs::File::open(&spec.path)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", spec.path.display())))?;
    let data = parse_multiplex(std::io::BufReader::new(file))?;
    build_multiplex(&data, spec)
}
