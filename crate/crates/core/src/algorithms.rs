//! Spectral clustering pipelines: unnormalized and normalized spectral
//! clustering, their representation-aware counterparts (URepSC / NRepSC),
//! the low-rank approximate variants and the fair-SC baseline that first
//! discovers protected groups in the representation graph.

use std::collections::BTreeMap;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, ClusterAssignment, Graph};
use crate::kmeans::{self, KMeansConfig};
use crate::rsbm::block_diagonal_representation;
use crate::spectral::{self, NullSpaceBasis};

/// Eigenvalue differences below this are reported as a degenerate eigengap.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Largest acceptable `|R (I - 11ᵀ/N) H|` entry for unit-norm columns.
pub const CONSTRAINT_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ClusteringOutput {
    pub assignment: ClusterAssignment,
    /// N × K rows that were handed to k-means.
    pub embedding: Mat<f64>,
    /// The K eigenvalues behind the embedding, ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigengap`, `inertia`, `constraint_residual`, `null_dim`, ...
    pub diagnostics: BTreeMap<String, f64>,
}

impl ClusteringOutput {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.get(name).copied()
    }

    pub fn eigengap(&self) -> Option<f64> {
        self.diagnostic("eigengap")
    }

    pub fn constraint_residual(&self) -> Option<f64> {
        self.diagnostic("constraint_residual")
    }
}

/// A representation matrix (binary or low-rank real) with the null-space
/// basis of its constraint operator. Building one costs a full SVD, so it is
/// worth reusing across similarity graphs that share a representation graph.
#[derive(Clone, Debug)]
pub struct RepresentationConstraint {
    matrix: Mat<f64>,
    basis: NullSpaceBasis,
}

impl RepresentationConstraint {
    pub fn new(representation: &impl Adjacency) -> Result<Self> {
        let matrix = representation.to_dense();
        let basis = spectral::constraint_null_basis(&matrix)?;
        Ok(Self { matrix, basis })
    }

    /// Constraint built from the best rank-`rank` approximation of R.
    pub fn low_rank(representation: &impl Adjacency, rank: usize) -> Result<Self> {
        let approx = spectral::low_rank_approximation(representation, rank)?;
        Self::new(&approx)
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn basis(&self) -> &NullSpaceBasis {
        &self.basis
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn null_dim(&self) -> usize {
        self.basis.dim()
    }

    fn check_feasible(&self, n_clusters: usize) -> Result<()> {
        if self.null_dim() < n_clusters {
            return Err(Error::RankInfeasible {
                null_dim: self.null_dim(),
                n_clusters,
            });
        }
        Ok(())
    }
}

fn check_problem(n_nodes: usize, n_clusters: usize) -> Result<()> {
    if n_clusters < 2 {
        return Err(Error::config(format!(
            "need K >= 2 clusters, got {n_clusters}"
        )));
    }
    if n_nodes < n_clusters {
        return Err(Error::config(format!(
            "cannot split {n_nodes} nodes into {n_clusters} clusters"
        )));
    }
    Ok(())
}

/// Shared tail of every pipeline: eigen-solve, embed, k-means, diagnostics.
struct Spectrum {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

fn spectrum(m: &Mat<f64>) -> Result<Spectrum> {
    let eig = spectral::symmetric_eigen(spectral::symmetrize(m).as_ref())?;
    Ok(Spectrum {
        values: eig.values,
        vectors: eig.vectors,
    })
}

fn finish(
    embedding: Mat<f64>,
    kmeans_input: MatRef<'_, f64>,
    values: &[f64],
    k: usize,
    config: &KMeansConfig,
    mut diagnostics: BTreeMap<String, f64>,
) -> Result<ClusteringOutput> {
    let result = kmeans::kmeans(kmeans_input, &config.with_clusters(k))?;
    diagnostics.insert("inertia".into(), result.inertia);
    if values.len() > k {
        let gap = values[k] - values[k - 1];
        diagnostics.insert("eigengap".into(), gap);
        if gap.abs() < DEGENERATE_GAP {
            log::warn!("eigengap between eigenvalues {k} and {} is {gap:e}", k + 1);
            diagnostics.insert("eigengap_degenerate".into(), 1.0);
        }
    }
    Ok(ClusteringOutput {
        assignment: result.assignment,
        embedding,
        eigenvalues: values[..k].to_vec(),
        diagnostics,
    })
}

/// Unnormalized spectral clustering: k-means on the K smallest eigenvectors
/// of `L = D - A`.
pub fn unnormalized_sc(
    similarity: &impl Adjacency,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    let bundle = spectral::laplacian(similarity);
    let spec = spectrum(&bundle.laplacian)?;
    let embedding = spec.vectors.subcols(0, n_clusters).to_owned();
    finish(
        embedding.clone(),
        embedding.as_ref(),
        &spec.values,
        n_clusters,
        config,
        BTreeMap::new(),
    )
}

/// Normalized spectral clustering: K smallest eigenvectors of
/// `I - D^{-1/2} A D^{-1/2}`, rows scaled to unit length, then k-means.
pub fn normalized_sc(
    similarity: &impl Adjacency,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    let bundle = spectral::laplacian(similarity);
    let Some(l_norm) = bundle.normalized.as_ref() else {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: bundle.min_degree(),
        });
    };
    let spec = spectrum(l_norm)?;
    let rows = kmeans::normalize_rows(spec.vectors.subcols(0, n_clusters));
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("zero_rows".into(), rows.zero_rows as f64);
    finish(
        rows.rows.clone(),
        rows.rows.as_ref(),
        &spec.values,
        n_clusters,
        config,
        diagnostics,
    )
}

fn constraint_diagnostics(
    constraint: &RepresentationConstraint,
    embedding: MatRef<'_, f64>,
) -> BTreeMap<String, f64> {
    // residual measured on unit-norm columns
    let unit = Mat::from_fn(embedding.nrows(), embedding.ncols(), |i, k| {
        let norm = (0..embedding.nrows())
            .map(|r| embedding[(r, k)].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            embedding[(i, k)] / norm
        } else {
            0.0
        }
    });
    let residual = spectral::constraint_residual(constraint.matrix(), unit.as_ref());
    if residual >= CONSTRAINT_RESIDUAL_LIMIT {
        log::warn!("constraint residual {residual:e} exceeds {CONSTRAINT_RESIDUAL_LIMIT:e}");
    }
    let mut d = BTreeMap::new();
    d.insert("constraint_residual".into(), residual);
    d.insert("null_dim".into(), constraint.null_dim() as f64);
    d.insert(
        "constraint_rank".into(),
        constraint.basis().rank_constraint as f64,
    );
    d
}

/// URepSC with a precomputed constraint.
pub fn urepsc_with(
    similarity: &impl Adjacency,
    constraint: &RepresentationConstraint,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    let n = similarity.n_nodes();
    check_problem(n, n_clusters)?;
    if constraint.n_nodes() != n {
        return Err(Error::config(
            "representation and similarity graphs differ in size",
        ));
    }
    constraint.check_feasible(n_clusters)?;
    let y = &constraint.basis().basis;
    let bundle = spectral::laplacian(similarity);
    let ly = &bundle.laplacian * y;
    let reduced = y.transpose() * &ly;
    let spec = spectrum(&reduced)?;
    let embedding = y * spec.vectors.subcols(0, n_clusters);
    let diagnostics = constraint_diagnostics(constraint, embedding.as_ref());
    finish(
        embedding.clone(),
        embedding.as_ref(),
        &spec.values,
        n_clusters,
        config,
        diagnostics,
    )
}

/// NRepSC with a precomputed constraint.
pub fn nrepsc_with(
    similarity: &impl Adjacency,
    constraint: &RepresentationConstraint,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    let n = similarity.n_nodes();
    check_problem(n, n_clusters)?;
    if constraint.n_nodes() != n {
        return Err(Error::config(
            "representation and similarity graphs differ in size",
        ));
    }
    constraint.check_feasible(n_clusters)?;
    let bundle = spectral::laplacian(similarity);
    let min_degree = bundle.min_degree();
    if min_degree <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_degree,
        });
    }
    let y = &constraint.basis().basis;
    let dy = Mat::from_fn(n, y.ncols(), |i, k| bundle.degree[i] * y[(i, k)]);
    let ydy = spectral::symmetrize(&(y.transpose() * &dy));
    let q = spectral::spd_sqrt(ydy.as_ref())?;
    let ly = &bundle.laplacian * y;
    let reduced = &q.inv_sqrt * (y.transpose() * &ly) * &q.inv_sqrt;
    let spec = spectrum(&reduced)?;
    let embedding = y * (&q.inv_sqrt * spec.vectors.subcols(0, n_clusters));
    let diagnostics = constraint_diagnostics(constraint, embedding.as_ref());
    finish(
        embedding.clone(),
        embedding.as_ref(),
        &spec.values,
        n_clusters,
        config,
        diagnostics,
    )
}

/// Unnormalized representation-aware spectral clustering.
pub fn urepsc(
    similarity: &impl Adjacency,
    representation: &impl Adjacency,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    urepsc_with(
        similarity,
        &RepresentationConstraint::new(representation)?,
        n_clusters,
        config,
    )
}

/// Normalized representation-aware spectral clustering.
pub fn nrepsc(
    similarity: &impl Adjacency,
    representation: &impl Adjacency,
    n_clusters: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    nrepsc_with(
        similarity,
        &RepresentationConstraint::new(representation)?,
        n_clusters,
        config,
    )
}

fn check_rank(n_nodes: usize, n_clusters: usize, rank: usize) -> Result<()> {
    if rank == 0 || rank + n_clusters > n_nodes {
        return Err(Error::config(format!(
            "approximation rank {rank} must lie in 1..={}",
            n_nodes.saturating_sub(n_clusters)
        )));
    }
    Ok(())
}

/// URepSC with R replaced by its best rank-`rank` approximation.
pub fn urepsc_approx(
    similarity: &impl Adjacency,
    representation: &impl Adjacency,
    n_clusters: usize,
    rank: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    check_rank(similarity.n_nodes(), n_clusters, rank)?;
    let constraint = RepresentationConstraint::low_rank(representation, rank)?;
    urepsc_with(similarity, &constraint, n_clusters, config)
}

/// NRepSC with R replaced by its best rank-`rank` approximation.
pub fn nrepsc_approx(
    similarity: &impl Adjacency,
    representation: &impl Adjacency,
    n_clusters: usize,
    rank: usize,
    config: &KMeansConfig,
) -> Result<ClusteringOutput> {
    check_problem(similarity.n_nodes(), n_clusters)?;
    check_rank(similarity.n_nodes(), n_clusters, rank)?;
    let constraint = RepresentationConstraint::low_rank(representation, rank)?;
    nrepsc_with(similarity, &constraint, n_clusters, config)
}

/// Protected groups recovered by unnormalized spectral clustering of R.
pub fn discover_groups(
    representation: &Graph,
    n_groups: usize,
    config: &KMeansConfig,
) -> Result<ClusterAssignment> {
    Ok(unnormalized_sc(&representation.without_self_loops(), n_groups, config)?.assignment)
}

/// Fair spectral clustering baseline: discover `n_groups` protected groups in
/// R, then run URepSC (or NRepSC when `normalized`) with the block-diagonal
/// representation graph of those groups.
pub fn fairsc_baseline(
    similarity: &impl Adjacency,
    representation: &Graph,
    n_clusters: usize,
    n_groups: usize,
    config: &KMeansConfig,
    normalized: bool,
) -> Result<ClusteringOutput> {
    if n_groups < 2 {
        return Err(Error::config(format!(
            "need at least 2 protected groups, got {n_groups}"
        )));
    }
    let groups = discover_groups(representation, n_groups, config)?;
    fairsc_with_groups(similarity, &groups, n_clusters, config, normalized)
}

/// Fair spectral clustering with known protected groups.
pub fn fairsc_with_groups(
    similarity: &impl Adjacency,
    groups: &ClusterAssignment,
    n_clusters: usize,
    config: &KMeansConfig,
    normalized: bool,
) -> Result<ClusteringOutput> {
    let constraint = RepresentationConstraint::new(&block_diagonal_representation(groups))?;
    if normalized {
        nrepsc_with(similarity, &constraint, n_clusters, config)
    } else {
        urepsc_with(similarity, &constraint, n_clusters, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::misclustering;

    fn cliques(sizes: &[usize]) -> (Graph, ClusterAssignment) {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect();
        let n = labels.len();
        let truth = ClusterAssignment::new(labels.clone(), sizes.len()).unwrap();
        (
            Graph::from_fn(n, false, |i, j| labels[i] == labels[j]),
            truth,
        )
    }

    #[test]
    fn disjoint_cliques_are_recovered() {
        let (g, truth) = cliques(&[5, 5]);
        let cfg = KMeansConfig::new(2, 0);
        for out in [
            unnormalized_sc(&g, 2, &cfg).unwrap(),
            normalized_sc(&g, 2, &cfg).unwrap(),
        ] {
            assert_eq!(
                misclustering(&truth, &out.assignment).unwrap().fraction,
                0.0
            );
        }
    }

    #[test]
    fn zero_eigenvalue_multiplicity_equals_components() {
        let (g, _) = cliques(&[4, 3, 5]);
        let cfg = KMeansConfig::new(3, 0);
        let out = unnormalized_sc(&g, 3, &cfg).unwrap();
        assert!(out.eigenvalues.iter().all(|v| v.abs() < 1e-10));
        assert!(out.eigengap().unwrap() > 1.0);
        let out = normalized_sc(&g, 3, &cfg).unwrap();
        assert!(out.eigenvalues.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn identity_representation_is_rank_infeasible() {
        let (g, _) = cliques(&[4, 4]);
        let r = Graph::empty(8, true).with_self_loops();
        let cfg = KMeansConfig::new(2, 0);
        assert!(matches!(
            urepsc(&g, &r, 2, &cfg),
            Err(Error::RankInfeasible {
                null_dim: 1,
                n_clusters: 2
            })
        ));
    }

    #[test]
    fn isolated_node_breaks_normalized_variants() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3)], false).unwrap();
        let r = Graph::empty(5, true);
        let cfg = KMeansConfig::new(2, 0);
        assert!(matches!(
            nrepsc(&g, &r, 2, &cfg),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            normalized_sc(&g, 2, &cfg),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn bad_cluster_counts() {
        let (g, _) = cliques(&[2, 2]);
        let cfg = KMeansConfig::new(2, 0);
        assert!(unnormalized_sc(&g, 1, &cfg).is_err());
        assert!(unnormalized_sc(&g, 5, &cfg).is_err());
        let r = Graph::empty(4, true);
        assert!(urepsc_approx(&g, &r, 2, 3, &cfg).is_err());
        assert!(urepsc_approx(&g, &r, 2, 0, &cfg).is_err());
    }

    #[test]
    fn single_group_per_node_is_rank_infeasible() {
        let (g, _) = cliques(&[3, 3]);
        let r = Graph::from_fn(6, true, |_, _| true);
        let groups = ClusterAssignment::new((0..6).collect(), 6).unwrap();
        let cfg = KMeansConfig::new(2, 0);
        assert!(matches!(
            fairsc_with_groups(&g, &groups, 2, &cfg, false),
            Err(Error::RankInfeasible { .. })
        ));
        assert!(matches!(
            fairsc_baseline(&g, &r, 2, 6, &cfg, false),
            Err(Error::RankInfeasible { .. })
        ));
    }
}
