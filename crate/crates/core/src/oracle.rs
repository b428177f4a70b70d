//! Expected-case quantities under the R-SBM: the expected adjacency matrix,
//! closed-form eigenpairs for d-regular representation graphs, and the
//! population eigengaps that govern the error bounds of URepSC and NRepSC.

use faer::Mat;

use crate::error::{Error, Result};
use crate::graph::{ClusterAssignment, Graph};
use crate::rsbm::RsbmParams;
use crate::spectral;

/// Tolerance for the internal agreement of the two constructions of Ã.
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;

/// Tolerance for the uniform-degree check on the expected adjacency.
pub const DEGREE_TOLERANCE: f64 = 1e-9;

/// Expected similarity graph under the R-SBM.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    /// 𝒜 = Ã - pI, zero diagonal.
    pub expected_adjacency: Mat<f64>,
    /// Ã: off-diagonal edge probabilities with `p` on the diagonal.
    pub expected_adjacency_with_diagonal: Mat<f64>,
    /// λ₁ - p, the common row sum of 𝒜.
    pub expected_degree: f64,
    /// Diagonals of the cluster projectors G_k.
    pub cluster_projectors: Vec<Vec<f64>>,
    pub lambda_1: f64,
    pub params: RsbmParams,
}

impl PopulationModel {
    pub fn n_nodes(&self) -> usize {
        self.expected_adjacency.nrows()
    }

    /// 𝒟 - 𝒜 with 𝒟 = (λ₁ - p)I.
    pub fn laplacian(&self) -> Mat<f64> {
        let n = self.n_nodes();
        Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { self.expected_degree } else { 0.0 };
            diag - self.expected_adjacency[(i, j)]
        })
    }
}

/// Closed-form eigenvalues of Ã for a d-regular representation graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormEigenvalues {
    /// Eigenvalue of the all-ones vector.
    pub lambda_1: f64,
    /// Shared eigenvalue of the K - 1 cluster contrast vectors u_k.
    pub lambda_shared: f64,
}

pub fn closed_form_eigenvalues(
    params: &RsbmParams,
    n_nodes: usize,
    n_clusters: usize,
    degree: usize,
) -> Result<ClosedFormEigenvalues> {
    if n_clusters == 0
        || !n_nodes.is_multiple_of(n_clusters)
        || !degree.is_multiple_of(n_clusters)
        || degree > n_nodes
    {
        return Err(Error::config(format!(
            "need K | N and K | d <= N, got N={n_nodes}, K={n_clusters}, d={degree}"
        )));
    }
    let (n, k, d) = (n_nodes as f64, n_clusters as f64, degree as f64);
    let RsbmParams { p, q, r, s } = *params;
    let lambda_shared = (p - q) * d / k + (r - s) * (n - d) / k;
    Ok(ClosedFormEigenvalues {
        lambda_1: q * d + s * (n - d) + lambda_shared,
        lambda_shared,
    })
}

fn check_inputs(representation: &Graph, ground_truth: &ClusterAssignment) -> Result<()> {
    if representation.n_nodes() != ground_truth.n_nodes() {
        return Err(Error::config(format!(
            "representation graph has {} nodes but the assignment has {}",
            representation.n_nodes(),
            ground_truth.n_nodes()
        )));
    }
    Ok(())
}

fn projector_diagonals(ground_truth: &ClusterAssignment) -> Vec<Vec<f64>> {
    (0..ground_truth.n_clusters())
        .map(|k| {
            ground_truth
                .labels()
                .iter()
                .map(|&l| if l == k { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// qR + s(11ᵀ - R) + (p - q) Σ G_k R G_k + (r - s) Σ G_k (11ᵀ - R) G_k
fn decomposed(r: &Mat<f64>, projectors: &[Vec<f64>], params: &RsbmParams) -> Mat<f64> {
    let n = r.nrows();
    let RsbmParams { p, q, r: rr, s } = *params;
    let mut out = Mat::from_fn(n, n, |i, j| q * r[(i, j)] + s * (1.0 - r[(i, j)]));
    for g in projectors {
        let block = Mat::from_fn(n, n, |i, j| {
            g[i] * g[j] * ((p - q) * r[(i, j)] + (rr - s) * (1.0 - r[(i, j)]))
        });
        out += &block;
    }
    out
}

/// Builds Ã and 𝒜 from the R-SBM case table and checks them against the
/// projector decomposition. Fails when the expected degree is not uniform,
/// which happens when R does not give every node the same number of
/// representatives in each cluster.
pub fn expected_adjacency(
    representation: &Graph,
    ground_truth: &ClusterAssignment,
    params: &RsbmParams,
) -> Result<PopulationModel> {
    check_inputs(representation, ground_truth)?;
    params.validate()?;
    let n = representation.n_nodes();
    let labels = ground_truth.labels();
    let with_diag = Mat::from_fn(n, n, |i, j| {
        if i == j {
            params.p
        } else {
            params.edge_probability(labels[i] == labels[j], representation.has_edge(i, j))
        }
    });

    let projectors = projector_diagonals(ground_truth);
    let r = representation.to_matrix();
    let alt = decomposed(&r, &projectors, params);
    for i in 0..n {
        for j in 0..n {
            // the decomposition only yields p on the diagonal where R_ii = 1
            if i == j && !representation.has_edge(i, i) {
                continue;
            }
            let diff = (alt[(i, j)] - with_diag[(i, j)]).abs();
            if diff > CONSTRUCTION_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "expected adjacency constructions disagree at ({i}, {j}) by {diff:e}"
                )));
            }
        }
    }

    let a = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { with_diag[(i, j)] });
    let degree = representation.degree(0);
    let closed = closed_form_eigenvalues(params, n, ground_truth.n_clusters(), degree)?;
    let expected_degree = closed.lambda_1 - params.p;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| a[(i, j)]).sum();
        if (row - expected_degree).abs() > DEGREE_TOLERANCE {
            return Err(Error::Numerical(format!(
                "expected degree of node {} is {row}, closed form gives {expected_degree}",
                i + 1
            )));
        }
    }
    Ok(PopulationModel {
        expected_adjacency: a,
        expected_adjacency_with_diagonal: with_diag,
        expected_degree,
        cluster_projectors: projectors,
        lambda_1: closed.lambda_1,
        params: *params,
    })
}

/// Columns 1, u_1, ..., u_{K-1}: u_k is 1 on cluster k and -1/(K-1) elsewhere.
pub fn constraint_witnesses(ground_truth: &ClusterAssignment) -> Result<Mat<f64>> {
    let k = ground_truth.n_clusters();
    if k < 2 {
        return Err(Error::config("need K >= 2 clusters"));
    }
    let other = -1.0 / (k as f64 - 1.0);
    let labels = ground_truth.labels();
    Ok(Mat::from_fn(ground_truth.n_nodes(), k, |i, c| match c {
        0 => 1.0,
        _ if labels[i] == c - 1 => 1.0,
        _ => other,
    }))
}

/// Orthonormal y_1 = 1/√N and y_{1+k}, k = 1..K-1, spanning the witnesses
/// for contiguous equal-size clusters.
pub fn canonical_eigenvectors(n_nodes: usize, n_clusters: usize) -> Result<Mat<f64>> {
    let truth = ClusterAssignment::ground_truth(n_nodes, n_clusters)?;
    let (n, big_k) = (n_nodes as f64, n_clusters as f64);
    Ok(Mat::from_fn(n_nodes, n_clusters, |i, col| {
        if col == 0 {
            return 1.0 / n.sqrt();
        }
        // clusters are 1-based in the closed form
        let k = col as f64;
        let cluster = truth.label(i) as f64 + 1.0;
        let scale = ((n / big_k) * (big_k - k) * (big_k - k + 1.0)).sqrt();
        if cluster < k {
            0.0
        } else if cluster == k {
            (big_k - k) / scale
        } else {
            -1.0 / scale
        }
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Unnormalized,
    Normalized,
}

#[derive(Clone, Debug)]
pub struct PopulationEigengap {
    /// μ_{K+1} - μ_K.
    pub gamma: f64,
    /// μ_1 ..= μ_{K+1}, ascending. Infinite `gamma` and only K entries when
    /// the null space has dimension exactly K.
    pub mu_prefix: Vec<f64>,
    pub lambda_1: f64,
    pub null_dim: usize,
    /// γ² / (p N K ln N), the unnormalized bound's scaling quantity.
    pub scaling_ratio: f64,
    /// √(p N ln N) / (λ₁ - p), the normalized bound's perturbation quantity.
    pub degree_ratio: f64,
    pub degenerate: bool,
}

/// Population eigengap of Yᵀℒ Y (unnormalized) or 𝒬⁻¹Yᵀℒ Y𝒬⁻¹ with
/// 𝒬 = √(λ₁ - p) I (normalized).
pub fn population_eigengap(
    representation: &Graph,
    ground_truth: &ClusterAssignment,
    params: &RsbmParams,
    variant: Variant,
) -> Result<PopulationEigengap> {
    let model = expected_adjacency(representation, ground_truth, params)?;
    let basis = spectral::constraint_null_basis(representation)?;
    population_eigengap_with(&model, &basis, ground_truth.n_clusters(), variant)
}

/// As [`population_eigengap`] with a precomputed model and null-space basis.
pub fn population_eigengap_with(
    model: &PopulationModel,
    basis: &spectral::NullSpaceBasis,
    n_clusters: usize,
    variant: Variant,
) -> Result<PopulationEigengap> {
    if basis.dim() < n_clusters {
        return Err(Error::RankInfeasible {
            null_dim: basis.dim(),
            n_clusters,
        });
    }
    let y = &basis.basis;
    let reduced = y.transpose() * (model.laplacian() * y);
    let eig = spectral::symmetric_eigen(spectral::symmetrize(&reduced).as_ref())?;
    let scale = match variant {
        Variant::Unnormalized => 1.0,
        Variant::Normalized => 1.0 / model.expected_degree,
    };
    let take = (n_clusters + 1).min(eig.values.len());
    let mu_prefix: Vec<f64> = eig.values[..take].iter().map(|v| v * scale).collect();
    // with a K-dimensional null space there is no μ_{K+1}
    let gamma = match mu_prefix.get(n_clusters) {
        Some(next) => next - mu_prefix[n_clusters - 1],
        None => f64::INFINITY,
    };
    let n = model.n_nodes() as f64;
    let p = model.params.p;
    let ln_n = n.ln();
    Ok(PopulationEigengap {
        gamma,
        mu_prefix,
        lambda_1: model.lambda_1,
        null_dim: basis.dim(),
        scaling_ratio: gamma * gamma / (p * n * n_clusters as f64 * ln_n),
        degree_ratio: (p * n * ln_n).sqrt() / model.expected_degree,
        degenerate: gamma.abs() < crate::algorithms::DEGENERATE_GAP,
    })
}
