//! Cluster quality and representation measures: per-node balance, the
//! representation constraint, ratio/normalized cut and misclustering.

use crate::error::{Error, Result};
use crate::graph::{ClusterAssignment, Graph};

/// Per-node balance and its average.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceReport {
    pub per_node: Vec<f64>,
    pub average: f64,
}

fn check_same_size(graph: &Graph, assignment: &ClusterAssignment) -> Result<()> {
    if graph.n_nodes() != assignment.n_nodes() {
        return Err(Error::config(format!(
            "graph has {} nodes but assignment has {}",
            graph.n_nodes(),
            assignment.n_nodes()
        )));
    }
    Ok(())
}

/// Number of representatives of each node in each cluster.
fn representation_counts(
    representation: &Graph,
    assignment: &ClusterAssignment,
) -> Vec<Vec<usize>> {
    let k = assignment.n_clusters();
    (0..representation.n_nodes())
        .map(|i| {
            let mut counts = vec![0; k];
            for j in representation.neighbors(i) {
                counts[assignment.label(j)] += 1;
            }
            counts
        })
        .collect()
}

/// `rho_i = min_{k,l} |C_k ∩ N_R(i)| / |C_l ∩ N_R(i)|`, with `0/0 = 1`.
pub fn node_balance(
    representation: &Graph,
    assignment: &ClusterAssignment,
) -> Result<BalanceReport> {
    check_same_size(representation, assignment)?;
    let per_node: Vec<f64> = representation_counts(representation, assignment)
        .into_iter()
        .map(|counts| {
            let lo = *counts.iter().min().unwrap_or(&0);
            let hi = *counts.iter().max().unwrap_or(&0);
            if hi == 0 {
                1.0
            } else {
                lo as f64 / hi as f64
            }
        })
        .collect();
    let average = if per_node.is_empty() {
        1.0
    } else {
        per_node.iter().sum::<f64>() / per_node.len() as f64
    };
    Ok(BalanceReport { per_node, average })
}

/// Result of checking the representation constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    /// `max_{i,k} | |C_k ∩ N_R(i)| / |C_k| - |N_R(i)| / N |`.
    pub max_deviation: f64,
}

pub fn representation_constraint_satisfied(
    representation: &Graph,
    assignment: &ClusterAssignment,
    tolerance: f64,
) -> Result<ConstraintCheck> {
    check_same_size(representation, assignment)?;
    let sizes = assignment.cluster_sizes();
    if let Some(cluster) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateCluster {
            cluster,
            reason: "empty cluster",
        });
    }
    let n = assignment.n_nodes() as f64;
    let mut worst: f64 = 0.0;
    for counts in representation_counts(representation, assignment) {
        let total: usize = counts.iter().sum();
        let target = total as f64 / n;
        for (c, &size) in counts.iter().zip(&sizes) {
            worst = worst.max((*c as f64 / size as f64 - target).abs());
        }
    }
    Ok(ConstraintCheck {
        satisfied: worst <= tolerance,
        max_deviation: worst,
    })
}

/// Default tolerance for exact constraint checks on constructed instances.
pub const EXACT_CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Number of edges leaving each cluster.
fn cluster_cuts(similarity: &Graph, assignment: &ClusterAssignment) -> Vec<f64> {
    let mut cut = vec![0.0; assignment.n_clusters()];
    for (i, j) in similarity.edges() {
        let (a, b) = (assignment.label(i), assignment.label(j));
        if a != b {
            cut[a] += 1.0;
            cut[b] += 1.0;
        }
    }
    cut
}

/// `sum_k Cut(C_k, V \ C_k) / |C_k|`, where Cut counts each crossing edge once.
pub fn ratio_cut(similarity: &Graph, assignment: &ClusterAssignment) -> Result<f64> {
    check_same_size(similarity, assignment)?;
    let sizes = assignment.cluster_sizes();
    if let Some(cluster) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateCluster {
            cluster,
            reason: "empty cluster",
        });
    }
    Ok(cluster_cuts(similarity, assignment)
        .iter()
        .zip(&sizes)
        .map(|(c, &s)| c / s as f64)
        .sum())
}

/// `sum_k Cut(C_k, V \ C_k) / Vol(C_k)`.
pub fn normalized_cut(similarity: &Graph, assignment: &ClusterAssignment) -> Result<f64> {
    check_same_size(similarity, assignment)?;
    let degrees: Vec<f64> = similarity.degrees().into_iter().map(|d| d as f64).collect();
    let volumes = assignment.volumes(&degrees);
    if let Some(cluster) = volumes.iter().position(|&v| v <= 0.0) {
        return Err(Error::DegenerateCluster {
            cluster,
            reason: "zero volume",
        });
    }
    Ok(cluster_cuts(similarity, assignment)
        .iter()
        .zip(&volumes)
        .map(|(c, v)| c / v)
        .sum())
}

/// Misclustering under the best cluster-label matching.
#[derive(Clone, Debug, PartialEq)]
pub struct Misclustering {
    /// `min_J ||Θ - Θ̂ J||_0 / N`; counts two entries per misassigned node.
    pub fraction: f64,
    /// `1 - m / N` where `m` is the number of misassigned nodes.
    pub accuracy: f64,
    pub misassigned: usize,
    /// `best_permutation[predicted] = truth` label.
    pub best_permutation: Vec<usize>,
}

pub fn misclustering(
    truth: &ClusterAssignment,
    predicted: &ClusterAssignment,
) -> Result<Misclustering> {
    if truth.n_clusters() != predicted.n_clusters() {
        return Err(Error::config(format!(
            "truth has {} clusters, prediction has {}",
            truth.n_clusters(),
            predicted.n_clusters()
        )));
    }
    if truth.n_nodes() != predicted.n_nodes() {
        return Err(Error::config("truth and prediction differ in length"));
    }
    let k = truth.n_clusters();
    let mut confusion = vec![vec![0i64; k]; k];
    for (&t, &p) in truth.labels().iter().zip(predicted.labels()) {
        confusion[p][t] += 1;
    }
    let perm = max_weight_assignment(&confusion);
    let matched: i64 = (0..k).map(|p| confusion[p][perm[p]]).sum();
    let n = truth.n_nodes();
    let misassigned = n - matched as usize;
    Ok(Misclustering {
        fraction: 2.0 * misassigned as f64 / n as f64,
        accuracy: 1.0 - misassigned as f64 / n as f64,
        misassigned,
        best_permutation: perm,
    })
}

/// Hungarian method on a square weight matrix, maximizing total weight.
/// Returns `assignment[row] = column`.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0);
    // minimize cost = max_w - weight; 1-based potentials
    let cost = |i: usize, j: usize| max_w - weights[i - 1][j - 1];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut row_of = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rsbm::{block_diagonal_representation, make_d_regular_representation};

    #[test]
    fn balance_conventions() {
        // node 0 represents nodes 0 and 1, both in cluster 0: 0 / 2
        let r = Graph::from_edges(3, [(0, 0), (0, 1)], true).unwrap();
        let a = ClusterAssignment::from_one_based(&[1, 1, 2], 2).unwrap();
        let report = node_balance(&r, &a).unwrap();
        assert_eq!(report.per_node[0], 0.0);
        // node 2 has no representatives: 0 / 0 = 1
        assert_eq!(report.per_node[2], 1.0);
        assert!((report.average - (0.0 + 0.0 + 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn balance_is_relabeling_invariant() {
        let gt = ClusterAssignment::ground_truth(24, 3).unwrap();
        let r = make_d_regular_representation(24, 3, 6, &gt).unwrap();
        let a = ClusterAssignment::new((0..24).map(|i| (i * 7 + i / 5) % 3).collect(), 3).unwrap();
        let b = a.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(node_balance(&r, &a).unwrap(), node_balance(&r, &b).unwrap());
    }

    #[test]
    fn constraint_on_d_regular_ground_truth() {
        let gt = ClusterAssignment::ground_truth(24, 2).unwrap();
        let r = make_d_regular_representation(24, 2, 6, &gt).unwrap();
        let check =
            representation_constraint_satisfied(&r, &gt, EXACT_CONSTRAINT_TOLERANCE).unwrap();
        assert!(check.satisfied);
        assert_eq!(check.max_deviation, 0.0);
    }

    #[test]
    fn constraint_infeasible_with_two_representatives() {
        // node 0 has two representatives, three equal clusters of size 2
        let r = Graph::from_edges(6, [(0, 0), (0, 1)], true).unwrap();
        let a = ClusterAssignment::from_one_based(&[1, 1, 2, 2, 3, 3], 3).unwrap();
        let check =
            representation_constraint_satisfied(&r, &a, EXACT_CONSTRAINT_TOLERANCE).unwrap();
        assert!(!check.satisfied);
        // cluster 2 holds none of node 0's representatives: |0/2 - 2/6| = 1/3
        assert!((check.max_deviation - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constraint_with_complete_representation() {
        let r = Graph::from_fn(7, true, |_, _| true);
        let a = ClusterAssignment::new(vec![0, 1, 1, 2, 0, 2, 2], 3).unwrap();
        let check = representation_constraint_satisfied(&r, &a, 0.0).unwrap();
        assert!(check.satisfied);
    }

    #[test]
    fn constraint_rejects_empty_cluster() {
        let r = Graph::from_fn(3, true, |_, _| true);
        let a = ClusterAssignment::new(vec![0, 0, 0], 2).unwrap();
        assert!(representation_constraint_satisfied(&r, &a, 0.0).is_err());
    }

    #[test]
    fn cuts_on_small_graphs() {
        let groups = ClusterAssignment::ground_truth(6, 2).unwrap();
        let cliques = block_diagonal_representation(&groups).without_self_loops();
        assert_eq!(ratio_cut(&cliques, &groups).unwrap(), 0.0);
        assert_eq!(normalized_cut(&cliques, &groups).unwrap(), 0.0);

        // one crossing edge, sizes (2, 3)
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], false).unwrap();
        let a = ClusterAssignment::from_one_based(&[1, 1, 2, 2, 2], 2).unwrap();
        assert!((ratio_cut(&g, &a).unwrap() - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        // volumes 3 and 5
        assert!((normalized_cut(&g, &a).unwrap() - (1.0 / 3.0 + 1.0 / 5.0)).abs() < 1e-15);
    }

    #[test]
    fn misclustering_examples() {
        let truth = ClusterAssignment::from_one_based(&[1, 1, 1, 2, 2, 2], 2).unwrap();
        let same = misclustering(&truth, &truth).unwrap();
        assert_eq!((same.fraction, same.accuracy), (0.0, 1.0));

        let swapped = truth.relabel(&[1, 0]).unwrap();
        let m = misclustering(&truth, &swapped).unwrap();
        assert_eq!(m.fraction, 0.0);
        assert_eq!(m.best_permutation, vec![1, 0]);

        let pred = ClusterAssignment::from_one_based(&[1, 1, 2, 2, 2, 2], 2).unwrap();
        let m = misclustering(&truth, &pred).unwrap();
        assert_eq!(m.misassigned, 1);
        assert!((m.fraction - 2.0 / 6.0).abs() < 1e-15);
        assert!((m.accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.fraction - 2.0 * (1.0 - m.accuracy)).abs() < 1e-15);

        let other_k = ClusterAssignment::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        assert!(matches!(
            misclustering(&truth, &other_k),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn hungarian_small() {
        let w = vec![vec![1, 9, 3], vec![8, 2, 4], vec![5, 6, 7]];
        assert_eq!(max_weight_assignment(&w), vec![1, 0, 2]);
        assert_eq!(max_weight_assignment(&[vec![4]]), vec![0]);
    }
}
