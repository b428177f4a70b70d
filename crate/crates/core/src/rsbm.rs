//! Random and deterministic graph generators: the d-regular representation
//! graph, the representation-aware SBM sampler, and SBM-sampled
//! representation graphs over protected groups.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterAssignment, Graph};
use crate::random;

/// Edge probabilities of the representation-aware SBM.
///
/// * `p`: same cluster, adjacent in R
/// * `q`: different clusters, adjacent in R
/// * `r`: same cluster, not adjacent in R
/// * `s`: different clusters, not adjacent in R
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsbmParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl RsbmParams {
    /// Validates `1 >= p >= q >= r >= s >= 0`.
    pub fn new(p: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        let params = Self { p, q, r, s };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { p, q, r, s } = *self;
        if !(1.0 >= p && p >= q && q >= r && r >= s && s >= 0.0) {
            return Err(Error::config(format!(
                "R-SBM parameters must satisfy 1 >= p >= q >= r >= s >= 0, got p={p}, q={q}, r={r}, s={s}"
            )));
        }
        Ok(())
    }

    /// Probability of an edge between two distinct nodes.
    #[inline]
    pub fn edge_probability(&self, same_cluster: bool, represented: bool) -> f64 {
        match (same_cluster, represented) {
            (true, true) => self.p,
            (false, true) => self.q,
            (true, false) => self.r,
            (false, false) => self.s,
        }
    }
}

/// Parameters of the SBM used to sample representation graphs over
/// protected groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectedGroupParams {
    pub n_groups: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl ProtectedGroupParams {
    pub fn new(n_groups: usize, p_in: f64, p_out: f64) -> Result<Self> {
        let params = Self {
            n_groups,
            p_in,
            p_out,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return Err(Error::config("n_groups must be positive"));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::config(format!(
                "group parameters must satisfy 0 <= p_out <= p_in <= 1, got p_in={}, p_out={}",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }
}

/// Symmetric offset set of size `per_cluster` on the cycle Z_m, containing 0.
/// Even sizes need even `m` and use the antipodal offset `m / 2`. The
/// remaining offsets are `±(shift + 1) ..= ±(shift + half)`.
fn circulant_offsets(per_cluster: usize, m: usize, shift: usize) -> Result<Vec<bool>> {
    if per_cluster == 0 || per_cluster > m {
        return Err(Error::config(format!(
            "d/K = {per_cluster} must lie in 1..={m} (the cluster size)"
        )));
    }
    let mut offsets = vec![false; m];
    offsets[0] = true;
    let half = if per_cluster % 2 == 1 {
        (per_cluster - 1) / 2
    } else {
        if !m.is_multiple_of(2) {
            return Err(Error::config(format!(
                "d/K = {per_cluster} is even, which requires an even cluster size, got {m}"
            )));
        }
        offsets[m / 2] = true;
        (per_cluster - 2) / 2
    };
    for j in shift + 1..=shift + half {
        offsets[j] = true;
        offsets[m - j] = true;
    }
    debug_assert_eq!(offsets.iter().filter(|&&b| b).count(), per_cluster);
    Ok(offsets)
}

/// Representation graph in which every node has `degree` neighbors,
/// `degree / K` of them in each cluster of `ground_truth`, self-loop included.
///
/// Node `i` is adjacent to node `j` iff `(rank(j) - rank(i)) mod (N/K)` falls
/// in a symmetric offset set, where `rank` is a node's position inside its
/// own cluster. Each set has `d/K` elements and contains 0, so `d/K` must be
/// odd or `N/K` even. Pairs in different clusters use the same set with its
/// `±` offsets pushed outward, when the cycle is long enough for that. This
/// keeps rank(R) high, so the null space of the constraint is small.
pub fn make_d_regular_representation(
    n_nodes: usize,
    n_clusters: usize,
    degree: usize,
    ground_truth: &ClusterAssignment,
) -> Result<Graph> {
    if ground_truth.n_nodes() != n_nodes || ground_truth.n_clusters() != n_clusters {
        return Err(Error::config(
            "ground truth does not match n_nodes / n_clusters",
        ));
    }
    if n_clusters == 0 || !n_nodes.is_multiple_of(n_clusters) {
        return Err(Error::config(format!(
            "n_clusters = {n_clusters} does not divide n_nodes = {n_nodes}"
        )));
    }
    if degree < n_clusters || degree > n_nodes || !degree.is_multiple_of(n_clusters) {
        return Err(Error::config(format!(
            "degree = {degree} must be a multiple of K = {n_clusters} with K <= d <= N = {n_nodes}"
        )));
    }
    let m = n_nodes / n_clusters;
    if ground_truth.cluster_sizes().iter().any(|&s| s != m) {
        return Err(Error::config(
            "d-regular construction needs equal cluster sizes",
        ));
    }
    let per_cluster = degree / n_clusters;
    let own = circulant_offsets(per_cluster, m, 0)?;
    let half = (per_cluster - 1) / 2;
    let cross = if 4 * half < m {
        circulant_offsets(per_cluster, m, half)?
    } else {
        own.clone()
    };

    let mut rank = vec![0; n_nodes];
    let mut seen = vec![0; n_clusters];
    for (i, &l) in ground_truth.labels().iter().enumerate() {
        rank[i] = seen[l];
        seen[l] += 1;
    }
    let labels = ground_truth.labels();
    Ok(Graph::from_fn(n_nodes, true, |i, j| {
        let offsets = if labels[i] == labels[j] { &own } else { &cross };
        offsets[(rank[j] + m - rank[i]) % m]
    }))
}

/// Samples a similarity graph from the representation-aware SBM.
///
/// Pairs are visited in row-major upper-triangle order with one uniform draw
/// each, so the output is a deterministic function of `seed`.
pub fn sample_rsbm(
    representation: &Graph,
    ground_truth: &ClusterAssignment,
    params: &RsbmParams,
    seed: u64,
) -> Result<Graph> {
    params.validate()?;
    let n = representation.n_nodes();
    if ground_truth.n_nodes() != n {
        return Err(Error::config(format!(
            "representation graph has {n} nodes, ground truth has {}",
            ground_truth.n_nodes()
        )));
    }
    let labels = ground_truth.labels();
    let mut rng = random::rng(seed);
    Ok(Graph::from_fn(n, false, |i, j| {
        let prob = params.edge_probability(labels[i] == labels[j], representation.has_edge(i, j));
        rng.random::<f64>() < prob
    }))
}

/// Samples a representation graph from an SBM over protected groups, with
/// every self-loop present.
pub fn sample_group_representation(
    n_nodes: usize,
    groups: &ClusterAssignment,
    params: &ProtectedGroupParams,
    seed: u64,
) -> Result<Graph> {
    params.validate()?;
    if groups.n_nodes() != n_nodes {
        return Err(Error::config(format!(
            "group assignment has {} nodes, expected {n_nodes}",
            groups.n_nodes()
        )));
    }
    if groups.n_clusters() != params.n_groups {
        return Err(Error::config(format!(
            "group assignment has {} groups, parameters say {}",
            groups.n_clusters(),
            params.n_groups
        )));
    }
    let labels = groups.labels();
    let mut rng = random::rng(seed);
    let sampled = Graph::from_fn(n_nodes, false, |i, j| {
        let prob = if labels[i] == labels[j] {
            params.p_in
        } else {
            params.p_out
        };
        rng.random::<f64>() < prob
    });
    Ok(sampled.with_self_loops())
}

/// Representation graph that links two nodes iff they share a protected
/// group: a disjoint union of cliques with self-loops.
pub fn block_diagonal_representation(groups: &ClusterAssignment) -> Graph {
    let labels = groups.labels();
    Graph::from_fn(groups.n_nodes(), true, |i, j| labels[i] == labels[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_d_regular(r: &Graph, gt: &ClusterAssignment, d: usize) {
        let k = gt.n_clusters();
        for i in 0..r.n_nodes() {
            assert!(r.has_edge(i, i), "missing self-loop at {i}");
            assert_eq!(r.degree(i), d);
            let mut per_cluster = vec![0; k];
            for j in r.neighbors(i) {
                per_cluster[gt.label(j)] += 1;
                assert!(r.has_edge(j, i));
            }
            assert!(
                per_cluster.iter().all(|&c| c == d / k),
                "node {i}: {per_cluster:?}"
            );
        }
    }

    #[test]
    fn d_regular_example_geometry() {
        let gt = ClusterAssignment::ground_truth(24, 2).unwrap();
        let r = make_d_regular_representation(24, 2, 6, &gt).unwrap();
        check_d_regular(&r, &gt, 6);
    }

    #[test]
    fn d_regular_singleton_clusters() {
        for k in 2..6 {
            let gt = ClusterAssignment::ground_truth(k, k).unwrap();
            let r = make_d_regular_representation(k, k, k, &gt).unwrap();
            check_d_regular(&r, &gt, k);
        }
    }

    #[test]
    fn d_regular_one_per_cluster() {
        let gt = ClusterAssignment::ground_truth(12, 3).unwrap();
        let r = make_d_regular_representation(12, 3, 3, &gt).unwrap();
        check_d_regular(&r, &gt, 3);
    }

    #[test]
    fn d_regular_sweep_of_shapes() {
        for (n, k, d) in [
            (120, 4, 12),
            (60, 5, 20),
            (40, 4, 40),
            (30, 3, 6),
            (1200, 5, 40),
        ] {
            let gt = ClusterAssignment::ground_truth(n, k).unwrap();
            let r = make_d_regular_representation(n, k, d, &gt).unwrap();
            check_d_regular(&r, &gt, d);
        }
    }

    #[test]
    fn d_regular_rejects_infeasible() {
        let gt = ClusterAssignment::ground_truth(15, 3).unwrap();
        // d/K = 2 is even, cluster size 5 is odd
        assert!(matches!(
            make_d_regular_representation(15, 3, 6, &gt),
            Err(Error::InvalidConfig(_))
        ));
        // K does not divide d
        assert!(make_d_regular_representation(15, 3, 4, &gt).is_err());
        // d > N
        assert!(make_d_regular_representation(15, 3, 18, &gt).is_err());
    }

    #[test]
    fn rsbm_extreme_probabilities() {
        let gt = ClusterAssignment::ground_truth(12, 3).unwrap();
        let r = make_d_regular_representation(12, 3, 3, &gt).unwrap();
        let full = sample_rsbm(&r, &gt, &RsbmParams::new(1.0, 1.0, 1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(full.n_edges(), 12 * 11 / 2);
        assert!((0..12).all(|i| !full.has_edge(i, i)));
        let none = sample_rsbm(&r, &gt, &RsbmParams::new(0.0, 0.0, 0.0, 0.0).unwrap(), 3).unwrap();
        assert_eq!(none.n_edges(), 0);
    }

    #[test]
    fn rsbm_is_deterministic() {
        let gt = ClusterAssignment::ground_truth(24, 2).unwrap();
        let r = make_d_regular_representation(24, 2, 6, &gt).unwrap();
        let params = RsbmParams::new(0.4, 0.3, 0.2, 0.1).unwrap();
        let a = sample_rsbm(&r, &gt, &params, 99).unwrap();
        let b = sample_rsbm(&r, &gt, &params, 99).unwrap();
        let c = sample_rsbm(&r, &gt, &params, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rsbm_rejects_bad_inputs() {
        assert!(RsbmParams::new(0.3, 0.4, 0.2, 0.1).is_err());
        assert!(RsbmParams::new(1.2, 0.4, 0.2, 0.1).is_err());
        let gt = ClusterAssignment::ground_truth(24, 2).unwrap();
        let r = Graph::empty(12, true);
        let params = RsbmParams::new(0.4, 0.3, 0.2, 0.1).unwrap();
        assert!(sample_rsbm(&r, &gt, &params, 0).is_err());
    }

    #[test]
    fn rsbm_edge_frequency_matches_probability() {
        let gt = ClusterAssignment::ground_truth(24, 2).unwrap();
        let r = make_d_regular_representation(24, 2, 6, &gt).unwrap();
        let params = RsbmParams::new(0.4, 0.3, 0.2, 0.1).unwrap();
        // (0, 1) share a cluster and are adjacent in R
        assert!(r.has_edge(0, 1) && gt.label(0) == gt.label(1));
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|&seed| sample_rsbm(&r, &gt, &params, seed).unwrap().has_edge(0, 1))
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.4).abs() < 0.015, "frequency {freq}");
    }

    #[test]
    fn group_representation_extremes() {
        let groups = ClusterAssignment::ground_truth(9, 3).unwrap();
        let cliques = sample_group_representation(
            9,
            &groups,
            &ProtectedGroupParams::new(3, 1.0, 0.0).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(cliques, block_diagonal_representation(&groups));
        let complete = sample_group_representation(
            9,
            &groups,
            &ProtectedGroupParams::new(3, 1.0, 1.0).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(complete.n_edges(), 9 * 10 / 2);
    }

    #[test]
    fn group_representation_density() {
        let n = 1000;
        let groups = ClusterAssignment::interleaved(n, 5).unwrap();
        let params = ProtectedGroupParams::new(5, 0.8, 0.2).unwrap();
        let labels = groups.labels().to_vec();
        let mut within_total = 0.0;
        let seeds = 100;
        for seed in 0..seeds {
            let g = sample_group_representation(n, &groups, &params, seed).unwrap();
            let (mut hits, mut pairs) = (0usize, 0usize);
            for i in 0..n {
                let row = g.row(i);
                for j in i + 1..n {
                    if labels[i] == labels[j] {
                        pairs += 1;
                        hits += row[j] as usize;
                    }
                }
            }
            within_total += hits as f64 / pairs as f64;
        }
        let mean = within_total / seeds as f64;
        assert!(
            (mean - 0.8).abs() < 0.01,
            "mean within-group density {mean}"
        );
    }

    #[test]
    fn block_diagonal_row_sums() {
        let groups = ClusterAssignment::from_one_based(&[1, 1, 2, 2], 2).unwrap();
        let r = block_diagonal_representation(&groups);
        assert_eq!(r.degrees(), vec![2, 2, 2, 2]);
        assert!(r.has_edge(0, 1) && !r.has_edge(1, 2) && r.has_edge(3, 3));

        let single = ClusterAssignment::new(vec![0; 4], 1).unwrap();
        assert_eq!(block_diagonal_representation(&single).n_edges(), 10);

        let groups = ClusterAssignment::from_one_based(&[1, 1, 1, 2, 2], 2).unwrap();
        assert_eq!(
            block_diagonal_representation(&groups).degrees(),
            vec![3, 3, 3, 2, 2]
        );
    }
}
