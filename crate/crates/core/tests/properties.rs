use faer::Mat;
use proptest::prelude::*;
use rand::Rng as _;

use repsc::algorithms::{nrepsc, urepsc};
use repsc::kmeans::{kmeans, lloyd, KMeansConfig};
use repsc::metrics::{
    misclustering, node_balance, normalized_cut, ratio_cut, representation_constraint_satisfied,
};
use repsc::random::rng;
use repsc::rsbm::{
    block_diagonal_representation, make_d_regular_representation, sample_rsbm, RsbmParams,
};
use repsc::spectral::{constraint_null_basis, laplacian, low_rank_approximation};
use repsc::{ClusterAssignment, Graph};

fn trace(m: &Mat<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Labels in `0..k` with every cluster nonempty.
fn covering_labels(n: usize, k: usize, seed: u64) -> ClusterAssignment {
    let mut r = rng(seed);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { r.random_range(0..k) })
        .collect();
    for i in (1..n).rev() {
        labels.swap(i, r.random_range(0..=i));
    }
    ClusterAssignment::new(labels, k).unwrap()
}

fn random_graph(n: usize, prob: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    Graph::from_fn(n, false, |_, _| r.random_bool(prob))
}

fn instance() -> impl Strategy<Value = (Graph, ClusterAssignment)> {
    (4usize..=30, 2usize..=5, any::<u64>()).prop_map(|(n, k, seed)| {
        let k = k.min(n);
        (random_graph(n, 0.3, seed), covering_labels(n, k, seed ^ 1))
    })
}

/// Direct count of `Σ_k cut_k / weight_k`.
fn counted_cut(g: &Graph, a: &ClusterAssignment, weight: impl Fn(usize) -> f64) -> f64 {
    let mut cut = vec![0.0; a.n_clusters()];
    for (i, j) in g.edges() {
        if a.label(i) != a.label(j) {
            cut[a.label(i)] += 1.0;
            cut[a.label(j)] += 1.0;
        }
    }
    (0..a.n_clusters()).map(|k| cut[k] / weight(k)).sum()
}

/// Exact rank of an integer matrix by fraction-free elimination.
fn exact_rank(mut m: Vec<Vec<i128>>) -> usize {
    let (rows, cols) = (m.len(), m.first().map_or(0, Vec::len));
    let mut rank = 0;
    let mut prev = 1i128;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..rows {
            for cc in c + 1..cols {
                m[r][cc] = (m[rank][c] * m[r][cc] - m[r][c] * m[rank][cc]) / prev;
            }
            m[r][c] = 0;
        }
        prev = m[rank][c];
        rank += 1;
    }
    rank
}

fn brute_force_mistakes(truth: &[usize], pred: &[usize], k: usize) -> usize {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    perms(k)
        .iter()
        .map(|perm| {
            truth
                .iter()
                .zip(pred)
                .filter(|(&t, &p)| perm[p] != t)
                .count()
        })
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_cut_is_trace((g, a) in instance()) {
        let l = laplacian(&g).laplacian;
        let h = a.h_matrix().unwrap();
        let direct = counted_cut(&g, &a, |k| a.cluster_sizes()[k] as f64);
        prop_assert!((trace(&(h.transpose() * (&l * &h))) - direct).abs() < 1e-9);
        prop_assert!((ratio_cut(&g, &a).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn normalized_cut_is_trace((g, a) in instance()) {
        let bundle = laplacian(&g);
        let vols = a.volumes(&bundle.degree);
        prop_assume!(vols.iter().all(|&v| v > 0.0));
        let t = a.t_matrix(&bundle.degree).unwrap();
        let direct = counted_cut(&g, &a, |k| vols[k]);
        prop_assert!((trace(&(t.transpose() * (&bundle.laplacian * &t))) - direct).abs() < 1e-9);
        prop_assert!((normalized_cut(&g, &a).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn indicator_embeddings_are_orthonormal((g, a) in instance()) {
        let h = a.h_matrix().unwrap();
        let eye = |m: &Mat<f64>| {
            let k = m.ncols();
            (0..k).flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| (m[(i, j)] - f64::from(u8::from(i == j))).abs())
                .fold(0.0, f64::max)
        };
        prop_assert!(eye(&(h.transpose() * &h)) < 1e-12);
        let degree = laplacian(&g).degree;
        prop_assume!(a.volumes(&degree).iter().all(|&v| v > 0.0));
        let t = a.t_matrix(&degree).unwrap();
        let d = Mat::from_fn(g.n_nodes(), g.n_nodes(), |i, j| if i == j { degree[i] } else { 0.0 });
        prop_assert!(eye(&(t.transpose() * (&d * &t))) < 1e-12);
    }

    #[test]
    fn relabeling_permutes_indicator_columns((_g, a) in instance(), seed in any::<u64>()) {
        let k = a.n_clusters();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut r = rng(seed);
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let (x, y) = (a.h_matrix().unwrap(), a.relabel(&perm).unwrap().h_matrix().unwrap());
        for i in 0..a.n_nodes() {
            for c in 0..k {
                prop_assert_eq!(x[(i, c)], y[(i, perm[c])]);
            }
        }
        let rep = random_graph(a.n_nodes(), 0.4, seed).with_self_loops();
        prop_assert_eq!(
            node_balance(&rep, &a).unwrap(),
            node_balance(&rep, &a.relabel(&perm).unwrap()).unwrap()
        );
    }

    #[test]
    fn hungarian_matches_brute_force(k in 1usize..=6, n in 1usize..=60, seed in any::<u64>()) {
        let mut r = rng(seed);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let m = misclustering(
            &ClusterAssignment::new(truth.clone(), k).unwrap(),
            &ClusterAssignment::new(pred.clone(), k).unwrap(),
        ).unwrap();
        let brute = brute_force_mistakes(&truth, &pred, k);
        prop_assert_eq!(m.misassigned, brute);
        prop_assert!((m.fraction - 2.0 * (1.0 - m.accuracy)).abs() < 1e-12);
    }

    #[test]
    fn group_representation_is_statistical_fairness(
        n in 4usize..=40, p in 2usize..=4, k in 2usize..=4, seed in any::<u64>()
    ) {
        prop_assume!(n >= p.max(k));
        let groups = covering_labels(n, p, seed);
        let clusters = covering_labels(n, k, seed ^ 7);
        let rep = block_diagonal_representation(&groups);
        let constraint = representation_constraint_satisfied(&rep, &clusters, 1e-9).unwrap().satisfied;
        let (gs, cs) = (groups.cluster_sizes(), clusters.cluster_sizes());
        let proportional = (0..p).all(|gi| (0..k).all(|cj| {
            let both = (0..n).filter(|&v| groups.label(v) == gi && clusters.label(v) == cj).count();
            both * n == gs[gi] * cs[cj]
        }));
        prop_assert_eq!(constraint, proportional);
    }

    #[test]
    fn satisfied_constraint_gives_size_ratio_balance(half in 2usize..=8, seed in any::<u64>()) {
        // two equal clusters, each protected group split evenly between them
        let n = 4 * half;
        let mut r = rng(seed);
        let groups = covering_labels(n, 2, seed);
        let mut clusters = vec![0; n];
        for g in 0..2 {
            let mut members: Vec<usize> = (0..n).filter(|&v| groups.label(v) == g).collect();
            for i in (1..members.len()).rev() {
                members.swap(i, r.random_range(0..=i));
            }
            let cut = members.len() / 2;
            for (idx, &v) in members.iter().enumerate() {
                clusters[v] = usize::from(idx >= cut);
            }
        }
        let clusters = ClusterAssignment::new(clusters, 2).unwrap();
        prop_assume!(clusters.cluster_sizes()[0] == clusters.cluster_sizes()[1]);
        prop_assume!(groups.cluster_sizes().iter().all(|s| s % 2 == 0));
        let rep = block_diagonal_representation(&groups);
        prop_assert!(representation_constraint_satisfied(&rep, &clusters, 1e-9).unwrap().satisfied);
        let balance = node_balance(&rep, &clusters).unwrap();
        prop_assert!(balance.per_node.iter().all(|&b| b == 1.0));
    }

    #[test]
    fn balance_is_at_most_one((_g, a) in instance(), seed in any::<u64>()) {
        let rep = random_graph(a.n_nodes(), 0.5, seed).with_self_loops();
        let b = node_balance(&rep, &a).unwrap();
        prop_assert!(b.per_node.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((0.0..=1.0).contains(&b.average));
    }

    #[test]
    fn null_basis_dimension_matches_exact_rank(n in 3usize..=16, prob in 0.1f64..0.9, seed in any::<u64>()) {
        let rep = random_graph(n, prob, seed).with_self_loops();
        let basis = constraint_null_basis(&rep).unwrap();
        // N·R(I − 11ᵀ/N) = N·R − (R1)1ᵀ is an integer matrix with the same rank
        let deg = rep.degrees();
        let scaled: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| n as i128 * i128::from(rep.has_edge(i, j)) - deg[i] as i128).collect())
            .collect();
        let rank = exact_rank(scaled);
        prop_assert_eq!(basis.dim(), n - rank);
        let residual = repsc::spectral::constraint_residual(rep.to_matrix().as_ref(), basis.basis.as_ref());
        prop_assert!(residual < 1e-9);
    }

    #[test]
    fn low_rank_error_is_non_increasing(n in 3usize..=20, seed in any::<u64>()) {
        let rep = random_graph(n, 0.4, seed).with_self_loops();
        let r = rep.to_matrix();
        let mut last = f64::INFINITY;
        for rank in 1..=n {
            let err = (&r - &low_rank_approximation(&rep, rank).unwrap()).norm_l2();
            prop_assert!(err <= last + 1e-9, "rank {}: {} > {}", rank, err, last);
            last = err;
        }
        prop_assert!(last < 1e-9);
    }

    #[test]
    fn lloyd_inertia_never_increases(n in 6usize..=60, k in 1usize..=5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts = Mat::from_fn(n, 3, |_, _| r.random::<f64>());
        let run = lloyd(pts.as_ref(), &KMeansConfig::new(k, seed), 0).unwrap();
        for w in run.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "{:?}", run.history);
        }
    }

    #[test]
    fn kmeans_ignores_translation_and_rotation(
        k in 2usize..=4, per in 5usize..=15, seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU,
        shift in prop::array::uniform3(-50.0f64..50.0)
    ) {
        let mut r = rng(seed);
        let centers: Vec<[f64; 3]> = (0..k)
            .map(|c| [10.0 * c as f64, 5.0 * (c % 2) as f64, -3.0 * c as f64])
            .collect();
        let n = k * per;
        let pts = Mat::from_fn(n, 3, |i, j| centers[i % k][j] + r.random::<f64>() - 0.5);
        let (s, c) = angle.sin_cos();
        let moved = Mat::from_fn(n, 3, |i, j| {
            let (x, y, z) = (pts[(i, 0)], pts[(i, 1)], pts[(i, 2)]);
            [c * x - s * y, s * x + c * y, z][j] + shift[j]
        });
        let cfg = KMeansConfig::new(k, seed);
        let a = kmeans(pts.as_ref(), &cfg).unwrap();
        let b = kmeans(moved.as_ref(), &cfg).unwrap();
        prop_assert_eq!(misclustering(&a.assignment, &b.assignment).unwrap().misassigned, 0);
        prop_assert!((a.inertia - b.inertia).abs() < 1e-6 * a.inertia.max(1.0));
    }
}

#[test]
fn d_regular_counts_are_exact() {
    for (n, k, d) in [
        (24, 2, 6),
        (12, 3, 3),
        (120, 4, 12),
        (60, 3, 12),
        (200, 5, 40),
        (40, 2, 8),
        (36, 3, 9),
    ] {
        let truth = ClusterAssignment::ground_truth(n, k).unwrap();
        let rep = make_d_regular_representation(n, k, d, &truth).unwrap();
        for i in 0..n {
            assert!(
                rep.has_edge(i, i),
                "({n},{k},{d}) node {i} lacks a self-loop"
            );
            assert_eq!(rep.degree(i), d);
            let mut counts = vec![0; k];
            for j in rep.neighbors(i) {
                assert!(rep.has_edge(j, i));
                counts[truth.label(j)] += 1;
            }
            assert!(
                counts.iter().all(|&c| c == d / k),
                "({n},{k},{d}) node {i}: {counts:?}"
            );
        }
    }
}

#[test]
fn d_regular_rejects_infeasible_shapes() {
    let truth = ClusterAssignment::ground_truth(15, 3).unwrap();
    // d/K = 2 is even while N/K = 5 is odd
    assert!(make_d_regular_representation(15, 3, 6, &truth).is_err());
    assert!(make_d_regular_representation(15, 3, 7, &truth).is_err());
}

#[test]
fn sampling_is_reproducible() {
    let truth = ClusterAssignment::ground_truth(60, 3).unwrap();
    let rep = make_d_regular_representation(60, 3, 9, &truth).unwrap();
    let params = RsbmParams::new(0.4, 0.3, 0.2, 0.1).unwrap();
    let a = sample_rsbm(&rep, &truth, &params, 11).unwrap();
    assert_eq!(a, sample_rsbm(&rep, &truth, &params, 11).unwrap());
    assert_ne!(a, sample_rsbm(&rep, &truth, &params, 12).unwrap());
}

/// Node relabeling commutes with both algorithms (up to cluster names).
#[test]
fn algorithms_are_permutation_equivariant() {
    let (n, k, d) = (120, 4, 12);
    let truth = ClusterAssignment::ground_truth(n, k).unwrap();
    let rep = make_d_regular_representation(n, k, d, &truth).unwrap();
    let params = RsbmParams::new(0.4, 0.3, 0.2, 0.1).unwrap();
    for seed in 0..3u64 {
        let sim = sample_rsbm(&rep, &truth, &params, seed).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng(seed + 100);
        for i in (1..n).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        let (sim_p, rep_p) = (sim.permute_nodes(&order), rep.permute_nodes(&order));
        let cfg = KMeansConfig::new(k, seed);
        for normalized in [false, true] {
            let run = |s: &Graph, r: &Graph| {
                let out = if normalized {
                    nrepsc(s, r, k, &cfg)
                } else {
                    urepsc(s, r, k, &cfg)
                };
                out.unwrap().assignment
            };
            let base = run(&sim, &rep);
            let permuted = run(&sim_p, &rep_p);
            let m = misclustering(&base.permute_nodes(&order), &permuted).unwrap();
            assert_eq!(m.misassigned, 0, "seed {seed}");
        }
    }
}
