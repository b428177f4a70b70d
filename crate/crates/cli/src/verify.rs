//! Self-check suite behind `repsc verify`: population oracles, trace
//! identities, matching optimality and the d-regular construction, each at
//! sizes that finish in seconds.

use rand::Rng as _;

use repsc::algorithms::{nrepsc, urepsc};
use repsc::kmeans::KMeansConfig;
use repsc::metrics::{misclustering, normalized_cut, ratio_cut};
use repsc::oracle::{self, Variant};
use repsc::random::rng;
use repsc::rsbm::{make_d_regular_representation, RsbmParams};
use repsc::spectral::{self, laplacian};
use repsc::{ClusterAssignment, Graph, Result};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn standard_params() -> RsbmParams {
    RsbmParams::new(0.4, 0.3, 0.2, 0.1).expect("valid parameters")
}

fn trace(m: &faer::Mat<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn random_instance(seed: u64) -> (Graph, ClusterAssignment) {
    let mut r = rng(seed);
    let n = r.random_range(4..=30);
    let k = r.random_range(2..=n.min(5));
    let g = Graph::from_fn(n, false, |_, _| r.random_bool(0.3));
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { r.random_range(0..k) })
        .collect();
    labels.rotate_left(r.random_range(0..n));
    (
        g,
        ClusterAssignment::new(labels, k).expect("labels in range"),
    )
}

fn trace_identities() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (g, a) = random_instance(seed);
        let l = laplacian(&g);
        let h = a.h_matrix()?;
        let t_rcut = trace(&(h.transpose() * (&l.laplacian * &h)));
        worst = worst.max((ratio_cut(&g, &a)? - t_rcut).abs());
        if let Ok(ncut) = normalized_cut(&g, &a) {
            let t = a.t_matrix(&l.degree)?;
            let t_ncut = trace(&(t.transpose() * (&l.laplacian * &t)));
            worst = worst.max((ncut - t_ncut).abs());
        }
    }
    Ok(check(
        "trace identities",
        worst < 1e-9,
        format!("max |cut - trace| = {worst:.2e} over 50 graphs"),
    ))
}

fn population_oracles() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, k, d) in [(24, 2, 6), (120, 4, 12)] {
        let truth = ClusterAssignment::ground_truth(n, k)?;
        let rep = make_d_regular_representation(n, k, d, &truth)?;
        let witnesses = oracle::constraint_witnesses(&truth)?;
        let residual = spectral::constraint_residual(rep.to_matrix().as_ref(), witnesses.as_ref());
        out.push(check(
            "constraint witnesses",
            residual < 1e-9,
            format!("(N, K, d) = ({n}, {k}, {d}): residual {residual:.2e}"),
        ));

        let model = oracle::expected_adjacency(&rep, &truth, &standard_params())?;
        let closed = oracle::closed_form_eigenvalues(&standard_params(), n, k, d)?;
        let y = oracle::canonical_eigenvectors(n, k)?;
        let ay = &model.expected_adjacency_with_diagonal * &y;
        let mut err: f64 = 0.0;
        for c in 0..k {
            let lambda = if c == 0 {
                closed.lambda_1
            } else {
                closed.lambda_shared
            };
            for i in 0..n {
                err = err.max((ay[(i, c)] - lambda * y[(i, c)]).abs());
            }
        }
        out.push(check(
            "closed-form eigenpairs",
            err < 1e-8,
            format!("(N, K, d) = ({n}, {k}, {d}): max error {err:.2e}"),
        ));
        let ortho = spectral::orthonormality_error(y.as_ref());
        out.push(check(
            "canonical eigenvectors orthonormal",
            ortho < 1e-12,
            format!("(N, K) = ({n}, {k}): {ortho:.2e}"),
        ));
    }
    Ok(out)
}

fn population_recovery() -> Result<Vec<Check>> {
    let (n, k, d) = (120, 4, 12);
    let truth = ClusterAssignment::ground_truth(n, k)?;
    let rep = make_d_regular_representation(n, k, d, &truth)?;
    let model = oracle::expected_adjacency(&rep, &truth, &standard_params())?;
    let cfg = KMeansConfig::new(k, 0);
    let u = urepsc(&model.expected_adjacency, &rep, k, &cfg)?;
    let nz = nrepsc(&model.expected_adjacency, &rep, k, &cfg)?;
    let mu = misclustering(&truth, &u.assignment)?.fraction;
    let mn = misclustering(&truth, &nz.assignment)?.fraction;
    let gap = oracle::population_eigengap(&rep, &truth, &standard_params(), Variant::Unnormalized)?;
    Ok(vec![
        check(
            "population recovery",
            mu == 0.0 && mn == 0.0,
            format!("(N, K, d) = ({n}, {k}, {d}): M = {mu} (URepSC), {mn} (NRepSC)"),
        ),
        check(
            "population eigengap",
            gap.gamma > 1e-9,
            format!("gamma = {:.4}, lambda_1 = {:.4}", gap.gamma, gap.lambda_1),
        ),
    ])
}

fn brute_force_mistakes(truth: &[usize], pred: &[usize], k: usize) -> usize {
    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    permutations(k)
        .iter()
        .map(|perm| {
            truth
                .iter()
                .zip(pred)
                .filter(|(&t, &p)| perm[p] != t)
                .count()
        })
        .min()
        .unwrap_or(0)
}

fn matching() -> Result<Check> {
    let mut r = rng(7);
    let mut bad = 0;
    for _ in 0..100 {
        let k = r.random_range(2..=5);
        let n = r.random_range(k..=40);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let got = misclustering(
            &ClusterAssignment::new(truth.clone(), k)?,
            &ClusterAssignment::new(pred.clone(), k)?,
        )?;
        if got.misassigned != brute_force_mistakes(&truth, &pred, k) {
            bad += 1;
        }
    }
    Ok(check(
        "optimal label matching",
        bad == 0,
        format!("{bad} of 100 instances differ from brute force"),
    ))
}

fn d_regular() -> Result<Check> {
    let mut failures = Vec::new();
    for (n, k, d) in [
        (24, 2, 6),
        (12, 3, 3),
        (120, 4, 12),
        (60, 3, 12),
        (200, 5, 40),
    ] {
        let truth = ClusterAssignment::ground_truth(n, k)?;
        let rep = make_d_regular_representation(n, k, d, &truth)?;
        let ok = (0..n).all(|i| {
            let mut counts = vec![0; k];
            for j in rep.neighbors(i) {
                counts[truth.label(j)] += 1;
            }
            rep.has_edge(i, i) && counts.iter().all(|&c| c == d / k)
        });
        if !ok {
            failures.push(format!("({n}, {k}, {d})"));
        }
    }
    Ok(check(
        "d-regular construction",
        failures.is_empty(),
        if failures.is_empty() {
            "all shapes have d/K representatives per cluster".into()
        } else {
            format!("bad shapes: {}", failures.join(", "))
        },
    ))
}

/// Runs every check. Errors mean a check could not run at all.
pub fn run_checks() -> Result<Vec<Check>> {
    let mut out = vec![trace_identities()?];
    out.extend(population_oracles()?);
    out.extend(population_recovery()?);
    out.push(matching()?);
    out.push(d_regular()?);
    Ok(out)
}
