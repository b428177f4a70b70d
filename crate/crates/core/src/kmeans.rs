//! k-means on embedding rows: D²-weighted seeding, Lloyd iterations and
//! best-of-restarts selection.

use faer::{Mat, MatRef};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::ClusterAssignment;
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    pub n_restarts: usize,
    pub max_iterations: usize,
    /// Lloyd stops once no centroid moves farther than this.
    pub convergence_tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    /// 50 restarts, 300 iterations, tolerance 1e-9.
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        Self {
            n_clusters,
            n_restarts: 50,
            max_iterations: 300,
            convergence_tol: 1e-9,
            seed,
        }
    }

    pub fn with_clusters(&self, n_clusters: usize) -> Self {
        Self {
            n_clusters,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::config("k-means needs at least one cluster"));
        }
        if self.n_restarts == 0 {
            return Err(Error::config("n_restarts must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return Err(Error::config("convergence_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Row-major copy of the points, which keeps the distance loops tight.
struct Points {
    data: Vec<f64>,
    n: usize,
    dim: usize,
}

impl Points {
    fn from_mat(m: MatRef<'_, f64>) -> Self {
        let (n, dim) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            for j in 0..dim {
                data.push(m[(i, j)]);
            }
        }
        Self { data, n, dim }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Outcome of one Lloyd run.
#[derive(Clone, Debug)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    /// K × dim, row-major.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step.
    pub history: Vec<f64>,
}

/// Best run over all restarts.
#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub inertia: f64,
    pub restart: usize,
    pub iterations: usize,
}

fn seed_centroids(points: &Points, k: usize, rng: &mut random::Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * points.dim);
    let first = rng.random_range(0..points.n);
    centroids.extend_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..points.n)
        .map(|i| sq_dist(points.row(i), points.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.n)
        };
        let c = points.row(pick);
        centroids.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), c));
        }
    }
    centroids
}

/// Assigns every point to its nearest centroid (lowest index on ties).
/// Returns the squared distance of each point.
fn assign(points: &Points, centroids: &[f64], k: usize, labels: &mut [usize]) -> Vec<f64> {
    let dim = points.dim;
    (0..points.n)
        .map(|i| {
            let x = points.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(x, &centroids[c * dim..(c + 1) * dim]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            labels[i] = best.0;
            best.1
        })
        .collect()
}

fn means(points: &Points, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let dim = points.dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for s in &mut sums[c * dim..(c + 1) * dim] {
                *s /= counts[c] as f64;
            }
        }
    }
    (sums, counts)
}

fn lloyd_from(
    points: &Points,
    mut centroids: Vec<f64>,
    k: usize,
    max_iterations: usize,
    tol: f64,
) -> LloydRun {
    let dim = points.dim;
    let mut labels = vec![0; points.n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iterations {
        iterations += 1;
        let mut dist = assign(points, &centroids, k, &mut labels);
        history.push(dist.iter().sum());
        let (mut next, mut counts) = means(points, &labels, k);
        // an empty cluster takes over the point farthest from its centroid
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                counts[c] += 1;
                labels[i] = c;
                dist[i] = 0.0;
                next[c * dim..(c + 1) * dim].copy_from_slice(points.row(i));
            }
        }
        let movement = (0..k)
            .map(|c| {
                sq_dist(
                    &centroids[c * dim..(c + 1) * dim],
                    &next[c * dim..(c + 1) * dim],
                )
                .sqrt()
            })
            .fold(0.0, f64::max);
        centroids = next;
        if movement <= tol {
            break;
        }
    }
    let dist = assign(points, &centroids, k, &mut labels);
    history.push(dist.iter().sum());
    ensure_nonempty(points, &mut labels, &dist, k);
    let (centroids, _) = means(points, &labels, k);
    let inertia = (0..points.n)
        .map(|i| {
            sq_dist(
                points.row(i),
                &centroids[labels[i] * dim..(labels[i] + 1) * dim],
            )
        })
        .sum();
    LloydRun {
        labels,
        centroids,
        inertia,
        iterations,
        history,
    }
}

/// Moves far-away points into empty clusters until every cluster is used.
fn ensure_nonempty(points: &Points, labels: &mut [usize], dist: &[f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    let mut taken = vec![false; points.n];
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..points.n)
            .filter(|&i| !taken[i] && counts[labels[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
        if let Some(i) = far {
            counts[labels[i]] -= 1;
            counts[c] += 1;
            labels[i] = c;
            taken[i] = true;
        }
    }
}

/// A single seeded Lloyd run; exposed so callers can inspect its history.
pub fn lloyd(points: MatRef<'_, f64>, config: &KMeansConfig, restart: usize) -> Result<LloydRun> {
    config.validate()?;
    if points.nrows() < config.n_clusters {
        return Err(Error::config(format!(
            "cannot form {} clusters from {} points",
            config.n_clusters,
            points.nrows()
        )));
    }
    let pts = Points::from_mat(points);
    Ok(run_restart(&pts, config, restart))
}

fn run_restart(points: &Points, config: &KMeansConfig, restart: usize) -> LloydRun {
    let mut rng = random::rng(random::derive_seed(config.seed, restart as u64));
    let init = seed_centroids(points, config.n_clusters, &mut rng);
    lloyd_from(
        points,
        init,
        config.n_clusters,
        config.max_iterations,
        config.convergence_tol,
    )
}

/// Best-of-restarts k-means. Ties in inertia go to the lowest restart index.
pub fn kmeans(points: MatRef<'_, f64>, config: &KMeansConfig) -> Result<KMeansResult> {
    config.validate()?;
    if points.nrows() < config.n_clusters {
        return Err(Error::config(format!(
            "cannot form {} clusters from {} points",
            config.n_clusters,
            points.nrows()
        )));
    }
    let pts = Points::from_mat(points);
    let runs: Vec<LloydRun> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(&pts, config, r))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.inertia < a.1.inertia { b } else { a })
        .expect("at least one restart");
    Ok(KMeansResult {
        assignment: ClusterAssignment::new(best.labels, config.n_clusters)?,
        inertia: best.inertia,
        restart,
        iterations: best.iterations,
    })
}

/// Clusters the rows of `points`; returns the assignment and its inertia.
pub fn cluster_rows(
    points: MatRef<'_, f64>,
    config: &KMeansConfig,
) -> Result<(ClusterAssignment, f64)> {
    kmeans(points, config).map(|r| (r.assignment, r.inertia))
}

/// Rows scaled to unit length, plus the number of (near-)zero rows that were
/// passed through unchanged.
#[derive(Clone, Debug)]
pub struct NormalizedRows {
    pub rows: Mat<f64>,
    pub zero_rows: usize,
}

pub fn normalize_rows(points: MatRef<'_, f64>) -> NormalizedRows {
    let mut rows = points.to_owned();
    let mut zero_rows = 0;
    for i in 0..rows.nrows() {
        let norm = (0..rows.ncols())
            .map(|j| rows[(i, j)] * rows[(i, j)])
            .sum::<f64>()
            .sqrt();
        if norm > 1e-12 {
            for j in 0..rows.ncols() {
                rows[(i, j)] /= norm;
            }
        } else {
            zero_rows += 1;
        }
    }
    if zero_rows > 0 {
        log::warn!("{zero_rows} embedding rows have zero norm and were left unnormalized");
    }
    NormalizedRows { rows, zero_rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Mat<f64> {
        Mat::from_fn(values.len(), 1, |i, _| values[i])
    }

    /// Exhaustive minimum inertia over all 2-partitions of 1-d points.
    fn brute_force_two_means(values: &[f64]) -> f64 {
        let n = values.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<f64> = (0..n)
                    .filter(|&i| ((mask >> i) & 1 == 1) == side)
                    .map(|i| values[i])
                    .collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn six_points_on_a_line() {
        let values = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
        let optimum = brute_force_two_means(&values);
        assert!((optimum - 0.04).abs() < 1e-12);
        let (assignment, inertia) =
            cluster_rows(column(&values).as_ref(), &KMeansConfig::new(2, 1)).unwrap();
        let l = assignment.labels();
        assert!(l[0] == l[1] && l[1] == l[2]);
        assert!(l[3] == l[4] && l[4] == l[5]);
        assert_ne!(l[0], l[3]);
        assert!((inertia - optimum).abs() < 1e-12);
    }

    #[test]
    fn identical_points_single_cluster() {
        let pts = Mat::from_fn(5, 2, |_, j| j as f64);
        let (a, inertia) = cluster_rows(pts.as_ref(), &KMeansConfig::new(1, 0)).unwrap();
        assert_eq!(inertia, 0.0);
        assert!(a.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let pts = Mat::from_fn(5, 2, |_, _| 1.0);
        let (a, inertia) = cluster_rows(pts.as_ref(), &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(inertia, 0.0);
        assert!(a.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn separated_clouds() {
        let offsets = [[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]];
        let jitter = [[0.1, 0.0], [-0.1, 0.0], [0.0, 0.2], [0.0, -0.2]];
        let pts = Mat::from_fn(12, 2, |i, j| offsets[i / 4][j] + jitter[i % 4][j]);
        let (a, inertia) = cluster_rows(pts.as_ref(), &KMeansConfig::new(3, 9)).unwrap();
        for c in 0..3 {
            let l = a.label(4 * c);
            assert!((4 * c..4 * c + 4).all(|i| a.label(i) == l));
        }
        let scatter = 3.0 * (0.01 + 0.01 + 0.04 + 0.04);
        assert!((inertia - scatter).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let pts = column(&[1.0, 2.0]);
        assert!(matches!(
            cluster_rows(pts.as_ref(), &KMeansConfig::new(3, 0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        use rand::Rng;
        let mut rng = random::rng(3);
        let pts = Mat::from_fn(60, 3, |_, _| rng.random::<f64>());
        let cfg = KMeansConfig::new(4, 17);
        let a = kmeans(pts.as_ref(), &cfg).unwrap();
        let b = kmeans(pts.as_ref(), &cfg).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
        assert_eq!(a.restart, b.restart);
    }

    #[test]
    fn normalize_rows_cases() {
        let m = Mat::from_fn(3, 2, |i, j| [[3.0, 4.0], [1.0, 0.0], [0.0, 0.0]][i][j]);
        let out = normalize_rows(m.as_ref());
        assert!((out.rows[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((out.rows[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(out.rows[(1, 0)], 1.0);
        assert_eq!(out.rows[(2, 0)], 0.0);
        assert_eq!(out.rows[(2, 1)], 0.0);
        assert_eq!(out.zero_rows, 1);
    }
}
