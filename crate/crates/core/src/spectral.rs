//! Dense linear algebra: Laplacians, the null-space basis of the
//! representation constraint, symmetric eigensolvers, SPD square roots and
//! low-rank approximation.
//!
//! Everything is 64-bit and goes through faer's dense decompositions.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// `L = D - A` together with the degrees and, when every degree is positive,
/// `L_norm = I - D^{-1/2} A D^{-1/2}`.
#[derive(Clone, Debug)]
pub struct LaplacianBundle {
    pub laplacian: Mat<f64>,
    pub degree: Vec<f64>,
    pub normalized: Option<Mat<f64>>,
}

impl LaplacianBundle {
    pub fn min_degree(&self) -> f64 {
        self.degree.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn laplacian(similarity: &impl Adjacency) -> LaplacianBundle {
    laplacian_from_matrix(similarity.to_dense().as_ref())
}

pub fn laplacian_from_matrix(a: MatRef<'_, f64>) -> LaplacianBundle {
    let n = a.nrows();
    let degree: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).sum()).collect();
    let laplacian = Mat::from_fn(n, n, |i, j| {
        if i == j {
            degree[i] - a[(i, j)]
        } else {
            -a[(i, j)]
        }
    });
    let normalized = degree.iter().all(|&d| d > 0.0).then(|| {
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        Mat::from_fn(n, n, |i, j| {
            let scaled = a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            if i == j {
                1.0 - scaled
            } else {
                -scaled
            }
        })
    });
    LaplacianBundle {
        laplacian,
        degree,
        normalized,
    }
}

/// `R (I - 11ᵀ/N)`, i.e. R with each row's mean subtracted.
pub fn constraint_operator(rep: MatRef<'_, f64>) -> Mat<f64> {
    let n = rep.nrows();
    let row_means: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| rep[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    Mat::from_fn(n, n, |i, j| rep[(i, j)] - row_means[i])
}

/// `max |R (I - 11ᵀ/N) X|` over all entries.
pub fn constraint_residual(rep: MatRef<'_, f64>, x: MatRef<'_, f64>) -> f64 {
    let n = x.nrows();
    let centered = Mat::from_fn(n, x.ncols(), |i, k| {
        let mean = (0..n).map(|r| x[(r, k)]).sum::<f64>() / n as f64;
        x[(i, k)] - mean
    });
    max_abs((rep * &centered).as_ref())
}

/// Orthonormal basis Y of the null space of `R (I - 11ᵀ/N)`.
#[derive(Clone, Debug)]
pub struct NullSpaceBasis {
    /// N × (N − r) with orthonormal columns.
    pub basis: Mat<f64>,
    /// Numerical rank r of the constraint operator.
    pub rank_constraint: usize,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.basis.nrows()
    }
}

/// Null space of the constraint operator from a full SVD. Singular values at
/// or below `N * eps * sigma_max` count as zero.
pub fn constraint_null_basis(representation: &impl Adjacency) -> Result<NullSpaceBasis> {
    let rep = representation.to_dense();
    let n = rep.nrows();
    let op = constraint_operator(rep.as_ref());
    let svd = op
        .svd()
        .map_err(|e| Error::Numerical(format!("SVD of constraint operator failed: {e:?}")))?;
    let sigma = svd.S().column_vector();
    let sigma_max = if n > 0 { sigma[0] } else { 0.0 };
    let tol = n as f64 * f64::EPSILON * sigma_max;
    let rank = (0..n).filter(|&i| sigma[i] > tol).count();
    let basis = svd.V().subcols(rank, n - rank).to_owned();
    Ok(NullSpaceBasis {
        basis,
        rank_constraint: rank,
    })
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

fn check_symmetric(m: MatRef<'_, f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::config("matrix is not square"));
    }
    let n = m.nrows();
    let scale = max_abs(m).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::config(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Makes the first entry with magnitude above 1e-12 positive in each column.
fn fix_signs(vectors: &mut Mat<f64>) {
    for k in 0..vectors.ncols() {
        let flip = (0..vectors.nrows())
            .map(|i| vectors[(i, k)])
            .find(|v| v.abs() > 1e-12)
            .is_some_and(|v| v < 0.0);
        if flip {
            for i in 0..vectors.nrows() {
                vectors[(i, k)] = -vectors[(i, k)];
            }
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, ascending, with the sign
/// convention applied.
pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<Eigenpairs> {
    check_symmetric(m)?;
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let u = evd.U();
    let mut vectors = Mat::from_fn(n, n, |i, k| u[(i, order[k])]);
    fix_signs(&mut vectors);
    Ok(Eigenpairs {
        values: order.iter().map(|&k| s[k]).collect(),
        vectors,
    })
}

/// The `count` smallest eigenpairs of a symmetric matrix.
pub fn smallest_eigenpairs(m: MatRef<'_, f64>, count: usize) -> Result<Eigenpairs> {
    if count > m.nrows() {
        return Err(Error::config(format!(
            "requested {count} eigenpairs of a {0}x{0} matrix",
            m.nrows()
        )));
    }
    let full = symmetric_eigen(m)?;
    Ok(Eigenpairs {
        values: full.values[..count].to_vec(),
        vectors: full.vectors.subcols(0, count).to_owned(),
    })
}

/// `Q` and `Q⁻¹` for `Q = sqrt(M)` with M symmetric positive definite.
pub struct SpdSqrt {
    pub sqrt: Mat<f64>,
    pub inv_sqrt: Mat<f64>,
}

pub fn spd_sqrt(m: MatRef<'_, f64>) -> Result<SpdSqrt> {
    let eig = symmetric_eigen(m)?;
    let n = m.nrows();
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).abs();
    let tol = n as f64 * f64::EPSILON * lambda_max.max(f64::MIN_POSITIVE);
    let min = eig.values.first().copied().unwrap_or(0.0);
    if n == 0 || min <= tol {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let u = &eig.vectors;
    let scaled = |f: &dyn Fn(f64) -> f64| {
        let us = Mat::from_fn(n, n, |i, k| u[(i, k)] * f(eig.values[k]));
        symmetrize(&(&us * u.transpose()))
    };
    Ok(SpdSqrt {
        sqrt: scaled(&|l| l.sqrt()),
        inv_sqrt: scaled(&|l| 1.0 / l.sqrt()),
    })
}

/// Symmetric square root of a symmetric positive-definite matrix.
pub fn matrix_sqrt_spd(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    spd_sqrt(m).map(|q| q.sqrt)
}

/// Best rank-`rank` symmetric approximation in Frobenius norm: keeps the
/// eigenpairs of largest |eigenvalue|.
pub fn low_rank_approximation(representation: &impl Adjacency, rank: usize) -> Result<Mat<f64>> {
    let r = representation.to_dense();
    let n = r.nrows();
    if rank == 0 || rank > n {
        return Err(Error::config(format!(
            "approximation rank {rank} must lie in 1..={n}"
        )));
    }
    let eig = symmetric_eigen(r.as_ref())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].abs().total_cmp(&eig.values[a].abs()));
    let keep = &order[..rank];
    let v = Mat::from_fn(n, rank, |i, k| eig.vectors[(i, keep[k])]);
    let vl = Mat::from_fn(n, rank, |i, k| v[(i, k)] * eig.values[keep[k]]);
    Ok(symmetrize(&(&vl * v.transpose())))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].abs());
        }
    }
    worst
}

/// `|| X^T X - I ||_max`.
pub fn orthonormality_error(x: MatRef<'_, f64>) -> f64 {
    let gram = x.transpose() * x;
    let k = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}
