//! Dense numerical kernels shared by every module: orthonormalization,
//! numeric rank, nullspaces and principal angles, all driven by one
//! [`TolerancePolicy`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// Singular values below `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Principal angles (radians) at or below this count as zero.
    pub angle_tol: f64,
    /// Norm threshold for equation residuals.
    pub residual_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            angle_tol: 1e-6,
            residual_tol: 1e-10,
        }
    }
}

impl TolerancePolicy {
    pub fn new(rank_tol: f64, angle_tol: f64, residual_tol: f64) -> Result<Self> {
        let p = Self {
            rank_tol,
            angle_tol,
            residual_tol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("angle_tol", self.angle_tol),
            ("residual_tol", self.residual_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.rank_tol >= 1.0 {
            return Err(Error::InvalidPolicy(format!(
                "rank_tol must be below 1, got {}",
                self.rank_tol
            )));
        }
        Ok(())
    }
}

/// A rank decision together with the singular values on either side of the
/// cut, so borderline calls can be audited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankEvidence {
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest singular value counted as nonzero.
    pub smallest_kept: Option<f64>,
    /// Largest singular value counted as zero.
    pub largest_dropped: Option<f64>,
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().singular_values()
}

fn rank_from_values(sv: &[f64], policy: &TolerancePolicy) -> RankEvidence {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cut = policy.rank_tol * sigma_max;
    let rank = if sigma_max > 0.0 {
        sv.iter().take_while(|&&s| s > cut).count()
    } else {
        0
    };
    RankEvidence {
        rank,
        sigma_max,
        smallest_kept: rank.checked_sub(1).map(|i| sv[i]),
        largest_dropped: sv.get(rank).copied(),
    }
}

pub fn numeric_rank_with_evidence(m: &DMatrix<f64>, policy: &TolerancePolicy) -> RankEvidence {
    let sv = singular_values(m);
    rank_from_values(sv.as_slice(), policy)
}

pub fn numeric_rank(m: &DMatrix<f64>, policy: &TolerancePolicy) -> usize {
    numeric_rank_with_evidence(m, policy).rank
}

/// Flips the sign of each column so its largest entry (first on ties) is
/// positive; makes bases reproducible across runs.
pub fn canonicalize_signs(q: &mut DMatrix<f64>) {
    for mut col in q.column_iter_mut() {
        let max = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if let Some(x) = col.iter().find(|x| x.abs() >= 0.5 * max && max > 0.0) {
            if *x < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Orthonormal basis (as columns) of the span of the columns of `vectors`.
/// Directions whose singular value falls below `rank_tol * sigma_max` are
/// dropped.
pub fn orthonormalize(vectors: &DMatrix<f64>, policy: &TolerancePolicy) -> DMatrix<f64> {
    orthonormalize_with_evidence(vectors, policy).0
}

pub fn orthonormalize_with_evidence(
    vectors: &DMatrix<f64>,
    policy: &TolerancePolicy,
) -> (DMatrix<f64>, RankEvidence) {
    let d = vectors.nrows();
    if vectors.ncols() == 0 || d == 0 {
        return (DMatrix::zeros(d, 0), rank_from_values(&[], policy));
    }
    let svd = vectors.clone().svd(true, false);
    let ev = rank_from_values(svd.singular_values.as_slice(), policy);
    let u = svd.u.expect("left singular vectors requested");
    let mut q = u.columns(0, ev.rank).into_owned();
    canonicalize_signs(&mut q);
    (q, ev)
}

/// Orthonormalizes columns known to be independent with two passes of
/// Cholesky QR. Returns `None` when the Gram matrix is not numerically
/// positive definite.
pub fn cholesky_orthonormalize(vectors: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = vectors.clone();
    for _ in 0..2 {
        let gram = q.tr_mul(&q);
        let chol = gram.cholesky()?;
        let qt = chol.l().solve_lower_triangular(&q.transpose())?;
        q = qt.transpose();
    }
    Some(q)
}

/// Orthonormal basis of `{x : m x = 0}` as columns.
pub fn nullspace(m: &DMatrix<f64>, policy: &TolerancePolicy) -> DMatrix<f64> {
    nullspace_with_evidence(m, policy).0
}

pub fn nullspace_with_evidence(
    m: &DMatrix<f64>,
    policy: &TolerancePolicy,
) -> (DMatrix<f64>, RankEvidence) {
    let n = m.ncols();
    if n == 0 {
        return (DMatrix::zeros(0, 0), rank_from_values(&[], policy));
    }
    if m.nrows() == 0 {
        return (DMatrix::identity(n, n), rank_from_values(&[], policy));
    }
    // Pad with zero rows so the decomposition returns a full right basis.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let ev = rank_from_values(svd.singular_values.as_slice(), policy);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut basis = DMatrix::zeros(n, n - ev.rank);
    for (j, i) in (ev.rank..n).enumerate() {
        basis.set_column(j, &vt.row(i).transpose());
    }
    canonicalize_signs(&mut basis);
    (basis, ev)
}

/// Principal angles between the spans of two orthonormal column sets, in
/// nondecreasing order. Small angles come from sines and large angles from
/// cosines, so both ends are resolved to working precision.
pub fn principal_angles(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() {
        return Err(Error::AmbientMismatch {
            left: u.nrows(),
            right: v.nrows(),
        });
    }
    if u.ncols() == 0 || v.ncols() == 0 {
        return Ok(Vec::new());
    }
    let (big, small) = if u.ncols() >= v.ncols() {
        (u, v)
    } else {
        (v, u)
    };
    let c = big.tr_mul(small);
    let cosines = singular_values(&c);
    let residual = small - big * &c;
    let mut sines: Vec<f64> = singular_values(&residual).iter().copied().collect();
    sines.reverse();
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&cos, &sin)| {
            if cos * cos >= 0.5 {
                sin.min(1.0).asin()
            } else {
                cos.min(1.0).acos()
            }
        })
        .collect())
}

/// Largest entry of `|Q^T Q - I|`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q) - DMatrix::identity(q.ncols(), q.ncols());
    g.amax()
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

/// Columns of `a` followed by columns of `b`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}
