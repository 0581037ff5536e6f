//! Subspaces of a finite-dimensional real space, stored as orthonormal
//! column bases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, cholesky_orthonormalize, hstack, nullspace_with_evidence, orthonormality_defect,
    orthonormalize, principal_angles, RankEvidence, TolerancePolicy,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Coordinate subspace spanned by `e_start, ..., e_{start+len-1}`.
    pub fn coordinate(ambient_dim: usize, start: usize, len: usize) -> Result<Self> {
        if start + len > ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "coordinates {start}..{} exceed ambient dimension {ambient_dim}",
                start + len
            )));
        }
        let mut basis = DMatrix::zeros(ambient_dim, len);
        for j in 0..len {
            basis[(start + j, j)] = 1.0;
        }
        Ok(Self { ambient_dim, basis })
    }

    /// Span of the columns of `vectors`.
    pub fn span(vectors: &DMatrix<f64>, policy: &TolerancePolicy) -> Self {
        Self {
            ambient_dim: vectors.nrows(),
            basis: orthonormalize(vectors, policy),
        }
    }

    /// Span of columns known to be linearly independent. Falls back to the
    /// rank-revealing path if the columns turn out to be dependent.
    pub fn span_independent(vectors: &DMatrix<f64>, policy: &TolerancePolicy) -> Self {
        match cholesky_orthonormalize(vectors) {
            Some(basis) => Self {
                ambient_dim: vectors.nrows(),
                basis,
            },
            None => Self::span(vectors, policy),
        }
    }

    /// Wraps a basis that is already orthonormal, checking it.
    pub fn from_orthonormal(basis: DMatrix<f64>, policy: &TolerancePolicy) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis vectors in dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let defect = orthonormality_defect(&basis);
        if defect > policy.residual_tol.max(1e-12) {
            return Err(Error::PropertyViolation {
                clause: "orthonormal basis".into(),
                detail: format!("Gram defect {defect:e}"),
            });
        }
        Ok(Self {
            ambient_dim: basis.nrows(),
            basis,
        })
    }

    /// For bases orthonormal by construction.
    pub(crate) fn from_orthonormal_unchecked(basis: DMatrix<f64>) -> Self {
        Self {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `||v - P v||`, the distance of `v` from the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        let coeffs = self.basis.tr_mul(v);
        (v - &self.basis * coeffs).norm()
    }

    /// `self ⊕ other` inside the direct sum of the ambient spaces.
    pub fn direct_sum(&self, other: &Subspace) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim + other.ambient_dim,
            basis: linalg::block_diag(&self.basis, &other.basis),
        }
    }

    /// Image under a linear map of the ambient space.
    pub fn image(&self, map: &DMatrix<f64>, policy: &TolerancePolicy) -> Result<Subspace> {
        if map.ncols() != self.ambient_dim {
            return Err(Error::AmbientMismatch {
                left: map.ncols(),
                right: self.ambient_dim,
            });
        }
        Ok(Subspace::span(&(map * &self.basis), policy))
    }
}

fn same_ambient(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient_dim != v.ambient_dim {
        return Err(Error::AmbientMismatch {
            left: u.ambient_dim,
            right: v.ambient_dim,
        });
    }
    Ok(())
}

/// `U ∩ V` as the kernel of the adding map `(a, b) ↦ Q_U a - Q_V b`.
pub fn intersect_with_evidence(
    u: &Subspace,
    v: &Subspace,
    policy: &TolerancePolicy,
) -> Result<(Subspace, RankEvidence)> {
    same_ambient(u, v)?;
    let d = u.ambient_dim;
    if u.is_zero() || v.is_zero() {
        let ev = RankEvidence {
            rank: u.dim() + v.dim(),
            sigma_max: 1.0,
            smallest_kept: (u.dim() + v.dim() > 0).then_some(1.0),
            largest_dropped: None,
        };
        return Ok((Subspace::zero(d), ev));
    }
    let adding = hstack(&u.basis, &(-&v.basis));
    let (kernel, ev) = nullspace_with_evidence(&adding, policy);
    let k = kernel.ncols();
    if k == 0 {
        return Ok((Subspace::zero(d), ev));
    }
    let a = kernel.rows(0, u.dim());
    let b = kernel.rows(u.dim(), v.dim());
    let w = &u.basis * a + &v.basis * b;
    let svd = w.svd(true, false);
    let mut basis = svd.u.unwrap().columns(0, k).into_owned();
    linalg::canonicalize_signs(&mut basis);
    Ok((
        Subspace {
            ambient_dim: d,
            basis,
        },
        ev,
    ))
}

pub fn intersect(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<Subspace> {
    Ok(intersect_with_evidence(u, v, policy)?.0)
}

pub fn sum(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<Subspace> {
    same_ambient(u, v)?;
    if u.is_zero() {
        return Ok(v.clone());
    }
    if v.is_zero() {
        return Ok(u.clone());
    }
    Ok(Subspace::span(&hstack(&u.basis, &v.basis), policy))
}

/// Orthogonal complement in the ambient space.
pub fn complement(u: &Subspace, policy: &TolerancePolicy) -> Subspace {
    let d = u.ambient_dim;
    if u.is_zero() {
        return Subspace::full(d);
    }
    if u.dim() == d {
        return Subspace::zero(d);
    }
    let (kernel, _) = nullspace_with_evidence(&u.basis.transpose(), policy);
    Subspace {
        ambient_dim: d,
        basis: kernel,
    }
}

/// Whether `V ⊆ U`: every principal angle of `V` against `U` is within
/// `angle_tol`.
pub fn contains(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<bool> {
    same_ambient(u, v)?;
    if v.is_zero() {
        return Ok(true);
    }
    if v.dim() > u.dim() {
        return Ok(false);
    }
    Ok(principal_angles(&u.basis, &v.basis)?
        .iter()
        .all(|a| *a <= policy.angle_tol))
}

pub fn equal(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<bool> {
    Ok(u.dim() == v.dim() && contains(u, v, policy)? && contains(v, u, policy)?)
}

/// Number of principal angles between `U` and `V` at or below `angle_tol`.
pub fn zero_angle_count(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<usize> {
    same_ambient(u, v)?;
    Ok(principal_angles(&u.basis, &v.basis)?
        .iter()
        .filter(|a| **a <= policy.angle_tol)
        .count())
}

/// Smallest principal angle, or `None` when either subspace is zero.
pub fn min_angle(u: &Subspace, v: &Subspace) -> Result<Option<f64>> {
    same_ambient(u, v)?;
    Ok(principal_angles(&u.basis, &v.basis)?.first().copied())
}

/// `dim(U ∩ V) - dim((U + V)^⊥)`, the index of the adding map.
pub fn fredholm_index(u: &Subspace, v: &Subspace, policy: &TolerancePolicy) -> Result<i64> {
    let cap = intersect(u, v, policy)?.dim() as i64;
    let perp = (u.ambient_dim - sum(u, v, policy)?.dim()) as i64;
    Ok(cap - perp)
}
