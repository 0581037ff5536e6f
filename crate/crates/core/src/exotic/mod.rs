//! The exotic systems `S_{w,N}`: an upper-bidiagonal block operator `T` built
//! from weighted backward shifts and a unilateral shift, its graph perturbed
//! by one vector, and the certificates that separate it from every operator
//! system.
//!
//! Index conventions: `K` has `N + 1` blocks of length `M`; block `b`
//! (1-based) position `r` (1-based) is coordinate `(b - 1) M + r - 1`. The
//! distinguished vector `e` is `e_1` of the last block.

mod angles;
mod certificate;
mod evidence;
mod lazy;
mod witnesses;

use std::ops::Mul;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::TolerancePolicy;
use crate::subspaces::Subspace;
use crate::systems::FourSystem;
use crate::weights::{ScheduleRecord, WeightFamily, MAX_SHIFT_INDEX};

pub use angles::{e3_e4_angle_bound, e3_e4_principal_angles, AngleBound, AngleSpectrum};
pub use certificate::{
    defect_exotic, verify_exotic, DefectLedger, ExoticCertificate, LedgerEntry, StructuralZero,
};
pub use evidence::{
    a12_divergence, endomorphisms_reduced, idempotent_lemma_check, indecomposability_evidence,
    point_spectrum_witness, A12Divergence, CascadeCheck, EigenWitness, IdempotentLemmaReport,
    IndecomposabilityEvidence,
};
pub use lazy::{
    constant_family, geometric_family, l2_membership_test, solve_fixed_point, Envelope, L2Verdict,
    LazyVector, MembershipReport,
};
pub use witnesses::{
    basis_e2_cap_e3, e3_cap_e4_blocks, exact_basis_e1_cap_e3, exact_basis_e3_cap_e4, Witness,
    WitnessForm,
};

pub const DEFAULT_TRUNCATION: usize = 256;
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// One concrete `S_{w,N}` together with its truncation length.
#[derive(Debug, Clone)]
pub struct ExoticSpec {
    n_blocks: usize,
    truncation: usize,
    family: WeightFamily,
    policy: TolerancePolicy,
    tail_eps: f64,
    /// `weights[j - 1][k - 1] = w_j(k)` for `k <= M + 1`.
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecRecord {
    pub n_blocks: usize,
    pub truncation: usize,
    pub tail_eps: f64,
    pub policy: TolerancePolicy,
    pub schedule: ScheduleRecord,
}

impl ExoticSpec {
    pub fn new(
        n_blocks: usize,
        truncation: usize,
        policy: TolerancePolicy,
        tail_eps: f64,
    ) -> Result<Self> {
        let family = WeightFamily::covering(truncation as u64 + 1)?;
        Self::with_family(n_blocks, truncation, family, policy, tail_eps)
    }

    pub fn with_family(
        n_blocks: usize,
        truncation: usize,
        family: WeightFamily,
        policy: TolerancePolicy,
        tail_eps: f64,
    ) -> Result<Self> {
        policy.validate()?;
        if n_blocks == 0 || n_blocks > MAX_SHIFT_INDEX {
            return Err(Error::InvalidSpec(format!(
                "number of blocks must lie in 1..={MAX_SHIFT_INDEX}, got {n_blocks}"
            )));
        }
        if truncation < n_blocks + 2 {
            return Err(Error::InvalidSpec(format!(
                "truncation M = {truncation} must be at least N + 2 = {}",
                n_blocks + 2
            )));
        }
        if !(tail_eps.is_finite() && tail_eps > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "tail_eps must be positive, got {tail_eps}"
            )));
        }
        let covered = family.schedule().covered();
        if covered < truncation as u64 + 1 {
            return Err(Error::ScheduleTooShort {
                k: truncation as u64 + 1,
                covered,
            });
        }
        let mut weights = Vec::with_capacity(n_blocks);
        for j in 1..=n_blocks {
            let row = (1..=truncation as u64 + 1)
                .map(|k| family.w_value(j, k))
                .collect::<Result<Vec<_>>>()?;
            weights.push(row);
        }
        Ok(Self {
            n_blocks,
            truncation,
            family,
            policy,
            tail_eps,
            weights,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn policy(&self) -> &TolerancePolicy {
        &self.policy
    }

    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    /// `w_j(k)` for `1 <= j <= N`, `1 <= k <= M + 1`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.weights[j - 1][k - 1]
    }

    pub fn weight_row(&self, j: usize) -> &[f64] {
        &self.weights[j - 1]
    }

    /// `dim K = (N + 1) M`.
    pub fn k_dim(&self) -> usize {
        (self.n_blocks + 1) * self.truncation
    }

    pub fn index(&self, block: usize, pos: usize) -> usize {
        (block - 1) * self.truncation + pos - 1
    }

    /// Coordinate of `e` inside `K`.
    pub fn e_index(&self) -> usize {
        self.index(self.n_blocks + 1, 1)
    }

    /// Same family and policy at another truncation length.
    pub fn at_truncation(&self, truncation: usize) -> Result<Self> {
        let family = if self.family.schedule().covered() > truncation as u64 {
            self.family.clone()
        } else {
            WeightFamily::covering(truncation as u64 + 1)?
        };
        Self::with_family(
            self.n_blocks,
            truncation,
            family,
            self.policy,
            self.tail_eps,
        )
    }

    pub fn record(&self) -> SpecRecord {
        SpecRecord {
            n_blocks: self.n_blocks,
            truncation: self.truncation,
            tail_eps: self.tail_eps,
            policy: self.policy,
            schedule: self.family.schedule().record(),
        }
    }
}

/// `(B_w x)(n) = w(n) x(n+1)`; the output is one entry shorter than `x`.
pub fn backward_shift_apply<T>(w: impl Fn(usize) -> f64, x: &[T]) -> Vec<T>
where
    T: Copy + Mul<f64, Output = T>,
{
    (1..x.len()).map(|n| x[n] * w(n)).collect()
}

/// `T_M x` without forming the matrix.
pub fn apply_t(spec: &ExoticSpec, x: &[f64]) -> Vec<f64> {
    let (n, m) = (spec.n_blocks, spec.truncation);
    assert_eq!(x.len(), spec.k_dim());
    let mut out = vec![0.0; x.len()];
    for j in 1..=n {
        let w = spec.weight_row(j);
        let base = (j - 1) * m;
        for r in 0..m {
            let mut v = x[base + m + r];
            if r + 1 < m {
                v += w[r] * x[base + r + 1];
            }
            out[base + r] = v;
        }
    }
    let base = n * m;
    for r in 1..m {
        out[base + r] = x[base + r - 1];
    }
    out
}

/// `T_Mᵀ x`.
pub fn apply_t_transpose(spec: &ExoticSpec, x: &[f64]) -> Vec<f64> {
    let (n, m) = (spec.n_blocks, spec.truncation);
    assert_eq!(x.len(), spec.k_dim());
    let mut out = vec![0.0; x.len()];
    for j in 1..=n {
        let w = spec.weight_row(j);
        let base = (j - 1) * m;
        for r in 0..m {
            if r + 1 < m {
                out[base + r + 1] += w[r] * x[base + r];
            }
            out[base + m + r] += x[base + r];
        }
    }
    let base = n * m;
    for r in 1..m {
        out[base + r - 1] += x[base + r];
    }
    out
}

/// Nonzero entries `(row, col, value)` of `T_M` in row-major order.
pub fn t_entries(spec: &ExoticSpec) -> Vec<(usize, usize, f64)> {
    let (n, m) = (spec.n_blocks, spec.truncation);
    let mut out = Vec::new();
    for j in 1..=n {
        let base = (j - 1) * m;
        for r in 0..m {
            if r + 1 < m {
                out.push((base + r, base + r + 1, spec.weight(j, r + 1)));
            }
            out.push((base + r, base + m + r, 1.0));
        }
    }
    let base = n * m;
    for r in 1..m {
        out.push((base + r, base + r - 1, 1.0));
    }
    out
}

/// Dense `T_M`, the top-left `M x M` compression of every block.
pub fn build_t(spec: &ExoticSpec) -> DMatrix<f64> {
    let d = spec.k_dim();
    let mut t = DMatrix::zeros(d, d);
    for (r, c, v) in t_entries(spec) {
        t[(r, c)] = v;
    }
    t
}

/// Orthonormal basis `V L^{-T}` of `E_3 = span [I 0; T e]`, where
/// `LLᵀ = VᵀV = [I + TᵀT, Tᵀe; eᵀT, 1]` is assembled from the sparse `T`.
/// `None` if the Gram matrix is numerically singular.
fn e3_basis(spec: &ExoticSpec) -> Option<DMatrix<f64>> {
    let d = spec.k_dim();
    let e = spec.e_index();
    let entries = t_entries(spec);
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for &(r, c, v) in &entries {
        by_row[r].push((c, v));
    }
    let mut g = DMatrix::<f64>::identity(d + 1, d + 1);
    for row in &by_row {
        for &(a, va) in row {
            for &(b, vb) in row {
                g[(a, b)] += va * vb;
            }
        }
    }
    for &(c, v) in &by_row[e] {
        g[(c, d)] += v;
        g[(d, c)] += v;
    }
    let l = g.cholesky()?.unpack();
    let w = l
        .solve_lower_triangular(&DMatrix::identity(d + 1, d + 1))?
        .transpose();
    let mut basis = DMatrix::zeros(2 * d, d + 1);
    basis.view_mut((0, 0), (d, d + 1)).copy_from(&w.rows(0, d));
    for (r, row) in by_row.iter().enumerate() {
        let mut out = basis.row_mut(d + r);
        for &(c, v) in row {
            out += w.row(c) * v;
        }
        if r == e {
            out += w.row(d);
        }
    }
    Some(basis)
}

/// The truncated system on `H = K ⊕ K`.
pub fn build_system(spec: &ExoticSpec) -> Result<FourSystem> {
    let d = spec.k_dim();
    let policy = spec.policy;
    let e3 = match e3_basis(spec) {
        Some(b) => Subspace::from_orthonormal(b, &policy)?,
        None => {
            let mut v = DMatrix::zeros(2 * d, d + 1);
            v.view_mut((0, 0), (d, d)).fill_with_identity();
            v.view_mut((d, 0), (d, d)).copy_from(&build_t(spec));
            v[(d + spec.e_index(), d)] = 1.0;
            Subspace::span(&v, &policy)
        }
    };
    let mut e4 = DMatrix::zeros(2 * d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        e4[(i, i)] = s;
        e4[(d + i, i)] = s;
    }
    FourSystem::new([
        Subspace::coordinate(2 * d, 0, d)?,
        Subspace::coordinate(2 * d, d, d)?,
        e3,
        Subspace::from_orthonormal_unchecked(e4),
    ])
}

/// Dimensions of the truncated subspaces, known in closed form.
pub fn truncated_dims(spec: &ExoticSpec) -> [usize; 4] {
    let d = spec.k_dim();
    [d, d, d + 1, d]
}

/// `Σ dim E_i - 2 dim H` of the truncation, always `1`.
pub fn truncated_defect_gp(spec: &ExoticSpec) -> i64 {
    let dims = truncated_dims(spec);
    dims.iter().sum::<usize>() as i64 - 4 * spec.k_dim() as i64
}

/// Residual of `(a, b) ∈ E_3`: `b - T a` must be a multiple of `e`. Returns
/// the norm of the part off `e` and the recovered multiple.
pub fn e3_membership(spec: &ExoticSpec, a: &[f64], b: &[f64]) -> (f64, f64) {
    let ta = apply_t(spec, a);
    let e = spec.e_index();
    let mut sq = 0.0;
    for (i, (bi, ti)) in b.iter().zip(&ta).enumerate() {
        if i != e {
            sq += (bi - ti) * (bi - ti);
        }
    }
    (sq.sqrt(), b[e] - ta[e])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspaces;
    use crate::systems::{defect_gp, intersection_diagram};

    fn spec(n: usize, m: usize) -> ExoticSpec {
        ExoticSpec::new(n, m, TolerancePolicy::default(), DEFAULT_TAIL_EPS).unwrap()
    }

    #[test]
    fn spec_validation() {
        let p = TolerancePolicy::default();
        assert!(ExoticSpec::new(0, 8, p, 1e-12).is_err());
        assert!(ExoticSpec::new(2, 3, p, 1e-12).is_err());
        assert!(ExoticSpec::new(2, 4, p, 0.0).is_err());
        assert!(ExoticSpec::new(2, 4, p, 1e-12).is_ok());
        let short = WeightFamily::new(crate::weights::BreakpointSchedule::build(2).unwrap());
        assert!(matches!(
            ExoticSpec::with_family(1, 20, short, p, 1e-12),
            Err(Error::ScheduleTooShort { .. })
        ));
    }

    #[test]
    fn shift_examples() {
        let w2 = |_: usize| 2.0;
        assert_eq!(backward_shift_apply(w2, &[1.0, 0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(backward_shift_apply(w2, &[0.0, 1.0, 0.0]), vec![2.0, 0.0]);
        let x: Vec<f64> = (0..20).map(|n| 0.5f64.powi(n)).collect();
        let y = backward_shift_apply(w2, &x);
        for n in 0..19 {
            assert!((y[n] - x[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn t_small_example() {
        let s = spec(1, 3).at_truncation(3).unwrap();
        let t = build_t(&s);
        let w = s.weight(1, 1);
        assert_eq!(w, 2.0);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(6, 6, &[
            0.0, w,   0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, w,   0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ]);
        assert_eq!(t, expected);
    }

    #[test]
    fn structured_apply_matches_dense() {
        let s = spec(3, 7);
        let t = build_t(&s);
        let x: Vec<f64> = (0..s.k_dim())
            .map(|i| ((i * 37 % 11) as f64) - 5.0)
            .collect();
        let dense = &t * nalgebra::DVector::from_column_slice(&x);
        let dense_t = t.transpose() * nalgebra::DVector::from_column_slice(&x);
        let fast = apply_t(&s, &x);
        let fast_t = apply_t_transpose(&s, &x);
        for i in 0..x.len() {
            assert!((dense[i] - fast[i]).abs() < 1e-13);
            assert!((dense_t[i] - fast_t[i]).abs() < 1e-13);
        }
        for (_, _, v) in t_entries(&s) {
            assert!(v == 1.0 || (4.0 / 3.0..=4.0).contains(&v));
        }
    }

    #[test]
    fn superdiagonal_identity_moves_blocks() {
        let s = spec(2, 5);
        let mut x = vec![0.0; s.k_dim()];
        x[s.index(3, 1)] = 1.0;
        let y = apply_t(&s, &x);
        assert_eq!(y[s.index(2, 1)], 1.0);
        assert_eq!(y[s.index(3, 2)], 1.0);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn truncated_system_shape() {
        let p = TolerancePolicy::default();
        for (n, m) in [(1, 3), (2, 4), (1, 6)] {
            let s = spec(n, m);
            let sys = build_system(&s).unwrap();
            assert_eq!(sys.dims(), truncated_dims(&s));
            assert_eq!(defect_gp(&sys), 1);
            assert_eq!(truncated_defect_gp(&s), 1);
            let cap13 = subspaces::intersect(sys.subspace(1), sys.subspace(3), &p).unwrap();
            let cap23 = subspaces::intersect(sys.subspace(2), sys.subspace(3), &p).unwrap();
            let cap34 = subspaces::intersect(sys.subspace(3), sys.subspace(4), &p).unwrap();
            assert_eq!(cap13.dim(), n);
            assert_eq!(cap23.dim(), 1);
            assert!(cap34.dim() >= 1);
            let d = intersection_diagram(&sys, &p).unwrap();
            let edges: Vec<_> = d.diagram.edges().collect();
            assert_eq!(edges, vec![(1, 2), (1, 4), (2, 4)]);
        }
    }

    #[test]
    fn membership_of_distinguished_vector() {
        let s = spec(2, 6);
        let a = vec![0.0; s.k_dim()];
        let mut b = a.clone();
        b[s.e_index()] = 1.0;
        let (res, y) = e3_membership(&s, &a, &b);
        assert_eq!(res, 0.0);
        assert_eq!(y, 1.0);
    }

    #[test]
    fn e3_basis_matches_generic_span() {
        for (n, m) in [(1, 3), (2, 5), (3, 8)] {
            let s = spec(n, m);
            let d = s.k_dim();
            let fast = build_system(&s).unwrap();
            let mut v = DMatrix::zeros(2 * d, d + 1);
            v.view_mut((0, 0), (d, d)).fill_with_identity();
            v.view_mut((d, 0), (d, d)).copy_from(&build_t(&s));
            v[(d + s.e_index(), d)] = 1.0;
            let slow = Subspace::span(&v, s.policy());
            assert!(crate::linalg::orthonormality_defect(fast.subspace(3).basis()) < 1e-13);
            assert!(subspaces::equal(fast.subspace(3), &slow, s.policy()).unwrap());
        }
    }
}
