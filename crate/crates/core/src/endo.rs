//! Endomorphism algebras of finite-dimensional systems and the idempotent
//! search behind indecomposability verdicts.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    nullspace_with_evidence, numeric_rank, singular_values, RankEvidence, TolerancePolicy,
};
use crate::subspaces::{self, Subspace};
use crate::systems::FourSystem;

/// Dense endomorphism computation needs `d^2` unknowns.
pub const MAX_DENSE_AMBIENT: usize = 48;

pub const DEFAULT_ATTEMPTS: usize = 64;

/// Basis of `{V : V E_i ⊆ E_i, i = 1..4}`. The basis is orthonormal in the
/// Frobenius inner product.
#[derive(Debug, Clone)]
pub struct EndoAlgebra {
    ambient_dim: usize,
    basis: Vec<DMatrix<f64>>,
    evidence: RankEvidence,
}

impl EndoAlgebra {
    /// Wraps a Frobenius-orthonormal basis computed elsewhere.
    pub fn from_orthonormal_basis(
        ambient_dim: usize,
        basis: Vec<DMatrix<f64>>,
        evidence: RankEvidence,
    ) -> Result<Self> {
        if let Some(b) = basis
            .iter()
            .find(|b| b.shape() != (ambient_dim, ambient_dim))
        {
            return Err(Error::DimensionMismatch(format!(
                "basis element is {}x{}, expected {ambient_dim}x{ambient_dim}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self {
            ambient_dim,
            basis,
            evidence,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    /// Rank evidence of the stacked constraint system.
    pub fn evidence(&self) -> &RankEvidence {
        &self.evidence
    }

    pub fn element(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let d = self.ambient_dim;
        let mut out = DMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(&self.basis) {
            out += b * *c;
        }
        out
    }

    /// Frobenius coordinates of the orthogonal projection of `v` onto the span.
    pub fn coordinates(&self, v: &DMatrix<f64>) -> Vec<f64> {
        self.basis.iter().map(|b| b.dot(v)).collect()
    }

    pub fn project(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.element(&self.coordinates(v))
    }

    /// Frobenius distance from `v` to the span.
    pub fn span_residual(&self, v: &DMatrix<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn identity_residual(&self) -> f64 {
        self.span_residual(&DMatrix::identity(self.ambient_dim, self.ambient_dim))
    }

    /// Largest distance from a product of two basis elements to the span.
    pub fn closure_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.basis {
            for b in &self.basis {
                worst = worst.max(self.span_residual(&(a * b)));
            }
        }
        worst
    }

    pub fn is_commutative(&self, policy: &TolerancePolicy) -> bool {
        for (k, a) in self.basis.iter().enumerate() {
            for b in &self.basis[k + 1..] {
                if (a * b - b * a).norm() > policy.residual_tol.sqrt() {
                    return false;
                }
            }
        }
        true
    }

    /// Gram matrix of the trace form `tr(B_k B_l)`.
    pub fn trace_form(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in k..n {
                let t = (&self.basis[k] * &self.basis[l]).trace();
                g[(k, l)] = t;
                g[(l, k)] = t;
            }
        }
        g
    }

    /// Rank of the trace form, which equals the dimension of the algebra
    /// modulo its radical.
    pub fn semisimple_rank(&self, policy: &TolerancePolicy) -> usize {
        if self.basis.is_empty() {
            return 0;
        }
        let g = self.trace_form();
        let loose = TolerancePolicy {
            rank_tol: policy.rank_tol.sqrt(),
            ..*policy
        };
        numeric_rank(&g, &loose)
    }
}

/// `V = Q_i^⊥ᵀ V Q_i = 0` for each `i`, stacked in column-major `vec(V)`
/// coordinates and solved once.
pub fn compute_endomorphisms(s: &FourSystem, policy: &TolerancePolicy) -> Result<EndoAlgebra> {
    let d = s.ambient_dim();
    if d > MAX_DENSE_AMBIENT {
        return Err(Error::TooLarge(format!(
            "endomorphism algebra of a {d}-dimensional system (limit {MAX_DENSE_AMBIENT})"
        )));
    }
    let mut blocks = Vec::new();
    for e in s.subspaces() {
        if e.is_zero() || e.dim() == d {
            continue;
        }
        let q = e.basis();
        let perp = subspaces::complement(e, policy);
        let qp = perp.basis();
        blocks.push(q.transpose().kronecker(&qp.transpose()));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut a = DMatrix::zeros(rows, d * d);
    let mut r = 0;
    for b in &blocks {
        a.view_mut((r, 0), (b.nrows(), d * d)).copy_from(b);
        r += b.nrows();
    }
    let (kernel, evidence) = nullspace_with_evidence(&a, policy);
    let basis = kernel
        .column_iter()
        .map(|c| DMatrix::from_column_slice(d, d, c.as_slice()))
        .collect();
    Ok(EndoAlgebra {
        ambient_dim: d,
        basis,
        evidence,
    })
}

/// Largest `‖Q_i^⊥ᵀ V Q_i‖` over the four subspaces.
pub fn invariance_residual(s: &FourSystem, v: &DMatrix<f64>, policy: &TolerancePolicy) -> f64 {
    s.subspaces()
        .iter()
        .map(|e| {
            if e.is_zero() {
                return 0.0;
            }
            let perp = subspaces::complement(e, policy);
            (perp.basis().transpose() * v * e.basis()).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotentSearch {
    pub witness: Option<Vec<Vec<f64>>>,
    pub witness_rank: Option<usize>,
    /// `‖V² - V‖_F` of the witness.
    pub idempotent_residual: Option<f64>,
    /// Frobenius distance of the witness from the algebra.
    pub span_residual: Option<f64>,
    pub attempts: usize,
    pub draws_used: usize,
    /// Draws whose spectrum had no resolvable gap or whose projector failed
    /// verification.
    pub skipped: usize,
    pub seed: u64,
}

impl IdempotentSearch {
    pub fn witness_matrix(&self) -> Option<DMatrix<f64>> {
        self.witness.as_ref().map(|rows| {
            let n = rows.len();
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Real part threshold strictly inside the widest gap between eigenvalue
/// clusters, or `None` when the spectrum is one cluster.
fn spectral_cut(x: &DMatrix<f64>) -> Option<f64> {
    let d = x.nrows();
    let schur = nalgebra::Schur::try_new(x.clone(), 1e-14, 10_000)?;
    let eig = schur.complex_eigenvalues();
    let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    let scale = x.norm() / (d as f64).sqrt();
    let gap_tol = 1e-3 * scale.max(f64::MIN_POSITIVE);
    let (mut best, mut cut) = (gap_tol, None);
    for w in re.windows(2) {
        let gap = w[1] - w[0];
        if gap > best {
            best = gap;
            cut = Some(0.5 * (w[0] + w[1]));
        }
    }
    cut
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(y0: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = y0.nrows();
    let mut y = y0;
    for _ in 0..100 {
        let inv = y.clone().try_inverse()?;
        let det = y.determinant().abs();
        let mu = if det.is_finite() && det > 0.0 {
            det.powf(-1.0 / d as f64)
        } else {
            1.0
        };
        let next = (&y * mu + inv / mu) * 0.5;
        let delta = (&next - &y).norm();
        let size = next.norm();
        y = next;
        if !size.is_finite() {
            return None;
        }
        if delta <= 1e-13 * size {
            break;
        }
    }
    Some(y)
}

/// `P ← 3P² - 2P³`, converging quadratically to the nearest idempotent.
fn polish(p: &mut DMatrix<f64>) {
    for _ in 0..8 {
        let p2 = &*p * &*p;
        let next = &p2 * 3.0 - &p2 * &*p * 2.0;
        let delta = (&next - &*p).norm();
        *p = next;
        if delta < 1e-15 {
            break;
        }
    }
}

/// Randomized spectral-projection search. Each draw is a random element of
/// the algebra; the Riesz projection onto the eigenvalues left of a spectral
/// gap is a polynomial in that element and so stays in the algebra.
pub fn find_nontrivial_idempotent(
    alg: &EndoAlgebra,
    attempts: usize,
    seed: u64,
    policy: &TolerancePolicy,
) -> IdempotentSearch {
    let d = alg.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut skipped = 0;
    let empty = |draws_used, skipped| IdempotentSearch {
        witness: None,
        witness_rank: None,
        idempotent_residual: None,
        span_residual: None,
        attempts,
        draws_used,
        skipped,
        seed,
    };
    if alg.dim() <= 1 || d == 0 {
        return empty(0, 0);
    }
    for draw in 1..=attempts {
        let coeffs: Vec<f64> = (0..alg.dim())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let x = alg.element(&coeffs);
        let Some(tau) = spectral_cut(&x) else {
            skipped += 1;
            continue;
        };
        let shifted = &x - DMatrix::identity(d, d) * tau;
        let Some(sign) = matrix_sign(shifted) else {
            skipped += 1;
            continue;
        };
        let mut p = (DMatrix::identity(d, d) - sign) * 0.5;
        polish(&mut p);
        p = alg.project(&p);
        polish(&mut p);
        let idem = (&p * &p - &p).norm();
        let span = alg.span_residual(&p);
        let scale = p.norm().max(1.0);
        let rank = p.trace().round();
        let ok = idem <= policy.residual_tol * scale * scale
            && span <= policy.residual_tol * scale
            && rank >= 1.0
            && rank <= (d - 1) as f64;
        if ok {
            return IdempotentSearch {
                witness: Some(rows_of(&p)),
                witness_rank: Some(rank as usize),
                idempotent_residual: Some(idem),
                span_residual: Some(span),
                attempts,
                draws_used: draw,
                skipped,
                seed,
            };
        }
        skipped += 1;
    }
    empty(attempts, skipped)
}

/// Dimensions of `P E_i` and `(I - P) E_i` for a splitting idempotent.
#[derive(Debug, Clone, Serialize)]
pub struct Splitting {
    pub range_dim: usize,
    pub kernel_dim: usize,
    pub pieces: [[usize; 2]; 4],
}

pub fn splitting(s: &FourSystem, p: &DMatrix<f64>, policy: &TolerancePolicy) -> Splitting {
    let d = s.ambient_dim();
    let q = DMatrix::identity(d, d) - p;
    // Relative to the idempotent's scale, not to each product: a summand
    // that `P` annihilates leaves only roundoff in `P E_i`.
    let cut = policy.rank_tol * p.norm().max(q.norm()).max(1.0);
    let rank = |m: &DMatrix<f64>| singular_values(m).iter().filter(|s| **s > cut).count();
    let piece = |e: &Subspace, m: &DMatrix<f64>| rank(&(m * e.basis()));
    Splitting {
        range_dim: rank(p),
        kernel_dim: rank(&q),
        pieces: [0, 1, 2, 3].map(|i| {
            let e = &s.subspaces()[i];
            [piece(e, p), piece(e, &q)]
        }),
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Decomposable {
        splitting: Splitting,
    },
    /// The trace form has rank one, so the algebra modulo its radical is the
    /// scalars and the only idempotents are `0` and `I`.
    ProvenIndecomposable {
        semisimple_rank: usize,
        commutative: bool,
    },
    /// Search budget exhausted; evidence only.
    NoIdempotentFound {
        semisimple_rank: usize,
        commutative: bool,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct EndoReport {
    pub dim_end: usize,
    pub verdict: Verdict,
    pub search: IdempotentSearch,
    pub identity_residual: f64,
    pub closure_residual: f64,
    pub constraint_evidence: RankEvidence,
    pub transitive: bool,
}

impl EndoReport {
    pub fn is_decomposable(&self) -> bool {
        matches!(self.verdict, Verdict::Decomposable { .. })
    }

    pub fn is_proven_indecomposable(&self) -> bool {
        matches!(self.verdict, Verdict::ProvenIndecomposable { .. })
    }
}

pub fn is_indecomposable_with(
    s: &FourSystem,
    attempts: usize,
    seed: u64,
    policy: &TolerancePolicy,
) -> Result<EndoReport> {
    let alg = compute_endomorphisms(s, policy)?;
    let search = find_nontrivial_idempotent(&alg, attempts, seed, policy);
    let rank = alg.semisimple_rank(policy);
    let commutative = alg.is_commutative(policy);
    let verdict = match search.witness_matrix() {
        Some(p) => Verdict::Decomposable {
            splitting: splitting(s, &p, policy),
        },
        None if rank == 1 => Verdict::ProvenIndecomposable {
            semisimple_rank: rank,
            commutative,
        },
        None => Verdict::NoIdempotentFound {
            semisimple_rank: rank,
            commutative,
        },
    };
    Ok(EndoReport {
        dim_end: alg.dim(),
        verdict,
        search,
        identity_residual: alg.identity_residual(),
        closure_residual: alg.closure_residual(),
        constraint_evidence: *alg.evidence(),
        transitive: alg.dim() == 1,
    })
}

pub fn is_indecomposable(s: &FourSystem, policy: &TolerancePolicy) -> Result<EndoReport> {
    is_indecomposable_with(s, DEFAULT_ATTEMPTS, 0, policy)
}

pub fn is_transitive(s: &FourSystem, policy: &TolerancePolicy) -> Result<bool> {
    Ok(compute_endomorphisms(s, policy)?.dim() == 1)
}

/// `x ↦ (V x)` check used by tests and reports: `‖V e - proj_E(V e)‖` over
/// basis vectors of every `E_i`.
pub fn maps_into(s: &FourSystem, v: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for e in s.subspaces() {
        for c in e.basis().column_iter() {
            let img: DVector<f64> = v * c;
            worst = worst.max(e.residual(&img));
        }
    }
    worst
}
