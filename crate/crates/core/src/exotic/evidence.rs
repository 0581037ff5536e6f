//! Finite evidence for the infinite-dimensional indecomposability argument:
//! the block cascade on truncated endomorphisms, the divergent `A_12`
//! recursion, the scalar-plus-nilpotent idempotent lemma, and eigenvectors
//! of the weighted shifts.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{t_entries, ExoticSpec};
use crate::endo::{find_nontrivial_idempotent, EndoAlgebra, IdempotentSearch, DEFAULT_ATTEMPTS};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, nullspace_with_evidence, RankEvidence};
use crate::weights::{BreakpointSchedule, WeightFamily};

/// Limit on `dim K` for the reduced endomorphism solve (`dim K`² unknowns).
pub const MAX_REDUCED_DIM: usize = 40;

/// Endomorphisms preserving `E_1 = K ⊕ 0`, `E_2 = 0 ⊕ K` and the diagonal are
/// exactly `A ⊕ A`. Such a map preserves `E_3` iff `A e ∈ C e` and
/// `AT - TA` has range in `C e`. Returns an orthonormal basis of those `A`.
pub fn endomorphisms_reduced(spec: &ExoticSpec) -> Result<(Vec<DMatrix<f64>>, RankEvidence)> {
    let n = spec.k_dim();
    if n > MAX_REDUCED_DIM {
        return Err(Error::TooLarge(format!(
            "reduced endomorphism solve with dim K = {n} (limit {MAX_REDUCED_DIM})"
        )));
    }
    let e = spec.e_index();
    let unknown = |r: usize, c: usize| r + c * n;
    let rows = (n - 1) + (n - 1) * n;
    let mut a = DMatrix::<f64>::zeros(rows, n * n);
    let mut row = 0;
    for r in (0..n).filter(|r| *r != e) {
        a[(row, unknown(r, e))] = 1.0;
        row += 1;
    }
    let entries = t_entries(spec);
    let first_row = row;
    let row_of = |r: usize, c: usize| first_row + (if r < e { r } else { r - 1 }) * n + c;
    for &(k, c, v) in &entries {
        for r in (0..n).filter(|r| *r != e) {
            a[(row_of(r, c), unknown(r, k))] += v;
        }
    }
    for &(r, k, v) in &entries {
        if r == e {
            continue;
        }
        for c in 0..n {
            a[(row_of(r, c), unknown(k, c))] -= v;
        }
    }
    let (kernel, evidence) = nullspace_with_evidence(&a, spec.policy());
    let basis = kernel
        .column_iter()
        .map(|c| DMatrix::from_column_slice(n, n, c.as_slice()))
        .collect();
    Ok((basis, evidence))
}

fn lift(a_basis: &[DMatrix<f64>], evidence: RankEvidence) -> Result<EndoAlgebra> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let n = a_basis.first().map_or(0, |a| a.nrows());
    let basis = a_basis.iter().map(|a| block_diag(a, a) * s).collect();
    EndoAlgebra::from_orthonormal_basis(2 * n, basis, evidence)
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeCheck {
    pub name: &'static str,
    /// Largest violation relative to `‖A‖_F`.
    pub max_violation: f64,
    pub tolerance: f64,
    /// Observations are reported but not required to pass.
    pub asserted: bool,
    pub passed: bool,
}

fn block(spec: &ExoticSpec, a: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    let m = spec.truncation();
    a.view(((i - 1) * m, (j - 1) * m), (m, m)).into_owned()
}

/// Vanishing pattern, column recurrence and triangular shape of the blocks
/// of an endomorphism `A ⊕ A` of the truncation.
fn cascade_violations(spec: &ExoticSpec, a: &DMatrix<f64>) -> [f64; 5] {
    let (nb, m) = (spec.n_blocks(), spec.truncation());
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut band = 0.0f64;
    for j in 1..=nb + 1 {
        let aj = block(spec, a, j, 1);
        let width = nb + 1 - j;
        for n in 1..=m {
            for k in (n + width).max(1)..=m {
                band = band.max(aj[(k - 1, n - 1)].abs());
            }
        }
    }
    let mut rec = 0.0f64;
    for j in 1..=nb {
        let aj = block(spec, a, j, 1);
        let below = block(spec, a, j + 1, 1);
        for k in 1..m {
            for n in 1..m {
                let lhs = spec.weight(j, k) * aj[(k, n)] + below[(k - 1, n)];
                let rhs = spec.weight(1, n) * aj[(k - 1, n - 1)];
                rec = rec.max((lhs - rhs).abs());
            }
        }
    }
    let mut lower = 0.0f64;
    let mut spread_inner = 0.0f64;
    let mut spread_last = 0.0f64;
    for i in 1..=nb + 1 {
        let aii = block(spec, a, i, i);
        for r in 0..m {
            for c in 0..r {
                lower = lower.max(aii[(r, c)].abs());
            }
        }
        let d = aii.diagonal();
        let spread = d.max() - d.min();
        if i == nb + 1 {
            spread_last = spread;
        } else {
            spread_inner = spread_inner.max(spread);
        }
    }
    [band, rec, lower, spread_last, spread_inner].map(|v| v / scale)
}

const CASCADE_NAMES: [(&str, bool); 5] = [
    ("column-1 blocks vanish below their bandwidth", true),
    (
        "column-1 recurrence w_j(k) A_j1(k+1,n+1) + A_(j+1)1(k,n+1) = w_1(n) A_j1(k,n)",
        true,
    ),
    ("diagonal blocks are upper triangular", true),
    ("last diagonal block has constant diagonal", true),
    (
        "diagonal spread of A_jj, j <= N (boundary effect of truncation)",
        false,
    ),
];

pub fn cascade_checks(spec: &ExoticSpec, a_basis: &[DMatrix<f64>], seed: u64) -> Vec<CascadeCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<DMatrix<f64>> = a_basis.to_vec();
    if let Some(first) = a_basis.first() {
        let mut mix = DMatrix::zeros(first.nrows(), first.ncols());
        for b in a_basis {
            let c: f64 = StandardNormal.sample(&mut rng);
            mix += b * c;
        }
        samples.push(mix);
    }
    let mut worst = [0.0f64; 5];
    for a in &samples {
        for (w, v) in worst.iter_mut().zip(cascade_violations(spec, a)) {
            *w = w.max(v);
        }
    }
    let tol = spec.policy().residual_tol.sqrt();
    CASCADE_NAMES
        .iter()
        .zip(worst)
        .map(|(&(name, asserted), v)| CascadeCheck {
            name,
            max_violation: v,
            tolerance: tol,
            asserted,
            passed: v <= tol,
        })
        .collect()
}

/// `A_12(n+2, n+1) = (w_2(n)/w_1(n+1)) A_12(n+1, n) - 1/w_1(n+1)` from
/// `A_12(2, 1) = -1/w_1(1)`: the entry an idempotent with `A_22 = I` would
/// need, which cannot stay bounded.
#[derive(Debug, Clone, Serialize)]
pub struct A12Divergence {
    pub bound: f64,
    /// Odd breakpoint index `j` by which the bound must be exceeded.
    pub breakpoint_index: usize,
    pub breakpoint: u64,
    /// First `n` with `|A_12(n+2, n+1)| > bound`.
    pub exceeded_at: Option<u64>,
    pub value: f64,
    /// Whether `|A_12(n+2,n+1)| >= Π w_2/(w_1(n+1) Π w_1)` held throughout.
    pub lower_bound_holds: bool,
    pub passed: bool,
}

/// Runs the recursion until `|A_12| > bound` or the `odd_count`-th odd
/// breakpoint is reached.
pub fn a12_divergence(bound: f64, odd_count: usize) -> Result<A12Divergence> {
    let j = 2 * odd_count.max(1) - 1;
    let family = WeightFamily::new(BreakpointSchedule::build(j)?);
    let limit = family.schedule().breakpoints()[j - 1];
    let w1 = |k: u64| family.w_value(1, k);
    let w2 = |k: u64| family.w_value(2, k);
    let mut a = -1.0 / w1(1)?;
    let mut log_ratio = 0.0;
    let mut lower_ok = true;
    let mut exceeded = (a.abs() > bound).then_some(0);
    let mut n = 0u64;
    while exceeded.is_none() && n + 1 < limit {
        n += 1;
        let (w2n, w1n, w1next) = (w2(n)?, w1(n)?, w1(n + 1)?);
        a = (w2n / w1next) * a - 1.0 / w1next;
        log_ratio += w2n.ln() - w1n.ln();
        let lower = log_ratio.exp() / w1next;
        lower_ok &= a.abs() >= lower * (1.0 - 1e-12);
        if a.abs() > bound {
            exceeded = Some(n);
        }
    }
    Ok(A12Divergence {
        bound,
        breakpoint_index: j,
        breakpoint: limit,
        exceeded_at: exceeded,
        value: a,
        lower_bound_holds: lower_ok,
        passed: exceeded.is_some() && lower_ok,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdempotentLemmaReport {
    pub instances: usize,
    pub max_size: usize,
    pub zeros: usize,
    pub identities: usize,
    /// Largest `min(‖P‖, ‖P - I‖)` over converged instances.
    pub max_deviation: f64,
    pub max_idempotent_residual: f64,
    pub passed: bool,
}

/// Idempotents of the form `λI + N`, `N` strictly upper triangular, reached
/// by iterating `P ← 3P² - 2P³` from random members of that class; each
/// must be `0` or `I`.
pub fn idempotent_lemma_check(
    instances: usize,
    max_size: usize,
    seed: u64,
) -> IdempotentLemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut zeros, mut identities) = (0, 0);
    let (mut dev, mut idem) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let size = rng.random_range(1..=max_size);
        let lambda = if rng.random_bool(0.5) {
            rng.random_range(-0.3..0.4)
        } else {
            rng.random_range(0.6..1.3)
        };
        let mut p = DMatrix::from_fn(size, size, |r, c| {
            if c > r {
                0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
            } else {
                0.0
            }
        });
        for r in 0..size {
            p[(r, r)] = lambda;
        }
        for _ in 0..80 {
            let p2 = &p * &p;
            p = &p2 * 3.0 - &p2 * &p * 2.0;
        }
        idem = idem.max((&p * &p - &p).amax());
        let to_zero = p.amax();
        let to_one = (&p - DMatrix::identity(size, size)).amax();
        if to_zero <= to_one {
            zeros += 1;
            dev = dev.max(to_zero);
        } else {
            identities += 1;
            dev = dev.max(to_one);
        }
    }
    IdempotentLemmaReport {
        instances,
        max_size,
        zeros,
        identities,
        max_deviation: dev,
        max_idempotent_residual: idem,
        passed: dev <= 1e-12 && idem <= 1e-12,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IndecomposabilityEvidence {
    /// Truncation used for the dense endomorphism computation.
    pub truncation: usize,
    pub dim_end: Option<usize>,
    pub semisimple_rank: Option<usize>,
    pub commutative: Option<bool>,
    pub idempotent_search: Option<IdempotentSearch>,
    pub skipped_reason: Option<String>,
    pub cascade: Vec<CascadeCheck>,
    pub a12: A12Divergence,
    pub idempotent_lemma: IdempotentLemmaReport,
    /// Truncations need not inherit indecomposability; nothing here is a
    /// proof about the infinite system.
    pub evidence_only: bool,
}

impl IndecomposabilityEvidence {
    pub fn asserted_checks_pass(&self) -> bool {
        self.cascade.iter().filter(|c| c.asserted).all(|c| c.passed)
            && self.a12.passed
            && self.idempotent_lemma.passed
    }
}

/// Smallest-feasible truncation for the dense endomorphism computation.
pub fn evidence_truncation(n_blocks: usize) -> usize {
    (n_blocks + 2).max(24 / (n_blocks + 1))
}

pub fn indecomposability_evidence(
    spec: &ExoticSpec,
    seed: u64,
) -> Result<IndecomposabilityEvidence> {
    let m = evidence_truncation(spec.n_blocks()).min(spec.truncation());
    let small = spec.at_truncation(m)?;
    let a12 = a12_divergence(1e3, 5)?;
    let idempotent_lemma = idempotent_lemma_check(200, 12, seed);
    let mut out = IndecomposabilityEvidence {
        truncation: m,
        dim_end: None,
        semisimple_rank: None,
        commutative: None,
        idempotent_search: None,
        skipped_reason: None,
        cascade: Vec::new(),
        a12,
        idempotent_lemma,
        evidence_only: true,
    };
    match endomorphisms_reduced(&small) {
        Ok((a_basis, ev)) => {
            let alg = lift(&a_basis, ev)?;
            out.dim_end = Some(alg.dim());
            out.semisimple_rank = Some(alg.semisimple_rank(small.policy()));
            out.commutative = Some(alg.is_commutative(small.policy()));
            out.idempotent_search = Some(find_nontrivial_idempotent(
                &alg,
                DEFAULT_ATTEMPTS,
                seed,
                small.policy(),
            ));
            out.cascade = cascade_checks(&small, &a_basis, seed);
        }
        Err(Error::TooLarge(msg)) => out.skipped_reason = Some(msg),
        Err(e) => return Err(e),
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenWitness {
    pub shift_index: usize,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub truncation: usize,
    /// `‖(B_w x - λ x)(1..=M)‖` using the entry `x(M+1)`.
    pub residual: f64,
    /// Last-row residual of the compressed shift, `|w(M) x(M+1)|`.
    pub compressed_residual: f64,
    /// Certified `ℓ²` mass past `M`, from `|x(n+1)| <= (3|λ|/4)^n`.
    pub tail_bound: f64,
    pub certified: bool,
}

/// `x(n+1) = λ^n / Π_{k<=n} w_i(k)`, an eigenvector of `B_{w_i}` for `λ`.
pub fn point_spectrum_witness(
    family: &WeightFamily,
    i: usize,
    lambda: Complex64,
    m: usize,
    residual_tol: f64,
    tail_eps: f64,
) -> Result<EigenWitness> {
    let w = (1..=m)
        .map(|k| family.w_value(i, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::with_capacity(m + 1);
    x.push(Complex64::new(1.0, 0.0));
    for k in 1..=m {
        let next = x[k - 1] * lambda / w[k - 1];
        x.push(next);
    }
    let bx = super::backward_shift_apply(|n| w[n - 1], &x);
    let residual = bx
        .iter()
        .zip(&x)
        .map(|(b, xi)| (b - lambda * xi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let compressed_residual = (x[m] * w[m - 1]).norm();
    let admissible = w.iter().all(|v| *v >= 4.0 / 3.0);
    let r = 9.0 * lambda.norm_sqr() / 16.0;
    let tail_bound = if lambda.norm() == 0.0 {
        0.0
    } else if r < 1.0 {
        (r.powi(m as i32) / (1.0 - r)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(EigenWitness {
        shift_index: i,
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        truncation: m,
        residual,
        compressed_residual,
        tail_bound,
        certified: admissible && residual <= residual_tol && tail_bound <= tail_eps,
    })
}
