#![allow(dead_code)]

use exotic_systems::systems::operator_system;
use exotic_systems::{FourSystem, Subspace, TolerancePolicy};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer spanning sets of the four subspaces; columns may be dependent.
#[derive(Debug, Clone)]
pub struct IntSystem {
    pub dim: usize,
    pub spans: [Vec<Vec<i64>>; 4],
}

impl IntSystem {
    pub fn to_float(&self, policy: &TolerancePolicy) -> FourSystem {
        let subs = self.spans.clone().map(|cols| {
            let m = DMatrix::from_fn(self.dim, cols.len(), |r, c| cols[c][r] as f64);
            Subspace::span(&m, policy)
        });
        FourSystem::new(subs).unwrap()
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let d = self.dim + other.dim;
        let spans = [0, 1, 2, 3].map(|i| {
            let mut cols = Vec::new();
            for c in &self.spans[i] {
                let mut v = c.clone();
                v.resize(d, 0);
                cols.push(v);
            }
            for c in &other.spans[i] {
                let mut v = vec![0; self.dim];
                v.extend_from_slice(c);
                cols.push(v);
            }
            cols
        });
        Self { dim: d, spans }
    }
}

fn unit(d: usize, i: usize) -> Vec<i64> {
    let mut v = vec![0; d];
    v[i] = 1;
    v
}

/// `S_A` for a square integer matrix `A` (row-major).
pub fn int_operator_system(a: &[Vec<i64>]) -> IntSystem {
    let k = a.len();
    let d = 2 * k;
    let e1 = (0..k).map(|i| unit(d, i)).collect();
    let e2 = (0..k).map(|i| unit(d, k + i)).collect();
    let graph = (0..k)
        .map(|c| {
            let mut v = unit(d, c);
            for r in 0..k {
                v[k + r] = a[r][c];
            }
            v
        })
        .collect();
    let diag = (0..k)
        .map(|c| {
            let mut v = unit(d, c);
            v[k + c] = 1;
            v
        })
        .collect();
    IntSystem {
        dim: d,
        spans: [e1, e2, graph, diag],
    }
}

pub fn random_int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, r: i64) -> Vec<Vec<i64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-r..=r)).collect())
        .collect()
}

fn random_square(rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<i64>> {
    match rng.random_range(0..4) {
        // Jordan block with a repeated eigenvalue
        0 => {
            let l = rng.random_range(-1..=1);
            (0..k)
                .map(|r| {
                    (0..k)
                        .map(|c| if r == c { l } else { i64::from(c == r + 1) })
                        .collect()
                })
                .collect()
        }
        // diagonal with possible repeats
        1 => (0..k)
            .map(|r| {
                (0..k)
                    .map(|c| if r == c { (r % 2) as i64 + 1 } else { 0 })
                    .collect()
            })
            .collect(),
        _ => random_int_matrix(rng, k, k, 1),
    }
}

/// Subspaces spanned by random combinations of a small shared pool, so that
/// nontrivial intersections are common.
fn pooled(rng: &mut ChaCha8Rng, d: usize) -> IntSystem {
    let pool: Vec<Vec<i64>> = (0..d + 1)
        .map(|_| (0..d).map(|_| rng.random_range(-1..=1)).collect())
        .collect();
    let spans = [0, 1, 2, 3].map(|_| {
        let k = rng.random_range(0..=d);
        (0..k)
            .map(|_| {
                let mut v = vec![0; d];
                for _ in 0..rng.random_range(1..=2) {
                    let p = &pool[rng.random_range(0..pool.len())];
                    for (a, b) in v.iter_mut().zip(p) {
                        *a += b;
                    }
                }
                v
            })
            .collect()
    });
    IntSystem { dim: d, spans }
}

fn generic(rng: &mut ChaCha8Rng, d: usize) -> IntSystem {
    let spans = [0, 1, 2, 3].map(|_| {
        let k = rng.random_range(0..=d);
        (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-2..=2)).collect())
            .collect()
    });
    IntSystem { dim: d, spans }
}

fn small_piece(rng: &mut ChaCha8Rng, max_dim: usize) -> IntSystem {
    match rng.random_range(0..3) {
        0 => {
            let k = rng.random_range(1..=(max_dim / 2).max(1));
            int_operator_system(&random_square(rng, k))
        }
        1 => {
            let d = rng.random_range(1..=max_dim);
            pooled(rng, d)
        }
        _ => {
            let d = rng.random_range(1..=max_dim);
            generic(rng, d)
        }
    }
}

/// Random system of ambient dimension at most `max_dim`.
pub fn random_int_system(rng: &mut ChaCha8Rng, max_dim: usize) -> IntSystem {
    if max_dim >= 2 && rng.random_bool(0.3) {
        let a = rng.random_range(1..max_dim);
        let left = small_piece(rng, a);
        let right = small_piece(rng, max_dim - left.dim);
        left.direct_sum(&right)
    } else {
        small_piece(rng, max_dim)
    }
}

fn q(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Row-reduces in place and returns the pivot columns.
pub fn rref(m: &mut [Vec<BigRational>]) -> Vec<usize> {
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..cols {
        let Some(p) = (row..m.len()).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = BigRational::one() / &m[row][c];
        for x in m[row].iter_mut() {
            *x *= &inv;
        }
        let src = m[row].clone();
        for (r, dst) in m.iter_mut().enumerate() {
            if r != row && !dst[c].is_zero() {
                let f = dst[c].clone();
                for (d, s) in dst.iter_mut().zip(&src) {
                    if !s.is_zero() {
                        *d -= &f * s;
                    }
                }
            }
        }
        pivots.push(c);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    pivots
}

/// Exact basis of `{x : M x = 0}`.
pub fn nullspace(m: &[Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    let mut a = m.to_vec();
    let pivots = rref(&mut a);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -a[r][f].clone();
            }
            v
        })
        .collect()
}

pub fn exact_rank(m: &[Vec<BigRational>]) -> usize {
    let mut a = m.to_vec();
    rref(&mut a).len()
}

pub fn exact_dim(cols: &[Vec<i64>]) -> usize {
    let rows: Vec<Vec<BigRational>> = cols
        .iter()
        .map(|c| c.iter().map(|x| q(*x)).collect())
        .collect();
    exact_rank(&rows)
}

/// `dim End` by exact Gaussian elimination on the constraints
/// `W_iᵀ A V_i = 0`, `W_i` spanning `E_i^⊥`.
pub fn exact_end_dim(s: &IntSystem) -> usize {
    let n = s.dim;
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for cols in &s.spans {
        let vt: Vec<Vec<BigRational>> = cols
            .iter()
            .map(|c| c.iter().map(|x| q(*x)).collect())
            .collect();
        let perp = if vt.is_empty() {
            (0..n)
                .map(|i| (0..n).map(|j| q(i64::from(i == j))).collect())
                .collect()
        } else {
            nullspace(&vt, n)
        };
        for w in &perp {
            for v in cols {
                // Σ_{r,s} w[r] A[r,s] v[s], unknown A[r,s] at r*n + s
                let mut row = vec![BigRational::zero(); n * n];
                for r in 0..n {
                    if w[r].is_zero() {
                        continue;
                    }
                    for (c, &vs) in v.iter().enumerate() {
                        if vs != 0 {
                            row[r * n + c] = &w[r] * q(vs);
                        }
                    }
                }
                rows.push(row);
            }
        }
    }
    n * n - exact_rank(&rows)
}

/// Random real matrix with entries in `[-1, 1]`.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

/// Random operator system `S_{A,B}` with small blocks; `B = I` half the time
/// when `A` is square. Low-rank `A` occurs often.
pub fn random_operator_system(rng: &mut ChaCha8Rng, policy: &TolerancePolicy) -> FourSystem {
    let k1 = rng.random_range(1..=4);
    let k2 = if rng.random_bool(0.5) {
        k1
    } else {
        rng.random_range(1..=4)
    };
    let rank = rng.random_range(0..=k1.min(k2));
    let a = random_matrix(rng, k2, rank) * random_matrix(rng, rank, k1);
    if k1 == k2 && rng.random_bool(0.5) {
        operator_system(&a, None, policy).unwrap()
    } else {
        let b = random_matrix(rng, k1, k2);
        operator_system(&a, Some(&b), policy).unwrap()
    }
}
