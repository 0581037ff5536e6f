//! Explicit bases of the nonzero pairwise intersections, one vector per
//! canonical parameter choice.

use serde::Serialize;

use super::lazy::{solve_fixed_point, LazyVector};
use super::{e3_membership, ExoticSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessForm {
    /// `x ⊕ 0`
    XZero,
    /// `0 ⊕ x`
    ZeroX,
    /// `x ⊕ x`
    XX,
}

/// A vector of `H = K ⊕ K` lying in `E_i ∩ E_j`, stored through its
/// nonzero component `x` (truncated to `M` entries per block).
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub pair: (usize, usize),
    /// Index of the unit parameter that produced the vector.
    pub parameter: usize,
    pub form: WitnessForm,
    pub x: Vec<f64>,
    /// `‖b - T_M a - y e‖` for `(a, b) = ` the truncated vector.
    pub e3_residual: f64,
    /// Largest residual of the defining recursion over computed indices,
    /// including one index past the truncation.
    pub equation_residual: f64,
    /// Certified `ℓ²` mass beyond the truncation; `Some(0)` for finitely
    /// supported vectors, `None` if no bound applies.
    pub tail_bound: Option<f64>,
    /// Degree of the largest envelope polynomial used.
    pub envelope_degree: Option<usize>,
    pub envelope_ok: bool,
}

impl Witness {
    pub fn components(&self) -> (Vec<f64>, Vec<f64>) {
        let zero = vec![0.0; self.x.len()];
        match self.form {
            WitnessForm::XZero => (self.x.clone(), zero),
            WitnessForm::ZeroX => (zero, self.x.clone()),
            WitnessForm::XX => (self.x.clone(), self.x.clone()),
        }
    }

    /// `x_j(1)` for each block `j`, the recursion parameters.
    pub fn parameters(&self, spec: &ExoticSpec) -> Vec<f64> {
        (1..=spec.n_blocks())
            .map(|j| self.x[spec.index(j, 1)])
            .collect()
    }

    /// Whether every residual and the tail are within the spec tolerances.
    pub fn certified(&self, spec: &ExoticSpec) -> bool {
        let tol = spec.policy().residual_tol;
        let tail_ok = self.tail_bound.is_some_and(|t| t <= spec.tail_eps());
        self.equation_residual <= tol && self.envelope_ok && tail_ok
    }
}

/// `x ⊕ 0 ∈ E_3` means `T x = 0`: the last block vanishes, `x_j(1)` is free
/// and `x_j(k+1) = -x_{j+1}(k) / w_j(k)`. Parameter `i` sets `x_i(1) = 1`
/// and every other `x_j(1) = 0`.
pub fn exact_basis_e1_cap_e3(spec: &ExoticSpec) -> Vec<Witness> {
    let (n, m) = (spec.n_blocks(), spec.truncation());
    (1..=n)
        .map(|i| {
            let mut x = vec![0.0; spec.k_dim()];
            x[spec.index(i, 1)] = 1.0;
            for j in (1..i).rev() {
                for k in 1..m {
                    let next = x[spec.index(j + 1, k)];
                    if next != 0.0 {
                        x[spec.index(j, k + 1)] = -next / spec.weight(j, k);
                    }
                }
            }
            let zero = vec![0.0; x.len()];
            let (res, y) = e3_membership(spec, &x, &zero);
            Witness {
                pair: (1, 3),
                parameter: i,
                form: WitnessForm::XZero,
                e3_residual: res.max(y.abs()),
                equation_residual: res.max(y.abs()),
                x,
                tail_bound: Some(0.0),
                envelope_degree: None,
                envelope_ok: true,
            }
        })
        .collect()
}

/// The distinguished generator `0 ⊕ e`.
pub fn basis_e2_cap_e3(spec: &ExoticSpec) -> Witness {
    let mut x = vec![0.0; spec.k_dim()];
    x[spec.e_index()] = 1.0;
    let zero = vec![0.0; x.len()];
    let (res, _) = e3_membership(spec, &zero, &x);
    Witness {
        pair: (2, 3),
        parameter: 1,
        form: WitnessForm::ZeroX,
        x,
        e3_residual: res,
        equation_residual: res,
        tail_bound: Some(0.0),
        envelope_degree: None,
        envelope_ok: true,
    }
}

/// Block sequences of the `E_3 ∩ E_4` witness for parameter `i`:
/// `x_j = 0` for `j > i`, `B_{w_i} x_i = x_i` with `x_i(1) = 1`, and
/// `B_{w_j} x_j + x_{j+1} = x_j` with `x_j(1) = 0` for `j < i`.
pub fn e3_cap_e4_blocks(spec: &ExoticSpec, i: usize) -> Result<Vec<Option<LazyVector>>> {
    let (n, m) = (spec.n_blocks(), spec.truncation());
    let mut blocks: Vec<Option<LazyVector>> = vec![None; n];
    let w = |j: usize| move |k: usize| spec.weight(j, k);
    blocks[i - 1] = Some(solve_fixed_point(w(i), None, 1.0, m)?);
    for j in (1..i).rev() {
        let b = blocks[j].as_ref();
        blocks[j - 1] = Some(solve_fixed_point(w(j), b, 0.0, m)?);
    }
    Ok(blocks)
}

/// `x ⊕ x ∈ E_3` means `x = T x + y e`. The shift block forces
/// `x_{N+1} = (y, y, ...)`, which is square-summable only for `y = 0`; the
/// remaining blocks solve `B_{w_j} x_j + x_{j+1} = x_j` downward from `j = N`.
pub fn exact_basis_e3_cap_e4(spec: &ExoticSpec) -> Result<Vec<Witness>> {
    let m = spec.truncation();
    let mut out = Vec::with_capacity(spec.n_blocks());
    for i in 1..=spec.n_blocks() {
        let blocks = e3_cap_e4_blocks(spec, i)?;
        let mut x = vec![0.0; spec.k_dim()];
        let mut equation = 0.0f64;
        let mut tail_sq = 0.0f64;
        let mut tail_ok = true;
        let mut envelope_ok = true;
        let mut degree = 0;
        for (j, b) in blocks.iter().enumerate() {
            let Some(b) = b else { continue };
            for k in 1..=m {
                x[spec.index(j + 1, k)] = b.get(k);
            }
            equation = equation.max(b.equation_residual);
            envelope_ok &= b.respects_envelope();
            degree = degree.max(b.envelope.degree());
            match b.tail_bound(m) {
                Some(t) => tail_sq += t * t,
                None => tail_ok = false,
            }
        }
        let (res, y) = e3_membership(spec, &x, &x);
        out.push(Witness {
            pair: (3, 4),
            parameter: i,
            form: WitnessForm::XX,
            x,
            e3_residual: res.max(y.abs()),
            equation_residual: equation,
            tail_bound: tail_ok.then(|| tail_sq.sqrt()),
            envelope_degree: Some(degree),
            envelope_ok,
        });
    }
    Ok(out)
}

/// Gram matrix of the witnesses' `x` components.
pub fn gram(witnesses: &[Witness]) -> nalgebra::DMatrix<f64> {
    let n = witnesses.len();
    nalgebra::DMatrix::from_fn(n, n, |a, b| {
        witnesses[a]
            .x
            .iter()
            .zip(&witnesses[b].x)
            .map(|(p, q)| p * q)
            .sum()
    })
}
