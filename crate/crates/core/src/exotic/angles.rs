//! Principal angles between the truncated `E_3` and `E_4`.
//!
//! `E_3^⊥ = {(-Tᵀz, z) : z ⊥ e}`. With `Z` the identity minus the `e`
//! column, `Y = [-TᵀZ; Z]` spans `E_3^⊥` and `YᵀY = Zᵀ(I + TTᵀ)Z = LLᵀ`.
//! Since `E_4` has orthonormal basis `[I; I]/√2`, the sines of the angles are
//! the singular values of `L⁻¹ Zᵀ(I - T)/√2` together with one structural
//! zero (`dim E_3 + dim E_4 > dim H`).

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use super::witnesses::{gram, Witness};
use super::{t_entries, ExoticSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct AngleSpectrum {
    /// All `dim E_4` principal angles in nondecreasing order.
    pub angles: Vec<f64>,
    /// Number of angles at or below `angle_tol`.
    pub near_zero: usize,
    /// Smallest angle above `angle_tol`, if any.
    pub first_nonzero: Option<f64>,
}

pub fn e3_e4_principal_angles(spec: &ExoticSpec) -> Result<AngleSpectrum> {
    let n = spec.k_dim();
    let e = spec.e_index();
    // drop row/column e
    let z = |i: usize| -> Option<usize> {
        match i.cmp(&e) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        }
    };
    let entries = t_entries(spec);
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(r, c, v) in &entries {
        by_col[c].push((r, v));
    }
    let mut g = DMatrix::<f64>::identity(n - 1, n - 1);
    for col in &by_col {
        for &(a, va) in col {
            for &(b, vb) in col {
                if let (Some(ia), Some(ib)) = (z(a), z(b)) {
                    g[(ia, ib)] += va * vb;
                }
            }
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut y = DMatrix::<f64>::zeros(n - 1, n);
    for i in 0..n {
        if let Some(zi) = z(i) {
            y[(zi, i)] += s;
        }
    }
    for &(r, c, v) in &entries {
        if let Some(zr) = z(r) {
            y[(zr, c)] -= s * v;
        }
    }
    let chol = Cholesky::new(g).ok_or_else(|| Error::PropertyViolation {
        clause: "complement-gram".into(),
        detail: "Zᵀ(I + TTᵀ)Z is not positive definite".into(),
    })?;
    let x = chol
        .l()
        .solve_lower_triangular(&y)
        .ok_or_else(|| Error::PropertyViolation {
            clause: "complement-gram".into(),
            detail: "singular Cholesky factor".into(),
        })?;
    let mut sines: Vec<f64> = x.singular_values().iter().copied().collect();
    sines.push(0.0);
    let mut angles: Vec<f64> = sines.iter().map(|s| s.clamp(0.0, 1.0).asin()).collect();
    angles.sort_by(f64::total_cmp);
    let tol = spec.policy().angle_tol;
    let near_zero = angles.iter().filter(|a| **a <= tol).count();
    let first_nonzero = angles.iter().copied().find(|a| *a > tol);
    Ok(AngleSpectrum {
        angles,
        near_zero,
        first_nonzero,
    })
}

/// Courant–Fischer bound from explicit witnesses `x_i ⊕ x_i`: at least
/// `count` principal angles between `E_4` and `E_3` are at most `angle`.
#[derive(Debug, Clone, Serialize)]
pub struct AngleBound {
    pub count: usize,
    pub sine: f64,
    pub angle: f64,
}

/// For `v = (x, x)`, `‖P_{E_3^⊥} v‖ <= ‖Zᵀ(I - T)x‖` because `YᵀY ⪰ I`, and
/// `‖(Xc, Xc)‖ >= √2 σ_min(X) ‖c‖`.
pub fn e3_e4_angle_bound(witnesses: &[Witness]) -> Result<AngleBound> {
    if witnesses.is_empty() {
        return Err(Error::InsufficientData("no witnesses".into()));
    }
    let frob = witnesses
        .iter()
        .map(|w| w.e3_residual.powi(2))
        .sum::<f64>()
        .sqrt();
    let lambda_min = gram(witnesses).symmetric_eigenvalues().min();
    if lambda_min <= 0.0 {
        return Err(Error::PropertyViolation {
            clause: "witness-independence".into(),
            detail: format!("witness Gram matrix has eigenvalue {lambda_min:e}"),
        });
    }
    let sine = (frob / (2.0f64.sqrt() * lambda_min.sqrt())).min(1.0);
    Ok(AngleBound {
        count: witnesses.len(),
        sine,
        angle: sine.asin(),
    })
}
