//! The defect ledger and the certificate that `S_{w,N}` is exotic.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use num_rational::Rational64;
use serde::Serialize;

use super::angles::{e3_e4_angle_bound, AngleBound};
use super::witnesses::{basis_e2_cap_e3, exact_basis_e1_cap_e3, exact_basis_e3_cap_e4, Witness};
use super::{build_system, truncated_defect_gp, ExoticSpec, SpecRecord};
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, TolerancePolicy};
use crate::subspaces;
use crate::systems::{
    format_rational, operator_system_necessary_condition, IntersectionDiagram, PAIRS,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub i: usize,
    pub j: usize,
    pub dim_intersection: usize,
    pub dim_sum_complement: usize,
    pub intersection_reason: &'static str,
    pub complement_reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectLedger {
    pub n_blocks: usize,
    pub entries: Vec<LedgerEntry>,
    /// `(1/3) Σ (dim ∩ - dim (+)^⊥)` in lowest terms.
    pub defect: String,
    pub defect_numerator: i64,
    pub defect_denominator: i64,
    /// `Σ dim E_i - 2 dim H` of the finite truncation, kept alongside to
    /// show that it does not see the defect.
    pub truncated_defect_gp: i64,
}

impl DefectLedger {
    pub fn defect(&self) -> Rational64 {
        Rational64::new(self.defect_numerator, self.defect_denominator)
    }

    pub fn entry(&self, i: usize, j: usize) -> &LedgerEntry {
        self.entries.iter().find(|e| e.i == i && e.j == j).unwrap()
    }
}

/// Rank of the parameter matrix `(x_j(1))`; the recursions determine each
/// vector from its parameters, so this is the dimension of the intersection.
fn parameter_rank(spec: &ExoticSpec, witnesses: &[Witness]) -> usize {
    if witnesses.is_empty() {
        return 0;
    }
    let n = spec.n_blocks();
    let p = DMatrix::from_fn(witnesses.len(), n, |a, j| {
        witnesses[a].x[spec.index(j + 1, 1)]
    });
    numeric_rank(&p, &TolerancePolicy::default())
}

const ZERO_12: &str = "K ⊕ 0 and 0 ⊕ K meet only in 0";
const ZERO_14: &str = "x ⊕ 0 = z ⊕ z forces z = 0";
const ZERO_24: &str = "0 ⊕ x = z ⊕ z forces z = 0";
const SUM_12: &str = "(a, b) = (a, 0) + (0, b)";
const SUM_14: &str = "(a, b) = (a - b, 0) + (b, b)";
const SUM_24: &str = "(a, b) = (0, b - a) + (a, a)";
const SUM_13: &str = "range T + C e = K, since S has range e^⊥";
const SUM_23: &str = "(a, b) = (0, b - T a) + (a, T a)";
const SUM_34: &str = "E_3^⊥ ∩ E_4^⊥ = 0: z ⊥ e with Tᵀz = z forces z = 0";
const CAP_13: &str = "x ⊕ 0 with T x = 0, parametrized by x_j(1)";
const CAP_23: &str = "0 ⊕ y e";
const CAP_34: &str = "x ⊕ x with B_j x_j + x_{j+1} = x_j and x_{N+1} = 0, parametrized by x_j(1)";

pub fn defect_exotic(spec: &ExoticSpec) -> Result<DefectLedger> {
    let n = spec.n_blocks();
    let e13 = exact_basis_e1_cap_e3(spec);
    let e34 = exact_basis_e3_cap_e4(spec)?;
    let d13 = parameter_rank(spec, &e13);
    let d34 = parameter_rank(spec, &e34);
    let d23 = usize::from(basis_e2_cap_e3(spec).e3_residual == 0.0);
    let entry = |i, j, dim, ir, cr| LedgerEntry {
        i,
        j,
        dim_intersection: dim,
        dim_sum_complement: 0,
        intersection_reason: ir,
        complement_reason: cr,
    };
    let entries = vec![
        entry(1, 2, 0, ZERO_12, SUM_12),
        entry(1, 3, d13, CAP_13, SUM_13),
        entry(1, 4, 0, ZERO_14, SUM_14),
        entry(2, 3, d23, CAP_23, SUM_23),
        entry(2, 4, 0, ZERO_24, SUM_24),
        entry(3, 4, d34, CAP_34, SUM_34),
    ];
    debug_assert_eq!(
        entries.iter().map(|e| (e.i, e.j)).collect::<Vec<_>>(),
        PAIRS.to_vec()
    );
    let total: i64 = entries
        .iter()
        .map(|e| e.dim_intersection as i64 - e.dim_sum_complement as i64)
        .sum();
    if d13 != n || d34 != n || d23 != 1 {
        return Err(Error::PropertyViolation {
            clause: "dimension-ledger".into(),
            detail: format!("intersection dims ({d13}, {d23}, {d34}) for N = {n}"),
        });
    }
    let defect = Rational64::new(total, 3);
    Ok(DefectLedger {
        n_blocks: n,
        entries,
        defect: format_rational(defect),
        defect_numerator: *defect.numer(),
        defect_denominator: *defect.denom(),
        truncated_defect_gp: truncated_defect_gp(spec),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralZero {
    pub pair: (usize, usize),
    pub argument: &'static str,
    /// Exact smallest principal angle.
    pub angle: f64,
    /// Same angle computed numerically on a small truncation.
    pub numeric_angle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExoticCertificate {
    pub spec: SpecRecord,
    pub ledger: DefectLedger,
    pub witnesses: Vec<Witness>,
    pub structural_zeros: Vec<StructuralZero>,
    pub e3_e4_angle_bound: AngleBound,
    pub max_equation_residual: f64,
    pub max_tail_bound: f64,
    pub diagram: IntersectionDiagram,
    pub connected: bool,
    pub isolated_vertices: Vec<usize>,
    pub path_witness: Option<[usize; 4]>,
    pub exotic: bool,
}

pub fn verify_exotic(spec: &ExoticSpec) -> Result<ExoticCertificate> {
    let policy = *spec.policy();
    let ledger = defect_exotic(spec)?;
    let mut witnesses = exact_basis_e1_cap_e3(spec);
    witnesses.push(basis_e2_cap_e3(spec));
    let e34 = exact_basis_e3_cap_e4(spec)?;
    let angle_bound = e3_e4_angle_bound(&e34)?;
    witnesses.extend(e34);

    let mut max_res = 0.0f64;
    let mut max_tail = 0.0f64;
    for w in &witnesses {
        max_res = max_res.max(w.equation_residual);
        let tail = w.tail_bound.unwrap_or(f64::INFINITY);
        max_tail = max_tail.max(tail);
        let clause = format!("witness E_{} ∩ E_{} #{}", w.pair.0, w.pair.1, w.parameter);
        if w.equation_residual > policy.residual_tol {
            return Err(Error::CertificateRefused {
                clause,
                residual: w.equation_residual,
                tolerance: policy.residual_tol,
            });
        }
        if !w.envelope_ok {
            return Err(Error::CertificateRefused {
                clause: format!("{clause}: envelope"),
                residual: f64::INFINITY,
                tolerance: 1.0,
            });
        }
        if tail > spec.tail_eps() {
            return Err(Error::CertificateRefused {
                clause: format!("{clause}: tail"),
                residual: tail,
                tolerance: spec.tail_eps(),
            });
        }
    }

    let small = spec.at_truncation(spec.n_blocks() + 2)?;
    let sys = build_system(&small)?;
    let mut structural_zeros = Vec::new();
    for ((i, j), argument, angle) in [
        ((1, 2), ZERO_12, FRAC_PI_2),
        ((1, 4), ZERO_14, FRAC_PI_4),
        ((2, 4), ZERO_24, FRAC_PI_4),
    ] {
        let numeric = subspaces::min_angle(sys.subspace(i), sys.subspace(j))?.unwrap_or(FRAC_PI_2);
        if (numeric - angle).abs() > policy.angle_tol {
            return Err(Error::CertificateRefused {
                clause: format!("structural zero E_{i} ∩ E_{j}"),
                residual: (numeric - angle).abs(),
                tolerance: policy.angle_tol,
            });
        }
        structural_zeros.push(StructuralZero {
            pair: (i, j),
            argument,
            angle,
            numeric_angle: numeric,
        });
    }

    let diagram = IntersectionDiagram::from_edges(
        ledger
            .entries
            .iter()
            .filter(|e| e.dim_intersection == 0)
            .map(|e| (e.i, e.j)),
    );
    let path_witness = operator_system_necessary_condition(&diagram);
    Ok(ExoticCertificate {
        spec: spec.record(),
        connected: diagram.is_connected(),
        isolated_vertices: diagram.isolated_vertices(),
        exotic: path_witness.is_none(),
        path_witness,
        diagram,
        ledger,
        witnesses,
        structural_zeros,
        e3_e4_angle_bound: angle_bound,
        max_equation_residual: max_res,
        max_tail_bound: max_tail,
    })
}
