//! Systems of four subspaces, their defects and intersection diagrams.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{RankEvidence, TolerancePolicy};
use crate::subspaces::{self, Subspace};

/// `(H; E_1, E_2, E_3, E_4)` with `H = R^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourSystem {
    ambient_dim: usize,
    subspaces: [Subspace; 4],
}

impl FourSystem {
    pub fn new(subspaces: [Subspace; 4]) -> Result<Self> {
        let d = subspaces[0].ambient_dim();
        for s in &subspaces[1..] {
            if s.ambient_dim() != d {
                return Err(Error::AmbientMismatch {
                    left: d,
                    right: s.ambient_dim(),
                });
            }
        }
        Ok(Self {
            ambient_dim: d,
            subspaces,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `E_i` for `i` in `1..=4`.
    pub fn subspace(&self, i: usize) -> &Subspace {
        &self.subspaces[i - 1]
    }

    pub fn subspaces(&self) -> &[Subspace; 4] {
        &self.subspaces
    }

    pub fn dims(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.subspaces[i].dim())
    }

    /// The system `(E_{perm[0]}, ..., E_{perm[3]})`; `perm` holds labels 1..=4.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            subspaces: perm.map(|i| self.subspaces[i - 1].clone()),
        }
    }

    /// Image of the whole system under an invertible map of `H`.
    pub fn transformed(&self, map: &DMatrix<f64>, policy: &TolerancePolicy) -> Result<Self> {
        let mut out = Vec::with_capacity(4);
        for s in &self.subspaces {
            out.push(s.image(map, policy)?);
        }
        Self::new(out.try_into().unwrap())
    }
}

/// Operator system `S_{A,B} = (K1 ⊕ K2; K1 ⊕ 0, 0 ⊕ K2, graph A, {(By, y)})`
/// with `A: K1 → K2` and `B: K2 → K1`; `B = None` means the identity.
pub fn operator_system(
    a: &DMatrix<f64>,
    b: Option<&DMatrix<f64>>,
    policy: &TolerancePolicy,
) -> Result<FourSystem> {
    let (k2, k1) = a.shape();
    let identity;
    let b = match b {
        Some(b) => b,
        None => {
            if k1 != k2 {
                return Err(Error::DimensionMismatch(format!(
                    "identity antigraph needs a square operator, got {k2}x{k1}"
                )));
            }
            identity = DMatrix::identity(k1, k1);
            &identity
        }
    };
    if b.shape() != (k1, k2) {
        return Err(Error::DimensionMismatch(format!(
            "B must be {k1}x{k2}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let d = k1 + k2;
    let mut graph = DMatrix::zeros(d, k1);
    graph.view_mut((0, 0), (k1, k1)).fill_with_identity();
    graph.view_mut((k1, 0), (k2, k1)).copy_from(a);
    let mut antigraph = DMatrix::zeros(d, k2);
    antigraph.view_mut((0, 0), (k1, k2)).copy_from(b);
    antigraph.view_mut((k1, 0), (k2, k2)).fill_with_identity();
    FourSystem::new([
        Subspace::coordinate(d, 0, k1)?,
        Subspace::coordinate(d, k1, k2)?,
        Subspace::span_independent(&graph, policy),
        Subspace::span_independent(&antigraph, policy),
    ])
}

pub fn direct_sum(s: &FourSystem, t: &FourSystem) -> FourSystem {
    FourSystem {
        ambient_dim: s.ambient_dim + t.ambient_dim,
        subspaces: [0, 1, 2, 3].map(|i| s.subspaces[i].direct_sum(&t.subspaces[i])),
    }
}

/// `sum_i dim E_i - 2 dim H`.
pub fn defect_gp(s: &FourSystem) -> i64 {
    s.dims().iter().sum::<usize>() as i64 - 2 * s.ambient_dim as i64
}

/// Intersection and sum-complement data for one pair `E_i, E_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairData {
    pub i: usize,
    pub j: usize,
    pub dim_intersection: usize,
    pub dim_sum_complement: usize,
    /// Smallest principal angle between `E_i` and `E_j`.
    pub min_angle: Option<f64>,
    pub evidence: RankEvidence,
}

impl PairData {
    pub fn index(&self) -> i64 {
        self.dim_intersection as i64 - self.dim_sum_complement as i64
    }
}

pub const PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

pub fn pair_data(s: &FourSystem, i: usize, j: usize, policy: &TolerancePolicy) -> Result<PairData> {
    let (u, v) = (s.subspace(i), s.subspace(j));
    let (cap, evidence) = subspaces::intersect_with_evidence(u, v, policy)?;
    let total = subspaces::sum(u, v, policy)?;
    Ok(PairData {
        i,
        j,
        dim_intersection: cap.dim(),
        dim_sum_complement: s.ambient_dim - total.dim(),
        min_angle: subspaces::min_angle(u, v)?,
        evidence,
    })
}

pub fn all_pair_data(s: &FourSystem, policy: &TolerancePolicy) -> Result<Vec<PairData>> {
    PAIRS
        .iter()
        .map(|&(i, j)| pair_data(s, i, j, policy))
        .collect()
}

/// `(1/3) sum_{i<j} (dim(E_i ∩ E_j) - dim((E_i + E_j)^⊥))` from precomputed
/// pair data.
pub fn defect_from_pairs(pairs: &[PairData]) -> Rational64 {
    Rational64::new(pairs.iter().map(PairData::index).sum(), 3)
}

pub fn defect_quasi_fredholm(s: &FourSystem, policy: &TolerancePolicy) -> Result<Rational64> {
    Ok(defect_from_pairs(&all_pair_data(s, policy)?))
}

/// Graph on vertices 1..=4 with an edge `{i, j}` exactly when `E_i ∩ E_j = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct IntersectionDiagram {
    edges: BTreeSet<(usize, usize)>,
}

impl IntersectionDiagram {
    pub fn from_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            edges: edges
                .into_iter()
                .map(|(i, j)| (i.min(j), i.max(j)))
                .filter(|(i, j)| i != j)
                .collect(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = [false; 5];
        let mut stack = vec![1];
        seen[1] = true;
        while let Some(v) = stack.pop() {
            for (w, s) in seen.iter_mut().enumerate().skip(1) {
                if !*s && self.has_edge(v, w) {
                    *s = true;
                    stack.push(w);
                }
            }
        }
        seen[1..].iter().all(|s| *s)
    }

    /// Vertices with no incident edge.
    pub fn isolated_vertices(&self) -> Vec<usize> {
        (1..=4)
            .filter(|&v| (1..=4).all(|w| !self.has_edge(v, w)))
            .collect()
    }

    /// Diagram of the permuted system `(E_{perm[0]}, ..., E_{perm[3]})`.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        let mut pos = [0; 5];
        for (k, &label) in perm.iter().enumerate() {
            pos[label] = k + 1;
        }
        Self::from_edges(self.edges().map(|(i, j)| (pos[i], pos[j])))
    }

    /// Deterministic DOT: vertices `n1..n4`, edges sorted.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph intersection_diagram {\n");
        for v in 1..=4 {
            let _ = writeln!(out, "  n{v};");
        }
        for (i, j) in self.edges() {
            let _ = writeln!(out, "  n{i} -- n{j};");
        }
        out.push_str("}\n");
        out
    }
}

/// All 24 permutations of the labels 1..=4 in lexicographic order.
pub fn permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 1..=4 {
        for b in 1..=4 {
            for c in 1..=4 {
                for d in 1..=4 {
                    let p = [a, b, c, d];
                    let distinct = (0..4).all(|x| (x + 1..4).all(|y| p[x] != p[y]));
                    if distinct {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// A relabeling `sigma` under which the diagram contains the path
/// `4 - 1 - 2 - 3`, i.e. edges `{σ4,σ1}`, `{σ1,σ2}` and `{σ2,σ3}`. Every
/// operator system has such a diagram with `sigma = id`. The witness is
/// reported as `[σ1, σ2, σ3, σ4]`.
pub fn operator_system_necessary_condition(diagram: &IntersectionDiagram) -> Option<[usize; 4]> {
    permutations().into_iter().find(|p| {
        diagram.has_edge(p[3], p[0]) && diagram.has_edge(p[0], p[1]) && diagram.has_edge(p[1], p[2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramReport {
    pub diagram: IntersectionDiagram,
    pub pairs: Vec<PairData>,
    pub connected: bool,
}

pub fn intersection_diagram(s: &FourSystem, policy: &TolerancePolicy) -> Result<DiagramReport> {
    let pairs = all_pair_data(s, policy)?;
    Ok(diagram_from_pairs(pairs))
}

pub fn diagram_from_pairs(pairs: Vec<PairData>) -> DiagramReport {
    let diagram = IntersectionDiagram::from_edges(
        pairs
            .iter()
            .filter(|p| p.dim_intersection == 0)
            .map(|p| (p.i, p.j)),
    );
    let connected = diagram.is_connected();
    DiagramReport {
        diagram,
        pairs,
        connected,
    }
}

/// True when no relabeling of the diagram contains the operator-system path,
/// which rules out every closed operator system under every permutation.
pub fn exotic_by_diagram(s: &FourSystem, policy: &TolerancePolicy) -> Result<bool> {
    let report = intersection_diagram(s, policy)?;
    Ok(operator_system_necessary_condition(&report.diagram).is_none())
}

/// Everything the `build`/`defect` reports need about one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub ambient_dim: usize,
    pub dims: [usize; 4],
    pub pairwise_intersections: Vec<PairData>,
    pub defect_gp: i64,
    pub defect_qf: String,
    pub diagram: IntersectionDiagram,
    pub connected: bool,
    pub path_witness: Option<[usize; 4]>,
    pub exotic_flag: bool,
}

pub fn system_report(s: &FourSystem, policy: &TolerancePolicy) -> Result<SystemReport> {
    let report = intersection_diagram(s, policy)?;
    let qf = defect_from_pairs(&report.pairs);
    let witness = operator_system_necessary_condition(&report.diagram);
    Ok(SystemReport {
        ambient_dim: s.ambient_dim(),
        dims: s.dims(),
        defect_gp: defect_gp(s),
        defect_qf: format_rational(qf),
        diagram: report.diagram,
        connected: report.connected,
        path_witness: witness,
        exotic_flag: witness.is_none(),
        pairwise_intersections: report.pairs,
    })
}

/// `num/den` in lowest terms; integers print without a denominator.
pub fn format_rational(r: Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn lines_in_plane(dirs: [[f64; 2]; 4]) -> FourSystem {
        FourSystem::new(dirs.map(|v| Subspace::span(&DMatrix::from_column_slice(2, 1, &v), &p())))
            .unwrap()
    }

    fn jordan(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn operator_system_shapes() {
        let s = operator_system(&DMatrix::zeros(1, 1), None, &p()).unwrap();
        assert_eq!(s.ambient_dim(), 2);
        assert!(subspaces::equal(s.subspace(3), s.subspace(1), &p()).unwrap());
        let s = operator_system(&DMatrix::identity(2, 2), None, &p()).unwrap();
        assert!(subspaces::equal(s.subspace(3), s.subspace(4), &p()).unwrap());
        let s = operator_system(&jordan(2), None, &p()).unwrap();
        assert_eq!(s.dims(), [2, 2, 2, 2]);
        assert!(subspaces::intersect(s.subspace(3), s.subspace(2), &p())
            .unwrap()
            .is_zero());
        assert!(operator_system(&DMatrix::zeros(2, 3), None, &p()).is_err());
        assert!(operator_system(&DMatrix::zeros(2, 3), Some(&DMatrix::zeros(2, 3)), &p()).is_err());
        assert!(operator_system(&DMatrix::zeros(2, 3), Some(&DMatrix::zeros(3, 2)), &p()).is_ok());
    }

    #[test]
    fn defects() {
        let trivial = FourSystem::new([
            Subspace::full(1),
            Subspace::full(1),
            Subspace::full(1),
            Subspace::full(1),
        ])
        .unwrap();
        assert_eq!(defect_gp(&trivial), 2);
        assert_eq!(
            defect_quasi_fredholm(&trivial, &p()).unwrap(),
            Rational64::from(2)
        );
        let s = operator_system(&jordan(3), None, &p()).unwrap();
        assert_eq!(defect_gp(&s), 0);
        assert_eq!(
            defect_quasi_fredholm(&s, &p()).unwrap(),
            Rational64::from(0)
        );
        let lines = lines_in_plane([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -2.0]]);
        assert_eq!(
            defect_quasi_fredholm(&lines, &p()).unwrap(),
            Rational64::from(0)
        );
    }

    #[test]
    fn direct_sum_dims_add() {
        let a = operator_system(&jordan(2), None, &p()).unwrap();
        let b = lines_in_plane([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -2.0]]);
        let s = direct_sum(&a, &b);
        assert_eq!(s.dims(), [3, 3, 3, 3]);
        assert_eq!(defect_gp(&s), defect_gp(&a) + defect_gp(&b));
        let zero = FourSystem::new([
            Subspace::zero(0),
            Subspace::zero(0),
            Subspace::zero(0),
            Subspace::zero(0),
        ])
        .unwrap();
        assert_eq!(direct_sum(&a, &zero), a);
    }

    #[test]
    fn diagrams() {
        let lines = lines_in_plane([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -2.0]]);
        let d = intersection_diagram(&lines, &p()).unwrap();
        assert_eq!(d.diagram.edge_count(), 6);
        assert!(d.connected);
        let same = lines_in_plane([[1.0, 2.0]; 4]);
        let d = intersection_diagram(&same, &p()).unwrap();
        assert_eq!(d.diagram.edge_count(), 0);
        assert_eq!(d.diagram.isolated_vertices(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn necessary_condition() {
        let path = IntersectionDiagram::from_edges([(4, 1), (1, 2), (2, 3)]);
        assert_eq!(
            operator_system_necessary_condition(&path),
            Some([1, 2, 3, 4])
        );
        assert_eq!(
            operator_system_necessary_condition(&IntersectionDiagram::default()),
            None
        );
        let exotic = IntersectionDiagram::from_edges([(1, 2), (1, 4), (2, 4)]);
        assert!(!exotic.is_connected());
        assert_eq!(exotic.isolated_vertices(), vec![3]);
        assert_eq!(operator_system_necessary_condition(&exotic), None);
        // a star is connected but has no Hamiltonian path
        let star = IntersectionDiagram::from_edges([(1, 2), (1, 3), (1, 4)]);
        assert!(star.is_connected());
        assert_eq!(operator_system_necessary_condition(&star), None);
    }

    #[test]
    fn operator_systems_are_not_exotic() {
        for a in [
            jordan(3),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0])),
        ] {
            let s = operator_system(&a, None, &p()).unwrap();
            assert!(!exotic_by_diagram(&s, &p()).unwrap());
        }
        let lines = lines_in_plane([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -2.0]]);
        assert!(!exotic_by_diagram(&lines, &p()).unwrap());
    }

    #[test]
    fn permuted_diagram_relabels() {
        let d = IntersectionDiagram::from_edges([(1, 2), (1, 4), (2, 4)]);
        // new E_1 = old E_3, so the isolated vertex moves to 1
        let q = d.permuted([3, 1, 2, 4]);
        assert_eq!(q.isolated_vertices(), vec![1]);
        assert_eq!(q.edge_count(), 3);
    }

    #[test]
    fn dot_output() {
        let d = IntersectionDiagram::from_edges([(2, 4), (1, 2), (4, 1)]);
        assert_eq!(
            d.to_dot(),
            "graph intersection_diagram {\n  n1;\n  n2;\n  n3;\n  n4;\n  n1 -- n2;\n  n1 -- n4;\n  n2 -- n4;\n}\n"
        );
    }

    #[test]
    fn rational_formatting() {
        assert_eq!(format_rational(Rational64::new(9, 3)), "3");
        assert_eq!(format_rational(Rational64::new(5, 3)), "5/3");
    }
}
