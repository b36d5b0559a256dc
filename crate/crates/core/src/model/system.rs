//! State-space data, per-label families and quadratic performance indices.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{eye, ingest_symmetric, max_abs, zeros, Mat};
use crate::model::graph::{ConstrainingGraph, Edge, NodeId};

pub(crate) const SYM_TOL: f64 = 1e-10;

/// Discrete-time system x+ = A x + B w, z = C x + D w.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return dim_err(format!("A must be square, got {}x{}", n, a.ncols()));
        }
        if b.nrows() != n {
            return dim_err(format!("B has {} rows, expected {n}", b.nrows()));
        }
        if c.ncols() != n {
            return dim_err(format!("C has {} columns, expected {n}", c.ncols()));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return dim_err(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            ));
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Scalar convenience constructor.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        let m = |v: f64| Mat::from_element(1, 1, v);
        StateSpace { a: m(a), b: m(b), c: m(c), d: m(d) }
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn data_norm(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d].iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// Per-label systems sharing one state dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemFamily {
    systems: Vec<StateSpace>,
}

impl SystemFamily {
    /// `systems[l-1]` is assigned to label `l`.
    pub fn new(systems: Vec<StateSpace>) -> Result<Self> {
        if systems.is_empty() {
            return Err(Error::Invalid("system family is empty".into()));
        }
        let n = systems[0].states();
        if let Some((l, s)) = systems.iter().enumerate().find(|(_, s)| s.states() != n) {
            return dim_err(format!("label {} has state dimension {}, expected {n}", l + 1, s.states()));
        }
        Ok(SystemFamily { systems })
    }

    pub fn get(&self, label: usize) -> Option<&StateSpace> {
        label.checked_sub(1).and_then(|i| self.systems.get(i))
    }

    pub fn systems(&self) -> &[StateSpace] {
        &self.systems
    }

    pub fn num_labels(&self) -> usize {
        self.systems.len()
    }

    pub fn state_dim(&self) -> usize {
        self.systems[0].states()
    }
}

/// Source of per-edge state-space data for assembly and simulation.
pub trait EdgeSystems {
    fn system_for(&self, edge: &Edge) -> Result<&StateSpace>;
}

impl EdgeSystems for SystemFamily {
    fn system_for(&self, edge: &Edge) -> Result<&StateSpace> {
        self.get(edge.label).ok_or_else(|| Error::Invalid(format!("label {} unassigned", edge.label)))
    }
}

/// Systems keyed by (node, label), e.g. a closed loop with node-dependent
/// gains.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NodeLabelSystems {
    pub map: BTreeMap<(NodeId, usize), StateSpace>,
}

impl EdgeSystems for NodeLabelSystems {
    fn system_for(&self, edge: &Edge) -> Result<&StateSpace> {
        self.map
            .get(&(edge.tail, edge.label))
            .ok_or_else(|| Error::Invalid(format!("no system for node {} label {}", edge.tail, edge.label)))
    }
}

/// One label's (Q, S, R) triple.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexBlock {
    q: Mat,
    s: Mat,
    r: Mat,
}

impl IndexBlock {
    pub fn new(q: Mat, s: Mat, r: Mat) -> Result<Self> {
        let q = ingest_symmetric(&q, SYM_TOL, "Q")?;
        let r = ingest_symmetric(&r, SYM_TOL, "R")?;
        if s.nrows() != q.nrows() || s.ncols() != r.nrows() {
            return dim_err(format!(
                "S is {}x{}, expected {}x{}",
                s.nrows(),
                s.ncols(),
                q.nrows(),
                r.nrows()
            ));
        }
        Ok(IndexBlock { q, s, r })
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }
    pub fn s(&self) -> &Mat {
        &self.s
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn inputs(&self) -> usize {
        self.q.nrows()
    }
    pub fn outputs(&self) -> usize {
        self.r.nrows()
    }

    /// Full matrix [[Q, S], [S', R]].
    pub fn matrix(&self) -> Mat {
        let (di, d_o) = (self.inputs(), self.outputs());
        let mut p = zeros(di + d_o, di + d_o);
        p.view_mut((0, 0), (di, di)).copy_from(&self.q);
        p.view_mut((0, di), (di, d_o)).copy_from(&self.s);
        p.view_mut((di, 0), (d_o, di)).copy_from(&self.s.transpose());
        p.view_mut((di, di), (d_o, d_o)).copy_from(&self.r);
        p
    }

    /// Splits a full (d_i + d_o) square matrix into blocks.
    pub fn from_matrix(p: &Mat, di: usize) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || di > n {
            return dim_err("index matrix shape");
        }
        let d_o = n - di;
        IndexBlock::new(
            p.view((0, 0), (di, di)).into_owned(),
            p.view((0, di), (di, d_o)).into_owned(),
            p.view((di, di), (d_o, d_o)).into_owned(),
        )
    }

    pub fn data_norm(&self) -> f64 {
        self.q.norm().max(self.s.norm()).max(self.r.norm())
    }
}

/// Per-label quadratic performance (or dissipativity) index.
#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceIndex {
    blocks: Vec<IndexBlock>,
}

impl PerformanceIndex {
    /// `blocks[l-1]` belongs to label `l`.
    pub fn new(blocks: Vec<IndexBlock>) -> Self {
        PerformanceIndex { blocks }
    }

    pub fn get(&self, label: usize) -> Option<&IndexBlock> {
        label.checked_sub(1).and_then(|i| self.blocks.get(i))
    }

    pub fn blocks(&self) -> &[IndexBlock] {
        &self.blocks
    }

    pub fn num_labels(&self) -> usize {
        self.blocks.len()
    }
}

/// Index with Q = -gamma^2 I, S = 0, R = I per label.
pub fn l2_index(gamma: f64, f: &SystemFamily) -> Result<PerformanceIndex> {
    let dims: Vec<(usize, usize)> = f.systems().iter().map(|s| (s.inputs(), s.outputs())).collect();
    l2_index_dims(gamma, &dims)
}

/// [`l2_index`] from explicit (input, output) dimensions per label.
pub fn l2_index_dims(gamma: f64, dims: &[(usize, usize)]) -> Result<PerformanceIndex> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Invalid(format!("gamma must be positive, got {gamma}")));
    }
    let blocks = dims
        .iter()
        .map(|&(di, d_o)| IndexBlock {
            q: eye(di) * (-gamma * gamma),
            s: zeros(di, d_o),
            r: eye(d_o),
        })
        .collect();
    Ok(PerformanceIndex { blocks })
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairingViolation {
    LabelUnassigned(usize),
    ExtraLabel(usize),
    StateDimension { label: usize, found: usize, expected: usize },
    IndexMissing(usize),
    IndexInputDim { label: usize, found: usize, expected: usize },
    IndexOutputDim { label: usize, found: usize, expected: usize },
}

impl fmt::Display for PairingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingViolation::LabelUnassigned(l) => write!(f, "label {l} unassigned"),
            PairingViolation::ExtraLabel(l) => write!(f, "label {l} has a system but is not in the graph"),
            PairingViolation::StateDimension { label, found, expected } => {
                write!(f, "label {label}: state dimension {found}, expected {expected}")
            }
            PairingViolation::IndexMissing(l) => write!(f, "index block for label {l} missing"),
            PairingViolation::IndexInputDim { label, found, expected } => {
                write!(f, "label {label}: index Q is {found}x{found}, system input dimension is {expected}")
            }
            PairingViolation::IndexOutputDim { label, found, expected } => {
                write!(f, "label {label}: index R is {found}x{found}, system output dimension is {expected}")
            }
        }
    }
}

pub fn validate_pairing(g: &ConstrainingGraph, f: &SystemFamily, p: Option<&PerformanceIndex>) -> Vec<PairingViolation> {
    let mut v = Vec::new();
    let n = f.state_dim();
    for l in 1..=g.num_labels() {
        match f.get(l) {
            None => v.push(PairingViolation::LabelUnassigned(l)),
            Some(s) if s.states() != n => v.push(PairingViolation::StateDimension { label: l, found: s.states(), expected: n }),
            Some(_) => {}
        }
    }
    for l in g.num_labels() + 1..=f.num_labels() {
        v.push(PairingViolation::ExtraLabel(l));
    }
    if let Some(p) = p {
        for l in 1..=g.num_labels() {
            let (Some(s), Some(b)) = (f.get(l), p.get(l)) else {
                if p.get(l).is_none() {
                    v.push(PairingViolation::IndexMissing(l));
                }
                continue;
            };
            if b.inputs() != s.inputs() {
                v.push(PairingViolation::IndexInputDim { label: l, found: b.inputs(), expected: s.inputs() });
            }
            if b.outputs() != s.outputs() {
                v.push(PairingViolation::IndexOutputDim { label: l, found: b.outputs(), expected: s.outputs() });
            }
        }
    }
    v
}

/// Largest absolute entry over a family, used for reporting.
pub fn family_scale(f: &SystemFamily) -> f64 {
    f.systems().iter().map(|s| max_abs(s.a()).max(max_abs(s.b()))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_index_blocks() {
        let s = StateSpace::new(zeros(1, 1), zeros(1, 2), zeros(1, 1), zeros(1, 2)).unwrap();
        let f = SystemFamily::new(vec![s]).unwrap();
        let p = l2_index(1.0, &f).unwrap();
        assert_eq!(p.get(1).unwrap().q(), &(-eye(2)));
        assert_eq!(p.get(1).unwrap().s().shape(), (2, 1));
        assert_eq!(p.get(1).unwrap().r(), &eye(1));
        let p2 = l2_index(2.0, &SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(p2.get(1).unwrap().q()[(0, 0)], -4.0);
        assert!(l2_index(0.0, &f).is_err());
        assert!(l2_index(-1.0, &f).is_err());
    }

    #[test]
    fn pairing_reports() {
        let g = ConstrainingGraph::from_triples(&[(1, 1, 1), (1, 2, 2), (2, 1, 1)], 2).unwrap();
        let f1 = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(validate_pairing(&g, &f1, None), vec![PairingViolation::LabelUnassigned(2)]);
        assert_eq!(PairingViolation::LabelUnassigned(2).to_string(), "label 2 unassigned");

        let s2 = StateSpace::new(zeros(1, 1), zeros(1, 2), zeros(2, 1), zeros(2, 2)).unwrap();
        let f = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0), s2]).unwrap();
        assert!(validate_pairing(&g, &f, None).is_empty());
        let bad = PerformanceIndex::new(vec![
            IndexBlock::new(eye(1), zeros(1, 1), eye(1)).unwrap(),
            IndexBlock::new(eye(2), zeros(2, 3), eye(3)).unwrap(),
        ]);
        let v = validate_pairing(&g, &f, Some(&bad));
        assert_eq!(v, vec![PairingViolation::IndexOutputDim { label: 2, found: 3, expected: 2 }]);
        assert!(v[0].to_string().contains("label 2") && v[0].to_string().contains('3') && v[0].to_string().contains('2'));
    }

    #[test]
    fn dimension_checks() {
        assert!(StateSpace::new(zeros(2, 2), zeros(1, 1), zeros(1, 2), zeros(1, 1)).is_err());
        assert!(StateSpace::new(zeros(2, 2), zeros(2, 1), zeros(1, 2), zeros(2, 1)).is_err());
        let asym = Mat::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(IndexBlock::new(asym, zeros(2, 1), eye(1)).is_err());
    }
}
