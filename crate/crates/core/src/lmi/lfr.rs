//! Linear fractional representations and open-loop plants with a control
//! channel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{eye, hstack, vstack, zeros, Mat};
use crate::model::graph::{ConstrainingGraph, Edge, NodeId};
use crate::model::system::{NodeLabelSystems, StateSpace, SystemFamily};

/// Structure of the uncertainty block w_u = Delta z_u.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyStructure {
    /// Delta = delta I with a real scalar |delta| <= 1.
    #[default]
    RepeatedScalar,
    /// Any Delta with spectral norm at most 1.
    FullBlock,
}

/// x+ = A x + B_wu w_u + B_wp w_p, z_u = C_zu x + D_uu w_u + D_up w_p,
/// z_p = C_zp x + D_pu w_u + D_pp w_p.
#[derive(Clone, Debug, PartialEq)]
pub struct LfrSystem {
    pub a: Mat,
    pub b_wu: Mat,
    pub b_wp: Mat,
    pub c_zu: Mat,
    pub c_zp: Mat,
    pub d_zu_wu: Mat,
    pub d_zu_wp: Mat,
    pub d_zp_wu: Mat,
    pub d_zp_wp: Mat,
}

impl LfrSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: Mat, b_wu: Mat, b_wp: Mat, c_zu: Mat, c_zp: Mat, d_zu_wu: Mat, d_zu_wp: Mat, d_zp_wu: Mat, d_zp_wp: Mat) -> Result<Self> {
        let s = LfrSystem { a, b_wu, b_wp, c_zu, c_zp, d_zu_wu, d_zu_wp, d_zp_wu, d_zp_wp };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let n = self.a.nrows();
        let (nwu, nwp, nzu, nzp) = (self.b_wu.ncols(), self.b_wp.ncols(), self.c_zu.nrows(), self.c_zp.nrows());
        let shapes = [
            ("A", &self.a, n, n),
            ("B_wu", &self.b_wu, n, nwu),
            ("B_wp", &self.b_wp, n, nwp),
            ("C_zu", &self.c_zu, nzu, n),
            ("C_zp", &self.c_zp, nzp, n),
            ("D_zu_wu", &self.d_zu_wu, nzu, nwu),
            ("D_zu_wp", &self.d_zu_wp, nzu, nwp),
            ("D_zp_wu", &self.d_zp_wu, nzp, nwu),
            ("D_zp_wp", &self.d_zp_wp, nzp, nwp),
        ];
        for (name, m, r, c) in shapes {
            if m.shape() != (r, c) {
                return dim_err(format!("{name} is {}x{}, expected {r}x{c}", m.nrows(), m.ncols()));
            }
        }
        Ok(())
    }

    /// LFR with an empty uncertainty channel.
    pub fn from_nominal(s: &StateSpace) -> Self {
        let n = s.states();
        LfrSystem {
            a: s.a().clone(),
            b_wu: zeros(n, 0),
            b_wp: s.b().clone(),
            c_zu: zeros(0, n),
            c_zp: s.c().clone(),
            d_zu_wu: zeros(0, 0),
            d_zu_wp: zeros(0, s.inputs()),
            d_zp_wu: zeros(s.outputs(), 0),
            d_zp_wp: s.d().clone(),
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn unc_inputs(&self) -> usize {
        self.b_wu.ncols()
    }
    pub fn unc_outputs(&self) -> usize {
        self.c_zu.nrows()
    }
    pub fn perf_inputs(&self) -> usize {
        self.b_wp.ncols()
    }
    pub fn perf_outputs(&self) -> usize {
        self.c_zp.nrows()
    }

    /// (A, B_wu, C_zu, D_zu_wu), the system seen by the multiplier.
    pub fn uncertainty_channel(&self) -> StateSpace {
        StateSpace::new(self.a.clone(), self.b_wu.clone(), self.c_zu.clone(), self.d_zu_wu.clone()).expect("checked LFR")
    }

    /// Performance channel with Delta = 0.
    pub fn nominal(&self) -> StateSpace {
        StateSpace::new(self.a.clone(), self.b_wp.clone(), self.c_zp.clone(), self.d_zp_wp.clone()).expect("checked LFR")
    }

    /// Stacked system with inputs (w_u, w_p) and outputs (z_u, z_p).
    pub fn augmented(&self) -> StateSpace {
        let b = hstack(&[&self.b_wu, &self.b_wp]).expect("checked LFR");
        let c = vstack(&[&self.c_zu, &self.c_zp]).expect("checked LFR");
        let top = hstack(&[&self.d_zu_wu, &self.d_zu_wp]).expect("checked LFR");
        let bot = hstack(&[&self.d_zp_wu, &self.d_zp_wp]).expect("checked LFR");
        let d = vstack(&[&top, &bot]).expect("checked LFR");
        StateSpace::new(self.a.clone(), b, c, d).expect("checked LFR")
    }

    /// Closes w_u = Delta z_u.
    pub fn close(&self, delta: &Mat) -> Result<StateSpace> {
        if delta.shape() != (self.unc_inputs(), self.unc_outputs()) {
            return dim_err(format!(
                "Delta is {}x{}, expected {}x{}",
                delta.nrows(),
                delta.ncols(),
                self.unc_inputs(),
                self.unc_outputs()
            ));
        }
        let lhs = eye(self.unc_inputs()) - delta * &self.d_zu_wu;
        let m = lhs.lu().solve(delta).ok_or_else(|| Error::Invalid("LFR is not well-posed for this Delta".into()))?;
        let a = &self.a + &self.b_wu * &m * &self.c_zu;
        let b = &self.b_wp + &self.b_wu * &m * &self.d_zu_wp;
        let c = &self.c_zp + &self.d_zp_wu * &m * &self.c_zu;
        let d = &self.d_zp_wp + &self.d_zp_wu * &m * &self.d_zu_wp;
        StateSpace::new(a, b, c, d)
    }

    /// Closes the loop with `delta` times the identity.
    pub fn close_scalar(&self, delta: f64) -> Result<StateSpace> {
        let mut dm = zeros(self.unc_inputs(), self.unc_outputs());
        for k in 0..self.unc_inputs().min(self.unc_outputs()) {
            dm[(k, k)] = delta;
        }
        self.close(&dm)
    }

    pub fn data_norm(&self) -> f64 {
        self.augmented().data_norm()
    }
}

/// Per-label LFRs with their uncertainty structure.
#[derive(Clone, Debug, PartialEq)]
pub struct LfrFamily {
    pub systems: Vec<LfrSystem>,
    pub structures: Vec<UncertaintyStructure>,
}

impl LfrFamily {
    pub fn new(systems: Vec<LfrSystem>, structures: Vec<UncertaintyStructure>) -> Result<Self> {
        if systems.is_empty() || systems.len() != structures.len() {
            return Err(Error::Invalid("LFR family needs one structure per label".into()));
        }
        let n = systems[0].states();
        if systems.iter().any(|s| s.states() != n) {
            return dim_err("LFR family state dimensions differ");
        }
        Ok(LfrFamily { systems, structures })
    }

    pub fn from_nominal(f: &SystemFamily) -> Self {
        LfrFamily {
            systems: f.systems().iter().map(LfrSystem::from_nominal).collect(),
            structures: vec![UncertaintyStructure::RepeatedScalar; f.num_labels()],
        }
    }

    pub fn get(&self, label: usize) -> Option<&LfrSystem> {
        label.checked_sub(1).and_then(|i| self.systems.get(i))
    }

    pub fn nominal(&self) -> SystemFamily {
        SystemFamily::new(self.systems.iter().map(|s| s.nominal()).collect()).expect("checked family")
    }

    pub fn at_delta(&self, delta: f64) -> Result<SystemFamily> {
        SystemFamily::new(self.systems.iter().map(|s| s.close_scalar(delta)).collect::<Result<Vec<_>>>()?)
    }
}

/// Per-edge LFR data.
pub trait EdgeLfrs {
    fn lfr_for(&self, edge: &Edge) -> Result<&LfrSystem>;
    fn structure_for(&self, edge: &Edge) -> UncertaintyStructure;
}

impl EdgeLfrs for LfrFamily {
    fn lfr_for(&self, edge: &Edge) -> Result<&LfrSystem> {
        self.get(edge.label).ok_or_else(|| Error::Invalid(format!("label {} unassigned", edge.label)))
    }
    fn structure_for(&self, edge: &Edge) -> UncertaintyStructure {
        self.structures.get(edge.label - 1).copied().unwrap_or_default()
    }
}

/// LFR plant with control input u entering through B_u, D_zu_u, D_zp_u.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopSystem {
    pub lfr: LfrSystem,
    pub b_u: Mat,
    pub d_zu_u: Mat,
    pub d_zp_u: Mat,
}

impl OpenLoopSystem {
    pub fn new(lfr: LfrSystem, b_u: Mat, d_zu_u: Mat, d_zp_u: Mat) -> Result<Self> {
        let du = b_u.ncols();
        if b_u.nrows() != lfr.states() || d_zu_u.shape() != (lfr.unc_outputs(), du) || d_zp_u.shape() != (lfr.perf_outputs(), du) {
            return dim_err("control channel dimensions");
        }
        Ok(OpenLoopSystem { lfr, b_u, d_zu_u, d_zp_u })
    }

    pub fn controls(&self) -> usize {
        self.b_u.ncols()
    }

    /// Output feedthrough of u for the stacked outputs (z_u, z_p).
    pub fn d_u_stacked(&self) -> Mat {
        vstack(&[&self.d_zu_u, &self.d_zp_u]).expect("checked plant")
    }

    /// u = K x.
    pub fn close(&self, k: &Mat) -> Result<LfrSystem> {
        if k.shape() != (self.controls(), self.lfr.states()) {
            return dim_err(format!("gain is {}x{}, expected {}x{}", k.nrows(), k.ncols(), self.controls(), self.lfr.states()));
        }
        let mut s = self.lfr.clone();
        s.a += &self.b_u * k;
        s.c_zu += &self.d_zu_u * k;
        s.c_zp += &self.d_zp_u * k;
        Ok(s)
    }

    /// Closes the uncertainty at Delta = delta I, keeping the control channel.
    pub fn at_delta(&self, delta: f64) -> Result<OpenLoopSystem> {
        let l = &self.lfr;
        let joint = LfrSystem::new(
            l.a.clone(),
            l.b_wu.clone(),
            hstack(&[&l.b_wp, &self.b_u])?,
            l.c_zu.clone(),
            l.c_zp.clone(),
            l.d_zu_wu.clone(),
            hstack(&[&l.d_zu_wp, &self.d_zu_u])?,
            l.d_zp_wu.clone(),
            hstack(&[&l.d_zp_wp, &self.d_zp_u])?,
        )?;
        let c = joint.close_scalar(delta)?;
        let dw = l.perf_inputs();
        let split = |m: &Mat| (m.columns(0, dw).into_owned(), m.columns(dw, m.ncols() - dw).into_owned());
        let (b, b_u) = split(c.b());
        let (d, d_u) = split(c.d());
        let lfr = LfrSystem::from_nominal(&StateSpace::new(c.a().clone(), b, c.c().clone(), d)?);
        OpenLoopSystem::new(lfr, b_u, zeros(0, self.controls()), d_u)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopFamily {
    pub systems: Vec<OpenLoopSystem>,
    pub structures: Vec<UncertaintyStructure>,
}

impl OpenLoopFamily {
    pub fn new(systems: Vec<OpenLoopSystem>, structures: Vec<UncertaintyStructure>) -> Result<Self> {
        if systems.is_empty() || systems.len() != structures.len() {
            return Err(Error::Invalid("open-loop family needs one structure per label".into()));
        }
        let (n, du) = (systems[0].lfr.states(), systems[0].controls());
        if systems.iter().any(|s| s.lfr.states() != n || s.controls() != du) {
            return dim_err("open-loop family state or control dimensions differ");
        }
        Ok(OpenLoopFamily { systems, structures })
    }

    pub fn get(&self, label: usize) -> Option<&OpenLoopSystem> {
        label.checked_sub(1).and_then(|i| self.systems.get(i))
    }

    pub fn num_labels(&self) -> usize {
        self.systems.len()
    }

    pub fn states(&self) -> usize {
        self.systems[0].lfr.states()
    }

    pub fn controls(&self) -> usize {
        self.systems[0].controls()
    }

    pub fn lfr_family(&self) -> LfrFamily {
        LfrFamily { systems: self.systems.iter().map(|s| s.lfr.clone()).collect(), structures: self.structures.clone() }
    }

    /// Same plant with the uncertainty channel removed.
    pub fn nominal(&self) -> OpenLoopFamily {
        let systems = self
            .systems
            .iter()
            .map(|s| {
                let lfr = LfrSystem::from_nominal(&s.lfr.nominal());
                let d_zu_u = zeros(0, s.controls());
                OpenLoopSystem { lfr, b_u: s.b_u.clone(), d_zu_u, d_zp_u: s.d_zp_u.clone() }
            })
            .collect();
        OpenLoopFamily { systems, structures: self.structures.clone() }
    }

    pub fn at_delta(&self, delta: f64) -> Result<OpenLoopFamily> {
        let systems = self.systems.iter().map(|s| s.at_delta(delta)).collect::<Result<Vec<_>>>()?;
        OpenLoopFamily::new(systems, self.structures.clone())
    }

    pub fn has_uncertainty(&self) -> bool {
        self.systems.iter().any(|s| s.lfr.unc_inputs() > 0 || s.lfr.unc_outputs() > 0)
    }
}

/// Closed loop keyed by (node, label) with node-dependent gains.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopFamily {
    pub map: BTreeMap<(NodeId, usize), LfrSystem>,
    pub structures: Vec<UncertaintyStructure>,
}

impl ClosedLoopFamily {
    pub fn nominal(&self) -> NodeLabelSystems {
        NodeLabelSystems { map: self.map.iter().map(|(&k, s)| (k, s.nominal())).collect() }
    }

    pub fn at_delta(&self, delta: f64) -> Result<NodeLabelSystems> {
        let map = self.map.iter().map(|(&k, s)| Ok((k, s.close_scalar(delta)?))).collect::<Result<_>>()?;
        Ok(NodeLabelSystems { map })
    }

    pub fn with_graph_check(self, g: &ConstrainingGraph) -> Result<Self> {
        for (i, l) in g.node_label_pairs() {
            if !self.map.contains_key(&(i, l)) {
                return Err(Error::Invalid(format!("closed loop lacks node {i} label {l}")));
            }
        }
        Ok(self)
    }
}

impl EdgeLfrs for ClosedLoopFamily {
    fn lfr_for(&self, edge: &Edge) -> Result<&LfrSystem> {
        self.map
            .get(&(edge.tail, edge.label))
            .ok_or_else(|| Error::Invalid(format!("no closed loop for node {} label {}", edge.tail, edge.label)))
    }
    fn structure_for(&self, edge: &Edge) -> UncertaintyStructure {
        self.structures.get(edge.label - 1).copied().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn closing_the_uncertainty() {
        // x+ = x + (1 + delta) u-like input: B_wu = 1, z_u = w_p
        let s = LfrSystem::new(
            m(1, 1, &[0.5]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[0.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[0.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
        )
        .unwrap();
        let c = s.close_scalar(0.3).unwrap();
        assert!((c.b()[(0, 0)] - 1.3).abs() < 1e-15);
        assert!((c.d()[(0, 0)] - 1.3).abs() < 1e-15);
        assert_eq!(s.close_scalar(0.0).unwrap(), s.nominal());
    }

    #[test]
    fn rational_dependence() {
        // D_zu_wu = 0.5 gives w_u = delta/(1 - 0.5 delta) z_u
        let s = LfrSystem::new(
            m(1, 1, &[0.0]),
            m(1, 1, &[1.0]),
            m(1, 0, &[]),
            m(1, 1, &[1.0]),
            m(0, 1, &[]),
            m(1, 1, &[0.5]),
            m(1, 0, &[]),
            m(0, 1, &[]),
            m(0, 0, &[]),
        )
        .unwrap();
        let c = s.close_scalar(0.4).unwrap();
        assert!((c.a()[(0, 0)] - 0.4 / 0.8).abs() < 1e-15);
    }
}
