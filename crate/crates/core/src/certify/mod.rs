//! Certificates, controller recovery, closed loops and residual checks.

mod analysis;

pub use analysis::{analyze_fixed_delta, analyze_nominal, analyze_robust, label_dims, perf_dims, solve_feasibility, solve_level, AnalysisOptions, AnalysisResult, Criterion, Search};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, from_rows, right_divide, to_rows, Mat};
use crate::lmi::lfr::{ClosedLoopFamily, OpenLoopFamily};
use crate::lmi::{BlockTag, LmiProblem, Sense};
use crate::model::graph::{ConstrainingGraph, NodeId};
use crate::whrt::Strategy;

/// Named decision matrices of a solved problem ("X[1]", "Xt", "G", "Z[2]",
/// "a[1]", "t", ...), the level they certify and the form tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub form: String,
    pub gamma: Option<f64>,
    pub matrices: BTreeMap<String, Mat>,
    /// How the problem was posed, enough to rebuild it for re-checking.
    pub setup: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    form: String,
    #[serde(default)]
    gamma: Option<f64>,
    matrices: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    setup: Option<serde_json::Value>,
}

impl Certificate {
    pub fn from_solution(prob: &LmiProblem, x: &[f64], gamma: Option<f64>) -> Self {
        let matrices = prob.vars.ids().map(|id| (prob.vars.get(id).name.clone(), prob.vars.unpack(id, x))).collect();
        Certificate { form: prob.form.clone(), gamma, matrices, setup: None }
    }

    /// Packs the matrices into the variable vector of `prob`.
    pub fn to_vector(&self, prob: &LmiProblem) -> Result<Vec<f64>> {
        let mut x = vec![0.0; prob.vars.len()];
        for id in prob.vars.ids() {
            let v = prob.vars.get(id);
            let m = self.matrices.get(&v.name).ok_or_else(|| Error::Invalid(format!("census mismatch: certificate lacks {}", v.name)))?;
            if m.shape() != (v.rows, v.cols) {
                return Err(Error::Invalid(format!("census mismatch: {} is {}x{}, expected {}x{}", v.name, m.nrows(), m.ncols(), v.rows, v.cols)));
            }
            prob.vars.pack(id, m, &mut x)?;
        }
        if let Some(extra) = self.matrices.keys().find(|k| prob.vars.find(k).is_none()) {
            return Err(Error::Invalid(format!("census mismatch: problem has no variable {extra}")));
        }
        Ok(x)
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.matrices.get(name)
    }

    /// Matrix for a node: "name[i]" or the shared "name".
    pub fn node_matrix(&self, name: &str, node: NodeId) -> Option<&Mat> {
        self.matrices.get(&format!("{name}[{node}]")).or_else(|| self.matrices.get(name))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let f = CertificateFile {
            form: self.form.clone(),
            gamma: self.gamma,
            matrices: self.matrices.iter().map(|(k, m)| (k.clone(), to_rows(m))).collect(),
            setup: self.setup.clone(),
        };
        serde_json::to_value(f).expect("certificate serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let f: CertificateFile = serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("certificate: {e}")))?;
        let matrices: BTreeMap<String, Mat> = f.matrices.iter().map(|(k, r)| Ok((k.clone(), from_rows(r, None)?))).collect::<Result<_>>()?;
        if matrices.values().any(|m: &Mat| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::Format("certificate has non-finite entries".into()));
        }
        Ok(Certificate { form: f.form, gamma: f.gamma, matrices, setup: f.setup })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Format(e.to_string()))?;
        Certificate::from_json(&v)
    }
}

/// State-feedback gains u = K_i x, per node or shared.
#[derive(Clone, Debug, PartialEq)]
pub enum Gains {
    Shared(Mat),
    PerNode(BTreeMap<NodeId, Mat>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    pub gains: Gains,
    pub strategy: Option<Strategy>,
}

#[derive(Serialize, Deserialize)]
struct ControllerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shared: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<BTreeMap<NodeId, Vec<Vec<f64>>>>,
}

impl Controller {
    pub fn shared(k: Mat) -> Self {
        Controller { gains: Gains::Shared(k), strategy: None }
    }

    pub fn gain(&self, node: NodeId) -> Result<&Mat> {
        match &self.gains {
            Gains::Shared(k) => Ok(k),
            Gains::PerNode(m) => m.get(&node).ok_or_else(|| Error::Invalid(format!("missing gain for node {node}"))),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (shared, nodes) = match &self.gains {
            Gains::Shared(k) => (Some(to_rows(k)), None),
            Gains::PerNode(m) => (None, Some(m.iter().map(|(&i, k)| (i, to_rows(k))).collect())),
        };
        serde_json::to_value(ControllerFile { strategy: self.strategy, shared, nodes }).expect("controller serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let f: ControllerFile = serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("controller: {e}")))?;
        let gains = match (f.shared, f.nodes) {
            (Some(k), None) => Gains::Shared(from_rows(&k, None)?),
            (None, Some(m)) => Gains::PerNode(m.iter().map(|(&i, k)| Ok((i, from_rows(k, None)?))).collect::<Result<_>>()?),
            _ => return Err(Error::Format("controller needs exactly one of 'shared' or 'nodes'".into())),
        };
        let c = Controller { gains, strategy: f.strategy };
        let finite = match &c.gains {
            Gains::Shared(k) => k.iter().all(|v| v.is_finite()),
            Gains::PerNode(m) => m.values().all(|k| k.iter().all(|v| v.is_finite())),
        };
        if !finite {
            return Err(Error::Format("controller has non-finite entries".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Format(e.to_string()))?;
        Controller::from_json(&v)
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |k: &Mat| -> String {
            let rows: Vec<String> = (0..k.nrows())
                .map(|i| (0..k.ncols()).map(|j| format!("{:.12}", k[(i, j)])).collect::<Vec<_>>().join(", "))
                .collect();
            format!("[{}]", rows.join("; "))
        };
        match &self.gains {
            Gains::Shared(k) => write!(f, "K = {}", row(k)),
            Gains::PerNode(m) => {
                let parts: Vec<String> = m.iter().map(|(i, k)| format!("K[{i}] = {}", row(k))).collect();
                write!(f, "{}", parts.join(", "))
            }
        }
    }
}

const RECOVERY_COND: f64 = 1e12;

/// K_i = Z_i G_i^{-1} for slack forms, K_i = Z_i Xt_i^{-1} otherwise,
/// computed by a linear solve.
pub fn recover_controller(cert: &Certificate, g: &ConstrainingGraph) -> Result<Controller> {
    let divisor = if cert.matrices.keys().any(|k| k == "G" || k.starts_with("G[")) { "G" } else { "Xt" };
    let shared = cert.matrices.contains_key("Z") && cert.matrices.contains_key(divisor);
    let mut gains = BTreeMap::new();
    for &i in g.nodes() {
        let z = cert.node_matrix("Z", i).ok_or_else(|| Error::Invalid(format!("certificate has no Z for node {i}")))?;
        let m = cert.node_matrix(divisor, i).ok_or_else(|| Error::Invalid(format!("certificate has no {divisor} for node {i}")))?;
        let cond = condition_number(m);
        log::debug!("node {i}: condition number of {divisor} is {cond:.3e}");
        if !(cond < RECOVERY_COND) {
            return Err(Error::IllConditioned { node: i, cond });
        }
        let k = right_divide(z, m).ok_or(Error::IllConditioned { node: i, cond })?;
        gains.insert(i, k);
        if shared {
            break;
        }
    }
    let gains = if shared { Gains::Shared(gains.into_values().next().expect("one gain")) } else { Gains::PerNode(gains) };
    Ok(Controller { gains, strategy: None })
}

/// Closed loop for every (tail node, label) pair of `g`.
pub fn close_loop(open: &OpenLoopFamily, ctrl: &Controller, g: &ConstrainingGraph) -> Result<ClosedLoopFamily> {
    let mut map = BTreeMap::new();
    for (i, l) in g.node_label_pairs() {
        let s = open.get(l).ok_or_else(|| Error::Invalid(format!("label {l} unassigned")))?;
        map.insert((i, l), s.close(ctrl.gain(i)?)?);
    }
    Ok(ClosedLoopFamily { map, structures: open.structures.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub block: String,
    pub tag: String,
    pub sense: Sense,
    /// Minimum eigenvalue of the block in its required sense (sign applied).
    pub eigenvalue: f64,
    /// `eigenvalue - eps_s` for strict blocks, `eigenvalue` otherwise.
    pub margin: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub pass: bool,
}

impl ResidualReport {
    pub fn failures(&self) -> impl Iterator<Item = &ResidualEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn worst_margin(&self) -> f64 {
        self.entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{:<4} {:<28} eig {:>12.4e}  margin {:>12.4e}", if e.pass { "PASS" } else { "FAIL" }, e.block, e.eigenvalue, e.margin)?;
        }
        write!(f, "{} ({} blocks)", if self.pass { "all blocks PASS" } else { "some blocks FAIL" }, self.entries.len())
    }
}

/// Re-evaluates every block of `prob` at the certificate.
pub fn check_residuals(cert: &Certificate, prob: &LmiProblem) -> Result<ResidualReport> {
    let x = cert.to_vector(prob)?;
    Ok(residuals_at(prob, &x))
}

pub fn residuals_at(prob: &LmiProblem, x: &[f64]) -> ResidualReport {
    let entries: Vec<ResidualEntry> = prob
        .blocks
        .iter()
        .map(|b| {
            let eig = b.signed_min_eig(x);
            let margin = if b.sense.is_strict() { eig - b.margin } else { eig };
            ResidualEntry {
                block: b.name.clone(),
                tag: match b.tag {
                    BlockTag::Global => "global".into(),
                    t => t.to_string(),
                },
                sense: b.sense,
                eigenvalue: eig,
                margin,
                threshold: b.threshold(),
                pass: b.passes(x),
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    ResidualReport { entries, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::lfr::{LfrSystem, OpenLoopSystem, UncertaintyStructure};
    use crate::lmi::LmiBlock;
    use crate::model::system::StateSpace;

    fn m1(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn raw_lyapunov_margin() {
        let mut p = LmiProblem::new("lyapunov");
        let id = p.vars.symmetric("X", 1);
        let x = p.vars.expr(id);
        let eps = 1e-7;
        p.push(LmiBlock::new("lyap", &x.scale(0.25) - &x, Sense::NegativeDefinite, BlockTag::Global, eps).unwrap());
        let cert = Certificate { form: "lyapunov".into(), gamma: None, matrices: BTreeMap::from([("X".into(), m1(1.0))]), setup: None };
        let r = check_residuals(&cert, &p).unwrap();
        assert!(r.pass);
        assert!((r.entries[0].margin - (0.75 - eps)).abs() < 1e-15);
        let bad = Certificate { matrices: BTreeMap::from([("Y".into(), m1(1.0))]), ..cert };
        assert!(check_residuals(&bad, &p).is_err());
    }

    #[test]
    fn recovery_examples() {
        let g = ConstrainingGraph::self_loops(1);
        let cert = |z: f64, gm: f64| Certificate {
            form: "slack".into(),
            gamma: None,
            matrices: BTreeMap::from([("Z".into(), m1(z)), ("G".into(), m1(gm)), ("Xt[1]".into(), m1(1.0))]),
            setup: None,
        };
        assert_eq!(recover_controller(&cert(0.0, 4.0), &g).unwrap().gains, Gains::Shared(m1(0.0)));
        assert_eq!(recover_controller(&cert(2.0, 4.0), &g).unwrap().gains, Gains::Shared(m1(0.5)));
        let near_singular = Certificate {
            form: "slack".into(),
            gamma: None,
            matrices: BTreeMap::from([("Z".into(), Mat::from_row_slice(1, 2, &[1.0, 1.0])), ("G".into(), Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]))]),
            setup: None,
        };
        let err = recover_controller(&near_singular, &g).unwrap_err();
        assert!(err.to_string().contains("ill-conditioned at node 1"));
    }

    #[test]
    fn scalar_closed_loop() {
        let g = ConstrainingGraph::self_loops(1);
        let lfr = LfrSystem::from_nominal(&StateSpace::scalar(2.0, 1.0, 1.0, 0.0));
        let open = OpenLoopFamily::new(vec![OpenLoopSystem::new(lfr, m1(1.0), Mat::zeros(0, 1), m1(0.0)).unwrap()], vec![UncertaintyStructure::RepeatedScalar]).unwrap();
        let cl = close_loop(&open, &Controller::shared(m1(-1.5)), &g).unwrap();
        assert_eq!(cl.map[&(1, 1)].a[(0, 0)], 0.5);
        let zero = close_loop(&open, &Controller::shared(m1(0.0)), &g).unwrap();
        assert_eq!(zero.map[&(1, 1)].nominal(), open.systems[0].lfr.nominal());
    }

    #[test]
    fn controller_json() {
        let c = Controller { gains: Gains::PerNode(BTreeMap::from([(1, m1(0.5)), (2, m1(-1.0))])), strategy: Some(Strategy::Hold) };
        assert_eq!(Controller::from_json(&c.to_json()).unwrap(), c);
        assert!(Controller::from_json(&serde_json::json!({})).is_err());
    }
}
