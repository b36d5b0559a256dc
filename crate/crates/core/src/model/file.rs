//! JSON model files.
//!
//! Top-level keys: `graph` {nodes, edges as [tail, head, label], num_labels},
//! `systems` {label: {A, B, C, D}}, optional `index` {label: {Q, S, R}},
//! optional `control` {label: {Bu, Du, Dzuu}} for synthesis, and optional
//! `uncertainty` {structure, labels: {label: {Bwu, Czu, Dzuwu, Dzuw, Dzwu}}}.
//! Matrices are row-major nested arrays.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, zeros, Mat};
use crate::lmi::lfr::{LfrFamily, LfrSystem, OpenLoopFamily, OpenLoopSystem, UncertaintyStructure};
use crate::model::graph::{validate_graph, ConstrainingGraph, Edge, NodeId};
use crate::model::system::{validate_pairing, IndexBlock, PerformanceIndex, StateSpace, SystemFamily};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId, usize)>,
    num_labels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct SystemFile {
    A: Rows,
    B: Rows,
    C: Rows,
    D: Rows,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct IndexFile {
    Q: Rows,
    S: Rows,
    R: Rows,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ControlFile {
    Bu: Rows,
    Du: Rows,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    Dzuu: Rows,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ChannelFile {
    Bwu: Rows,
    #[serde(default)]
    Czu: Rows,
    #[serde(default)]
    Dzuwu: Rows,
    #[serde(default)]
    Dzuw: Rows,
    #[serde(default)]
    Dzwu: Rows,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct UncertaintyFile {
    #[serde(default)]
    structure: UncertaintyStructure,
    labels: BTreeMap<String, ChannelFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelFile {
    graph: GraphFile,
    systems: BTreeMap<String, SystemFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<BTreeMap<String, IndexFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control: Option<BTreeMap<String, ControlFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uncertainty: Option<UncertaintyFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    whrt: Option<serde_json::Value>,
}

/// A graph with an open-loop family (control and uncertainty channels may be
/// empty) and an optional performance index.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub graph: ConstrainingGraph,
    pub plant: OpenLoopFamily,
    pub index: Option<PerformanceIndex>,
    /// Free-form provenance (e.g. the WHRT constraint the model came from).
    pub whrt: Option<serde_json::Value>,
}

/// Width-checked matrix; an empty row list means `rows x cols` zeros.
fn mat(r: &Rows, rows: usize, cols: usize, what: &str) -> Result<Mat> {
    if r.is_empty() {
        return Ok(zeros(rows, cols));
    }
    let m = from_rows(r, None)?;
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

fn free(r: &Rows) -> Result<Mat> {
    from_rows(r, None)
}

fn label_key(map_keys: impl Iterator<Item = String>, m: usize, what: &str) -> Result<()> {
    for k in map_keys {
        match k.parse::<usize>() {
            Ok(l) if (1..=m).contains(&l) => {}
            _ => return Err(Error::Format(format!("{what}: key '{k}' is not a label in 1..{m}"))),
        }
    }
    Ok(())
}

impl Model {
    pub fn nominal(graph: ConstrainingGraph, systems: &SystemFamily, index: Option<PerformanceIndex>) -> Result<Self> {
        let lfrs = LfrFamily::from_nominal(systems);
        let plant = OpenLoopFamily::new(
            lfrs.systems
                .into_iter()
                .map(|l| {
                    let n = l.states();
                    let p = l.perf_outputs();
                    OpenLoopSystem::new(l, zeros(n, 0), zeros(0, 0), zeros(p, 0))
                })
                .collect::<Result<Vec<_>>>()?,
            lfrs.structures,
        )?;
        Ok(Model { graph, plant, index, whrt: None })
    }

    /// Performance channel with the uncertainty at zero and no control.
    pub fn systems(&self) -> SystemFamily {
        self.plant.lfr_family().nominal()
    }

    pub fn lfr_family(&self) -> LfrFamily {
        self.plant.lfr_family()
    }

    pub fn has_control(&self) -> bool {
        self.plant.controls() > 0
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let f: ModelFile = serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
        let graph = ConstrainingGraph::new(f.graph.nodes.iter().copied(), f.graph.edges.iter().map(|&(t, h, l)| Edge::new(t, h, l)).collect(), f.graph.num_labels);
        let violations = validate_graph(&graph);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Invalid(format!("graph: {}", msgs.join("; "))));
        }
        let m = graph.num_labels();
        label_key(f.systems.keys().cloned(), m, "systems")?;
        let mut nominal = Vec::new();
        for l in 1..=m {
            let s = f.systems.get(&l.to_string()).ok_or_else(|| Error::Invalid(format!("label {l} unassigned")))?;
            let a = free(&s.A)?;
            let n = a.nrows();
            let b = free(&s.B)?;
            let c = free(&s.C)?;
            let d = mat(&s.D, c.nrows(), b.ncols(), "D")?;
            let b = if b.nrows() == 0 { zeros(n, 0) } else { b };
            let c = if c.ncols() == 0 && c.nrows() == 0 { zeros(0, n) } else { c };
            nominal.push(StateSpace::new(a, b, c, d)?);
        }
        let family = SystemFamily::new(nominal)?;
        let index = match &f.index {
            None => None,
            Some(ix) => {
                label_key(ix.keys().cloned(), m, "index")?;
                let blocks = (1..=m)
                    .map(|l| {
                        let b = ix.get(&l.to_string()).ok_or_else(|| Error::Invalid(format!("index block for label {l} missing")))?;
                        let q = free(&b.Q)?;
                        let r = free(&b.R)?;
                        let s = mat(&b.S, q.nrows(), r.nrows(), "S")?;
                        IndexBlock::new(q, s, r)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(PerformanceIndex::new(blocks))
            }
        };
        let violations = validate_pairing(&graph, &family, index.as_ref());
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Invalid(msgs.join("; ")));
        }

        let n = family.state_dim();
        let structure = f.uncertainty.as_ref().map(|u| u.structure).unwrap_or_default();
        let mut systems = Vec::new();
        for (k, s) in family.systems().iter().enumerate() {
            let l = (k + 1).to_string();
            let ch = f.uncertainty.as_ref().and_then(|u| u.labels.get(&l)).cloned().unwrap_or_default();
            let b_wu = mat(&ch.Bwu, n, if ch.Bwu.is_empty() { 0 } else { ch.Bwu[0].len() }, "Bwu")?;
            let nw = b_wu.ncols();
            let nz = [&ch.Czu, &ch.Dzuwu, &ch.Dzuw].iter().find(|r| !r.is_empty()).map_or(nw, |r| r.len());
            let nz = if nw == 0 && ch.Czu.is_empty() { 0 } else { nz };
            let lfr = LfrSystem::new(
                s.a().clone(),
                b_wu,
                s.b().clone(),
                mat(&ch.Czu, nz, n, "Czu")?,
                s.c().clone(),
                mat(&ch.Dzuwu, nz, nw, "Dzuwu")?,
                mat(&ch.Dzuw, nz, s.inputs(), "Dzuw")?,
                mat(&ch.Dzwu, s.outputs(), nw, "Dzwu")?,
                s.d().clone(),
            )?;
            let (b_u, d_zu_u, d_zp_u) = match f.control.as_ref().map(|c| c.get(&l)) {
                None => (zeros(n, 0), zeros(nz, 0), zeros(s.outputs(), 0)),
                Some(None) => return Err(Error::Invalid(format!("control channel for label {l} missing"))),
                Some(Some(c)) => {
                    let bu = free(&c.Bu)?;
                    let du = bu.ncols();
                    (mat(&c.Bu, n, du, "Bu")?, mat(&c.Dzuu, nz, du, "Dzuu")?, mat(&c.Du, s.outputs(), du, "Du")?)
                }
            };
            systems.push(OpenLoopSystem::new(lfr, b_u, d_zu_u, d_zp_u)?);
        }
        let plant = OpenLoopFamily::new(systems, vec![structure; m])?;
        Ok(Model { graph, plant, index, whrt: f.whrt })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let g = &self.graph;
        let graph = GraphFile { nodes: g.nodes().to_vec(), edges: g.edges().iter().map(|e| (e.tail, e.head, e.label)).collect(), num_labels: g.num_labels() };
        let mut systems = BTreeMap::new();
        let mut control = BTreeMap::new();
        let mut channels = BTreeMap::new();
        for (k, s) in self.plant.systems.iter().enumerate() {
            let l = (k + 1).to_string();
            let nom = s.lfr.nominal();
            systems.insert(l.clone(), SystemFile { A: to_rows(nom.a()), B: to_rows(nom.b()), C: to_rows(nom.c()), D: to_rows(nom.d()) });
            control.insert(l.clone(), ControlFile { Bu: to_rows(&s.b_u), Du: to_rows(&s.d_zp_u), Dzuu: to_rows(&s.d_zu_u) });
            channels.insert(
                l,
                ChannelFile {
                    Bwu: to_rows(&s.lfr.b_wu),
                    Czu: to_rows(&s.lfr.c_zu),
                    Dzuwu: to_rows(&s.lfr.d_zu_wu),
                    Dzuw: to_rows(&s.lfr.d_zu_wp),
                    Dzwu: to_rows(&s.lfr.d_zp_wu),
                },
            );
        }
        let index = self.index.as_ref().map(|p| {
            p.blocks()
                .iter()
                .enumerate()
                .map(|(k, b)| ((k + 1).to_string(), IndexFile { Q: to_rows(b.q()), S: to_rows(b.s()), R: to_rows(b.r()) }))
                .collect()
        });
        let file = ModelFile {
            graph,
            systems,
            index,
            control: self.has_control().then_some(control),
            uncertainty: self.plant.has_uncertainty().then(|| UncertaintyFile { structure: self.plant.structures[0], labels: channels }),
            whrt: self.whrt.clone(),
        };
        serde_json::to_value(file).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Model::from_json(&v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::system::l2_index;
    use serde_json::json;

    #[test]
    fn nominal_round_trip() {
        let g = ConstrainingGraph::from_triples(&[(1, 1, 1), (1, 2, 2), (2, 1, 1)], 2).unwrap();
        let f = SystemFamily::new(vec![
            StateSpace::scalar(0.5, 1.0, 1.0, 0.0),
            StateSpace::new(Mat::from_element(1, 1, 0.25), Mat::from_row_slice(1, 2, &[1.0, 0.1]), Mat::from_element(1, 1, 1.0), zeros(1, 2)).unwrap(),
        ])
        .unwrap();
        let m = Model::nominal(g, &f, Some(l2_index(1.0 / 3.0, &f).unwrap())).unwrap();
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.systems(), f);
    }

    #[test]
    fn rejects_missing_label_and_bad_graph() {
        let v = json!({
            "graph": {"nodes": [1, 2], "edges": [[1, 1, 1], [1, 2, 2], [2, 1, 1]], "num_labels": 2},
            "systems": {"1": {"A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]}}
        });
        let e = Model::from_json(&v).unwrap_err().to_string();
        assert!(e.contains("label 2 unassigned"), "{e}");
        let v = json!({
            "graph": {"nodes": [1, 2], "edges": [[1, 2, 1]], "num_labels": 1},
            "systems": {"1": {"A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]}}
        });
        assert!(Model::from_json(&v).is_err());
    }
}
