//! Per-edge LMI conditions for stability, dissipativity (primal and dual
//! forms), energy-to-peak gain, robust variants and state-feedback
//! synthesis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eye, hstack, vstack, zeros, Mat};
use crate::lmi::block::{strictness_margin, BlockTag, LmiBlock, LmiProblem, Sense};
use crate::lmi::expr::AffineExpr;
use crate::lmi::index::{check_dual_side, decompose_r_block, invert_index, IndexExpr};
use crate::lmi::lfr::{EdgeLfrs, OpenLoopFamily};
use crate::lmi::multiplier::MultiplierClass;
use crate::model::graph::{ConstrainingGraph, Edge, NodeId};
use crate::model::system::{EdgeSystems, PerformanceIndex, StateSpace};

/// Which equivalent condition to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    /// Quadratic form in X_i.
    Primal,
    /// Four-block Schur form in X~_i.
    Schur,
    /// Slack form in (X~_i, G_i).
    Slack,
    /// Dual quadratic form in X~_i with the inverse index.
    Dual,
    DualSchur,
    DualSlack,
}

impl Form {
    pub const ALL: [Form; 6] = [Form::Primal, Form::Schur, Form::Slack, Form::Dual, Form::DualSchur, Form::DualSlack];

    pub fn is_dual(self) -> bool {
        matches!(self, Form::Dual | Form::DualSchur | Form::DualSlack)
    }

    pub fn has_slack(self) -> bool {
        matches!(self, Form::Slack | Form::DualSlack)
    }

    pub fn name(self) -> &'static str {
        match self {
            Form::Primal => "primal",
            Form::Schur => "schur",
            Form::Slack => "slack",
            Form::Dual => "dual",
            Form::DualSchur => "dual-schur",
            Form::DualSlack => "dual-slack",
        }
    }

    pub fn parse(s: &str) -> Result<Form> {
        Form::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown form '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyForm {
    Basic,
    Slack,
}

/// Which certificate matrices are shared across nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sharing {
    pub x: bool,
    pub g: bool,
    pub z: bool,
}

impl Sharing {
    pub const NONE: Sharing = Sharing { x: false, g: false, z: false };

    /// Non-switching gain: shared G and Z for slack forms, shared X~ and Z
    /// for Schur forms.
    pub fn shared_gain(form: Form) -> Sharing {
        if form.has_slack() {
            Sharing { x: false, g: true, z: true }
        } else {
            Sharing { x: true, g: false, z: true }
        }
    }

    pub fn shared_g() -> Sharing {
        Sharing { x: false, g: true, z: false }
    }
}

/// Performance specification for primal forms.
#[derive(Clone, Copy, Debug)]
pub enum Performance<'a> {
    /// A fixed index.
    Index(&'a PerformanceIndex),
    /// l2 index with t = gamma^2 as a decision variable, minimized.
    L2Level,
}

/// Per-edge data: system, optional control channel (B_u, D_u).
struct EdgeCase {
    edge: Edge,
    sys: StateSpace,
    control: Option<(Mat, Mat)>,
}

struct NodeVars {
    x: BTreeMap<NodeId, AffineExpr>,
    g: BTreeMap<NodeId, AffineExpr>,
    z: BTreeMap<NodeId, AffineExpr>,
}

fn per_node(prob: &mut LmiProblem, nodes: &[NodeId], shared: bool, make: impl Fn(&mut LmiProblem, &str) -> crate::lmi::expr::VarId, base: &str) -> BTreeMap<NodeId, AffineExpr> {
    if shared {
        let id = make(prob, base);
        let e = prob.vars.expr(id);
        nodes.iter().map(|&i| (i, e.clone())).collect()
    } else {
        nodes
            .iter()
            .map(|&i| {
                let id = make(prob, &format!("{base}[{i}]"));
                (i, prob.vars.expr(id))
            })
            .collect()
    }
}

fn node_vars(prob: &mut LmiProblem, g: &ConstrainingGraph, n: usize, form: Form, controls: Option<usize>, sharing: Sharing) -> NodeVars {
    let xname = if form == Form::Primal { "X" } else { "Xt" };
    let x = per_node(prob, g.nodes(), sharing.x, |p, nm| p.vars.symmetric(nm, n), xname);
    let gv = if form.has_slack() {
        per_node(prob, g.nodes(), sharing.g, |p, nm| p.vars.general(nm, n, n), "G")
    } else {
        BTreeMap::new()
    };
    let z = match controls {
        Some(du) => per_node(prob, g.nodes(), sharing.z, |p, nm| p.vars.general(nm, du, n), "Z"),
        None => BTreeMap::new(),
    };
    NodeVars { x, g: gv, z }
}

fn edge_name(prefix: &str, e: &Edge) -> String {
    format!("{prefix}{e}")
}

/// Shape bookkeeping shared by the index and the system at one edge.
fn check_index_dims(e: &Edge, sys: &StateSpace, ix: &IndexExpr) -> Result<()> {
    if ix.inputs() != sys.inputs() || ix.outputs() != sys.outputs() {
        return Err(Error::Dimension(format!(
            "index at label {} is for {} inputs/{} outputs, system has {}/{}",
            e.label,
            ix.inputs(),
            ix.outputs(),
            sys.inputs(),
            sys.outputs()
        )));
    }
    Ok(())
}

fn full_index(ix: &IndexExpr) -> AffineExpr {
    AffineExpr::sym_blocks(&[ix.inputs(), ix.outputs()], &[(0, 0, &ix.q), (0, 1, &ix.s), (1, 1, &ix.r)])
}

/// (.)' diag(-X_i, X_j) [I 0; A B] + (.)' P [0 I; C D], required < 0.
fn primal_condition(xi: &AffineExpr, xj: &AffineExpr, sys: &StateSpace, ix: &IndexExpr) -> Result<AffineExpr> {
    let (n, di) = (sys.states(), sys.inputs());
    let m1 = hstack(&[&eye(n), &zeros(n, di)])?;
    let m2 = hstack(&[sys.a(), sys.b()])?;
    let n12 = vstack(&[&hstack(&[&zeros(di, n), &eye(di)])?, &hstack(&[sys.c(), sys.d()])?])?;
    Ok(&(&xj.congruence(&m2) - &xi.congruence(&m1)) + &full_index(ix).congruence(&n12))
}

/// (.)' diag(X~_j, -X~_i) [I 0; A' C'] + (.)' [R~ -S~'; -S~ Q~] [0 I; B' D'],
/// required > 0.
fn dual_condition(xi: &AffineExpr, xj: &AffineExpr, sys: &StateSpace, ixt: &IndexExpr) -> Result<AffineExpr> {
    let (n, di, d_o) = (sys.states(), sys.inputs(), sys.outputs());
    let m1 = hstack(&[&eye(n), &zeros(n, d_o)])?;
    let m2 = hstack(&[&sys.a().transpose(), &sys.c().transpose()])?;
    let n12 = vstack(&[&hstack(&[&zeros(d_o, n), &eye(d_o)])?, &hstack(&[&sys.b().transpose(), &sys.d().transpose()])?])?;
    let neg_st = -&ixt.s.t();
    let pd = AffineExpr::sym_blocks(&[d_o, di], &[(0, 0, &ixt.r), (0, 1, &neg_st), (1, 1, &ixt.q)]);
    Ok(&(&xj.congruence(&m1) - &xi.congruence(&m2)) + &pd.congruence(&n12))
}

/// Four-block condition of the Schur/slack primal forms (and their
/// synthesis versions), required > 0. `ay` = A Y (+ B_u Z), `cy` = C Y
/// (+ D_u Z), `d22` = X~_i or G_i + G_i' - X~_i.
#[allow(clippy::too_many_arguments)]
fn schur_condition(xj: &AffineExpr, ay: &AffineExpr, cy: &AffineExpr, d22: &AffineExpr, sys: &StateSpace, ix: &IndexExpr, u: &Mat, rt: &Mat) -> Result<AffineExpr> {
    let (n, di, r) = (sys.states(), sys.inputs(), u.nrows());
    let b = AffineExpr::constant(sys.b().clone());
    let cyt = cy.t();
    let b12 = -&cyt.mul(&ix.s.t())?;
    let b13 = cyt.rmul(&u.transpose());
    let sd = ix.s.rmul(sys.d());
    let b22 = &(&(-&ix.q) - &sd) - &sd.t();
    let b23 = AffineExpr::constant(sys.d().transpose() * u.transpose());
    let b33 = AffineExpr::constant(rt.clone());
    Ok(AffineExpr::sym_blocks(
        &[n, n, di, r],
        &[(0, 0, xj), (0, 1, ay), (0, 2, &b), (1, 1, d22), (1, 2, &b12), (1, 3, &b13), (2, 2, &b22), (2, 3, &b23), (3, 3, &b33)],
    ))
}

/// Three-block condition of the dual Schur/slack forms, required > 0.
fn dual_schur_condition(y11: &AffineExpr, ay: &AffineExpr, cy: &AffineExpr, xj: &AffineExpr, sys: &StateSpace, ixt: &IndexExpr) -> Result<AffineExpr> {
    let (n, d_o) = (sys.states(), sys.outputs());
    let (b, d) = (sys.b(), sys.d());
    let ayt = ay.t();
    let cyt = cy.t();
    let bqb = ixt.q.lmul(b).rmul(&b.transpose());
    let b11 = xj + &bqb;
    let b12 = &(-&ixt.s.lmul(b)) + &ixt.q.lmul(b).rmul(&d.transpose());
    let ds = ixt.s.lmul(d);
    let b22 = &(&(&ixt.r - &ds) - &ds.t()) + &ixt.q.lmul(d).rmul(&d.transpose());
    Ok(AffineExpr::sym_blocks(&[n, n, d_o], &[(0, 0, y11), (0, 1, &ayt), (0, 2, &cyt), (1, 1, &b11), (1, 2, &b12), (2, 2, &b22)]))
}

fn data_norm(cases: &[EdgeCase], index: &BTreeMap<usize, IndexExpr>) -> f64 {
    let s = cases
        .iter()
        .map(|c| {
            let ctl = c.control.as_ref().map(|(bu, du)| bu.norm().max(du.norm())).unwrap_or(0.0);
            c.sys.data_norm().max(ctl)
        })
        .fold(0.0, f64::max);
    index.values().map(|ix| ix.data_norm()).fold(s, f64::max)
}

/// Emits one performance condition per edge in the requested form. `index`
/// maps labels to (Q, S, R) for primal forms and to (Q~, S~, R~) for dual
/// ones.
fn emit_performance(prob: &mut LmiProblem, g: &ConstrainingGraph, cases: &[EdgeCase], index: &BTreeMap<usize, IndexExpr>, form: Form, sharing: Sharing, margin: f64) -> Result<()> {
    let n = cases.first().map(|c| c.sys.states()).ok_or_else(|| Error::Invalid("graph has no edges".into()))?;
    let controls = cases.first().and_then(|c| c.control.as_ref().map(|(bu, _)| bu.ncols()));
    if controls.is_some() && matches!(form, Form::Primal | Form::Dual) {
        return Err(Error::Invalid(format!("form {} has no synthesis version", form.name())));
    }
    let vars = node_vars(prob, g, n, form, controls, sharing);

    if matches!(form, Form::Primal | Form::Dual) {
        for &i in g.nodes() {
            if sharing.x && i != g.nodes()[0] {
                continue;
            }
            let name = if sharing.x { "X > 0".to_string() } else { format!("X[{i}] > 0") };
            prob.push(LmiBlock::new(name, vars.x[&i].clone(), Sense::PositiveDefinite, BlockTag::Node(i), margin)?);
        }
    }

    let mut decomp: BTreeMap<usize, (Mat, Mat)> = BTreeMap::new();
    for c in cases {
        let e = c.edge;
        let ix = index.get(&e.label).ok_or_else(|| Error::Invalid(format!("no index for label {}", e.label)))?;
        check_index_dims(&e, &c.sys, ix)?;
        let (xi, xj) = (&vars.x[&e.tail], &vars.x[&e.head]);
        let (y, d11) = if form.has_slack() {
            let gi = &vars.g[&e.tail];
            (gi.clone(), &(gi + &gi.t()) - xi)
        } else {
            (xi.clone(), xi.clone())
        };
        let (ay, cy) = {
            let mut ay = y.lmul(c.sys.a());
            let mut cy = y.lmul(c.sys.c());
            if let Some((bu, du)) = &c.control {
                let zi = &vars.z[&e.tail];
                ay = &ay + &zi.lmul(bu);
                cy = &cy + &zi.lmul(du);
            }
            (ay, cy)
        };
        let (expr, sense) = match form {
            Form::Primal => (primal_condition(xi, xj, &c.sys, ix)?, Sense::NegativeDefinite),
            Form::Dual => (dual_condition(xi, xj, &c.sys, ix)?, Sense::PositiveDefinite),
            Form::Schur | Form::Slack => {
                if !decomp.contains_key(&e.label) {
                    let r = ix.constant_r().ok_or_else(|| Error::Invalid("Schur and slack forms need a constant R".into()))?;
                    decomp.insert(e.label, decompose_r_block(r, e.label)?);
                }
                let (u, rt) = &decomp[&e.label];
                (schur_condition(xj, &ay, &cy, &d11, &c.sys, ix, u, rt)?, Sense::PositiveDefinite)
            }
            Form::DualSchur | Form::DualSlack => (dual_schur_condition(&d11, &ay, &cy, xj, &c.sys, ix)?, Sense::PositiveDefinite),
        };
        prob.push(LmiBlock::new(edge_name(form.name(), &e), expr, sense, BlockTag::Edge(e), margin)?);
    }

    if form.is_dual() {
        for (&l, ix) in index {
            if ix.inputs() == 0 {
                continue;
            }
            if ix.q.is_constant() {
                check_dual_side(ix.q.constant_part(), l)?;
            } else {
                prob.push(LmiBlock::new(format!("Qt[{l}] <= 0"), ix.q.clone(), Sense::NegativeSemidefinite, BlockTag::Label(l), margin)?);
            }
        }
    }
    Ok(())
}

fn nominal_cases(g: &ConstrainingGraph, f: &impl EdgeSystems) -> Result<Vec<EdgeCase>> {
    g.edges().iter().map(|e| Ok(EdgeCase { edge: *e, sys: f.system_for(e)?.clone(), control: None })).collect()
}

/// Label -> (inputs, outputs) as seen on the edges.
fn label_dims(cases: &[EdgeCase]) -> Result<BTreeMap<usize, (usize, usize)>> {
    let mut dims = BTreeMap::new();
    for c in cases {
        let d = (c.sys.inputs(), c.sys.outputs());
        if let Some(prev) = dims.insert(c.edge.label, d) {
            if prev != d {
                return Err(Error::Dimension(format!("label {} has inconsistent I/O dimensions", c.edge.label)));
            }
        }
    }
    Ok(dims)
}

fn constant_index(p: &PerformanceIndex, labels: impl Iterator<Item = usize>) -> Result<BTreeMap<usize, IndexExpr>> {
    labels
        .map(|l| {
            p.get(l)
                .map(|b| (l, IndexExpr::constant(b)))
                .ok_or_else(|| Error::Invalid(format!("index block for label {l} missing")))
        })
        .collect()
}

fn inverse_index(p: &PerformanceIndex, labels: impl Iterator<Item = usize>) -> Result<BTreeMap<usize, IndexExpr>> {
    let inv = invert_index(p)?;
    labels
        .map(|l| {
            inv.blocks
                .get(l - 1)
                .map(|b| (l, IndexExpr::constant(b)))
                .ok_or_else(|| Error::Invalid(format!("index block for label {l} missing")))
        })
        .collect()
}

/// Index map for a primal performance spec; creates `t` for [`Performance::L2Level`].
fn primal_index(prob: &mut LmiProblem, perf: Performance, dims: &BTreeMap<usize, (usize, usize)>) -> Result<BTreeMap<usize, IndexExpr>> {
    match perf {
        Performance::Index(p) => constant_index(p, dims.keys().copied()),
        Performance::L2Level => {
            let id = prob.vars.scalar("t");
            let t = prob.vars.expr(id);
            prob.minimize(id);
            Ok(dims.iter().map(|(&l, &(di, d_o))| (l, IndexExpr::l2_level(&t, di, d_o))).collect())
        }
    }
}

/// Lemma-1 stability in Schur form [[X_i, A'X_j], [X_j A, X_j]] > 0.
pub fn assemble_stability(g: &ConstrainingGraph, f: &impl EdgeSystems) -> Result<LmiProblem> {
    let cases = nominal_cases(g, f)?;
    let mut prob = LmiProblem::new("stability");
    let n = cases.first().map(|c| c.sys.states()).ok_or_else(|| Error::Invalid("graph has no edges".into()))?;
    let margin = strictness_margin(cases.iter().map(|c| c.sys.a().norm()).fold(0.0, f64::max));
    let x = per_node(&mut prob, g.nodes(), false, |p, nm| p.vars.symmetric(nm, n), "X");
    for c in &cases {
        let e = c.edge;
        let xja = x[&e.head].rmul(c.sys.a());
        let expr = AffineExpr::sym_blocks(&[n, n], &[(0, 0, &x[&e.tail]), (0, 1, &xja.t()), (1, 1, &x[&e.head])]);
        prob.push(LmiBlock::new(edge_name("lyap", &e), expr, Sense::PositiveDefinite, BlockTag::Edge(e), margin)?);
    }
    Ok(prob)
}

/// Dissipativity in one of the primal forms (Primal, Schur, Slack).
pub fn assemble_dissipativity(g: &ConstrainingGraph, f: &impl EdgeSystems, perf: Performance, form: Form, sharing: Sharing) -> Result<LmiProblem> {
    if form.is_dual() {
        return Err(Error::Invalid("use assemble_dual for dual forms".into()));
    }
    let cases = nominal_cases(g, f)?;
    let mut prob = LmiProblem::new(form.name());
    let dims = label_dims(&cases)?;
    let index = primal_index(&mut prob, perf, &dims)?;
    let margin = strictness_margin(data_norm(&cases, &index));
    emit_performance(&mut prob, g, &cases, &index, form, sharing, margin)?;
    Ok(prob)
}

/// Dissipativity in one of the dual forms, using the inverse of `p`.
pub fn assemble_dual(g: &ConstrainingGraph, f: &impl EdgeSystems, p: &PerformanceIndex, form: Form, sharing: Sharing) -> Result<LmiProblem> {
    if !form.is_dual() {
        return Err(Error::Invalid("use assemble_dissipativity for primal forms".into()));
    }
    let cases = nominal_cases(g, f)?;
    let mut prob = LmiProblem::new(form.name());
    let index = inverse_index(p, label_dims(&cases)?.keys().copied())?;
    let margin = strictness_margin(data_norm(&cases, &index));
    emit_performance(&mut prob, g, &cases, &index, form, sharing, margin)?;
    Ok(prob)
}

/// Any of the six forms with a fixed index; dispatches on `form`.
pub fn assemble_performance(g: &ConstrainingGraph, f: &impl EdgeSystems, p: &PerformanceIndex, form: Form, sharing: Sharing) -> Result<LmiProblem> {
    if form.is_dual() {
        assemble_dual(g, f, p, form, sharing)
    } else {
        assemble_dissipativity(g, f, Performance::Index(p), form, sharing)
    }
}

/// Energy-to-peak bound gamma. With `gamma = None` the level is a variable
/// and is minimized (it enters linearly).
pub fn assemble_energy_to_peak(g: &ConstrainingGraph, f: &impl EdgeSystems, gamma: Option<f64>, form: EnergyForm) -> Result<LmiProblem> {
    let cases = nominal_cases(g, f)?;
    if let Some(c) = cases.iter().find(|c| c.sys.d().iter().any(|&v| v != 0.0)) {
        return Err(Error::Invalid(format!("energy-to-peak needs D = 0, label {} has nonzero feedthrough", c.edge.label)));
    }
    if let Some(gm) = gamma {
        if !(gm > 0.0) {
            return Err(Error::Invalid(format!("gamma must be positive, got {gm}")));
        }
    }
    let n = cases.first().map(|c| c.sys.states()).ok_or_else(|| Error::Invalid("graph has no edges".into()))?;
    let mut prob = LmiProblem::new(match form {
        EnergyForm::Basic => "energy-to-peak",
        EnergyForm::Slack => "energy-to-peak-slack",
    });
    let margin = strictness_margin(cases.iter().map(|c| c.sys.data_norm()).fold(0.0, f64::max));
    let level = match gamma {
        Some(gm) => AffineExpr::constant(Mat::from_element(1, 1, gm)),
        None => {
            let id = prob.vars.scalar("gamma");
            prob.minimize(id);
            prob.vars.expr(id)
        }
    };
    let x = per_node(&mut prob, g.nodes(), false, |p, nm| p.vars.symmetric(nm, n), "Xt");
    let gv = match form {
        EnergyForm::Slack => per_node(&mut prob, g.nodes(), false, |p, nm| p.vars.general(nm, n, n), "G"),
        EnergyForm::Basic => BTreeMap::new(),
    };
    for c in &cases {
        let e = c.edge;
        let (di, d_o) = (c.sys.inputs(), c.sys.outputs());
        let xi = &x[&e.tail];
        let (y, d22) = match form {
            EnergyForm::Basic => (xi.clone(), xi.clone()),
            EnergyForm::Slack => {
                let gi = &gv[&e.tail];
                (gi.clone(), &(gi + &gi.t()) - xi)
            }
        };
        let ay = y.lmul(c.sys.a());
        let b = AffineExpr::constant(c.sys.b().clone());
        let gi_in = level.scalar_times(&eye(di));
        let first = AffineExpr::sym_blocks(&[n, n, di], &[(0, 0, &x[&e.head]), (0, 1, &ay), (0, 2, &b), (1, 1, &d22), (2, 2, &gi_in)]);
        prob.push(LmiBlock::new(edge_name("reach", &e), first, Sense::PositiveDefinite, BlockTag::Edge(e), margin)?);
        let cy = y.lmul(c.sys.c());
        let gi_out = level.scalar_times(&eye(d_o));
        let second = AffineExpr::sym_blocks(&[n, d_o], &[(0, 0, &d22), (0, 1, &cy.t()), (1, 1, &gi_out)]);
        prob.push(LmiBlock::new(edge_name("peak", &e), second, Sense::PositiveDefinite, BlockTag::Edge(e), margin)?);
    }
    Ok(prob)
}

/// Multiplier instances per label, created once and shared by all edges with
/// that label.
fn multipliers(prob: &mut LmiProblem, g: &ConstrainingGraph, lfr: &impl EdgeLfrs, mult: &MultiplierClass, inverse: bool, margin: f64) -> Result<BTreeMap<usize, IndexExpr>> {
    let mut out = BTreeMap::new();
    for e in g.edges() {
        if out.contains_key(&e.label) {
            continue;
        }
        let s = lfr.lfr_for(e)?;
        out.insert(e.label, mult.instantiate(prob, e.label, s.unc_inputs(), s.unc_outputs(), inverse, margin)?);
    }
    Ok(out)
}

fn lfr_margin(g: &ConstrainingGraph, lfr: &impl EdgeLfrs) -> Result<f64> {
    let mut m: f64 = 0.0;
    for e in g.edges() {
        m = m.max(lfr.lfr_for(e)?.data_norm());
    }
    Ok(m)
}

/// Robust stability: [I 0; A B_wu]' diag(-X_i, X_j) [..] + [0 I; C_zu D_zu_wu]' P_delta [..] < 0,
/// emitted in Schur form in (X_i, X_j, multiplier) so that an empty channel
/// gives exactly the nominal stability blocks.
pub fn assemble_robust_stability(g: &ConstrainingGraph, lfr: &impl EdgeLfrs, mult: &MultiplierClass) -> Result<LmiProblem> {
    let mut prob = LmiProblem::new("robust-stability");
    let first = g.edges().first().ok_or_else(|| Error::Invalid("graph has no edges".into()))?;
    let n = lfr.lfr_for(first)?.states();
    let mut norm: f64 = 0.0;
    for e in g.edges() {
        norm = norm.max(lfr.lfr_for(e)?.a.norm());
        let s = lfr.lfr_for(e)?;
        if s.unc_inputs() > 0 {
            norm = norm.max(s.uncertainty_channel().data_norm());
        }
    }
    let margin = strictness_margin(norm);
    let mults = multipliers(&mut prob, g, lfr, mult, false, margin)?;
    let x = per_node(&mut prob, g.nodes(), false, |p, nm| p.vars.symmetric(nm, n), "X");
    for e in g.edges() {
        let s = lfr.lfr_for(e)?;
        let ch = s.uncertainty_channel();
        let nu = ch.inputs();
        let xi = &x[&e.tail];
        let xj = &x[&e.head];
        let m = vstack(&[&hstack(&[&zeros(nu, n), &eye(nu)])?, &hstack(&[ch.c(), ch.d()])?])?;
        let pm = full_index(&mults[&e.label]).congruence(&m);
        let top = AffineExpr::grid(&[n, nu], &[n, nu], &[(0, 0, xi)]);
        let d11 = &top - &pm;
        let ab = hstack(&[ch.a(), ch.b()])?;
        let xab = xj.rmul(&ab);
        let expr = AffineExpr::sym_blocks(&[n + nu, n], &[(0, 0, &d11), (0, 1, &xab.t()), (1, 1, xj)]);
        prob.push(LmiBlock::new(edge_name("lyap", e), expr, Sense::PositiveDefinite, BlockTag::Edge(*e), margin)?);
    }
    Ok(prob)
}

/// Robust performance form: the primal quadratic form (minimizes t when
/// `perf` is [`Performance::L2Level`]) or the dual slack form with a fixed
/// index and inverse multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustForm {
    Primal,
    DualSlack,
}

pub fn assemble_robust_performance(g: &ConstrainingGraph, lfr: &impl EdgeLfrs, mult: &MultiplierClass, perf: Performance, form: RobustForm, sharing: Sharing) -> Result<LmiProblem> {
    let cases: Vec<EdgeCase> = g
        .edges()
        .iter()
        .map(|e| Ok(EdgeCase { edge: *e, sys: lfr.lfr_for(e)?.augmented(), control: None }))
        .collect::<Result<_>>()?;
    let norm = lfr_margin(g, lfr)?;
    let perf_dims: BTreeMap<usize, (usize, usize)> = g
        .edges()
        .iter()
        .map(|e| {
            let s = lfr.lfr_for(e)?;
            Ok((e.label, (s.perf_inputs(), s.perf_outputs())))
        })
        .collect::<Result<_>>()?;
    match form {
        RobustForm::Primal => {
            let mut prob = LmiProblem::new("robust-primal");
            let pidx = primal_index(&mut prob, perf, &perf_dims)?;
            let margin = strictness_margin(pidx.values().map(|ix| ix.data_norm()).fold(norm, f64::max));
            let mults = multipliers(&mut prob, g, lfr, mult, false, margin)?;
            let index = pidx.iter().map(|(l, ix)| (*l, IndexExpr::augment(&mults[l], ix))).collect();
            emit_performance(&mut prob, g, &cases, &index, Form::Primal, sharing, margin)?;
            Ok(prob)
        }
        RobustForm::DualSlack => {
            let Performance::Index(p) = perf else {
                return Err(Error::Invalid("dual robust forms need a fixed index; bisect on gamma".into()));
            };
            let mut prob = LmiProblem::new("robust-dual-slack");
            let pinv = inverse_index(p, perf_dims.keys().copied())?;
            let margin = strictness_margin(pinv.values().map(|ix| ix.data_norm()).fold(norm, f64::max));
            let mults = multipliers(&mut prob, g, lfr, mult, true, margin)?;
            let index = pinv.iter().map(|(l, ix)| (*l, IndexExpr::augment(&mults[l], ix))).collect();
            emit_performance(&mut prob, g, &cases, &index, Form::DualSlack, sharing, margin)?;
            Ok(prob)
        }
    }
}

fn open_loop_cases(g: &ConstrainingGraph, open: &OpenLoopFamily, augmented: bool) -> Result<Vec<EdgeCase>> {
    g.edges()
        .iter()
        .map(|e| {
            let s = open.get(e.label).ok_or_else(|| Error::Invalid(format!("label {} unassigned", e.label)))?;
            let (sys, du) = if augmented {
                (s.lfr.augmented(), s.d_u_stacked())
            } else {
                (s.lfr.nominal(), s.d_zp_u.clone())
            };
            Ok(EdgeCase { edge: *e, sys, control: Some((s.b_u.clone(), du)) })
        })
        .collect()
}

/// Nominal state-feedback synthesis (uncertainty channel ignored). Primal
/// Schur/slack forms accept [`Performance::L2Level`]; dual forms need a fixed
/// index.
pub fn assemble_synthesis(g: &ConstrainingGraph, open: &OpenLoopFamily, perf: Performance, form: Form, shared_gain: bool) -> Result<LmiProblem> {
    if matches!(form, Form::Primal | Form::Dual) {
        return Err(Error::Invalid(format!("form {} has no synthesis version", form.name())));
    }
    let cases = open_loop_cases(g, open, false)?;
    let sharing = if shared_gain { Sharing::shared_gain(form) } else { Sharing::NONE };
    let mut prob = LmiProblem::new(&format!("synthesis-{}", form.name()));
    let dims = label_dims(&cases)?;
    let index = if form.is_dual() {
        let Performance::Index(p) = perf else {
            return Err(Error::Invalid("dual synthesis forms need a fixed index; bisect on gamma".into()));
        };
        inverse_index(p, dims.keys().copied())?
    } else {
        primal_index(&mut prob, perf, &dims)?
    };
    let margin = strictness_margin(data_norm(&cases, &index));
    emit_performance(&mut prob, g, &cases, &index, form, sharing, margin)?;
    Ok(prob)
}

/// Robust synthesis: dual Schur or dual slack condition on the augmented
/// plant with inverse multipliers as decision variables.
pub fn assemble_robust_synthesis(g: &ConstrainingGraph, open: &OpenLoopFamily, mult: &MultiplierClass, p: &PerformanceIndex, form: Form, shared_gain: bool) -> Result<LmiProblem> {
    if !matches!(form, Form::DualSchur | Form::DualSlack) {
        return Err(Error::Invalid("robust synthesis uses the dual-schur or dual-slack form".into()));
    }
    let cases = open_loop_cases(g, open, true)?;
    let sharing = if shared_gain { Sharing::shared_gain(form) } else { Sharing::NONE };
    let mut prob = LmiProblem::new(&format!("robust-synthesis-{}", form.name()));
    let labels: Vec<usize> = label_dims(&cases)?.keys().copied().collect();
    let pinv = inverse_index(p, labels.iter().copied())?;
    let lfrs = open.lfr_family();
    let norm = data_norm(&cases, &pinv);
    let margin = strictness_margin(norm);
    let mults = multipliers(&mut prob, g, &lfrs, mult, true, margin)?;
    let index = pinv.iter().map(|(l, ix)| (*l, IndexExpr::augment(&mults[l], ix))).collect();
    emit_performance(&mut prob, g, &cases, &index, form, sharing, margin)?;
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::expr::VariableSet;
    use crate::model::system::{l2_index, SystemFamily};

    fn scalar_family() -> (ConstrainingGraph, SystemFamily) {
        (ConstrainingGraph::self_loops(1), SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap())
    }

    #[test]
    fn stability_bookkeeping() {
        let g = ConstrainingGraph::from_triples(&[(1, 1, 1), (1, 2, 2), (2, 1, 1)], 2).unwrap();
        let a = Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let s = StateSpace::new(a.clone(), zeros(2, 1), zeros(1, 2), zeros(1, 1)).unwrap();
        let f = SystemFamily::new(vec![s.clone(), s]).unwrap();
        let p = assemble_stability(&g, &f).unwrap();
        assert_eq!(p.vars.len(), 6);
        assert_eq!(p.blocks.len(), 3);
        assert!(p.blocks.iter().all(|b| b.dim() == 4));
    }

    #[test]
    fn hand_certificate_for_scalar_primal_form() {
        // X = 4 certifies gamma = 2.5 for x+ = 0.5 x + w, z = x.
        let (g, f) = scalar_family();
        let p = l2_index(2.5, &f).unwrap();
        let prob = assemble_dissipativity(&g, &f, Performance::Index(&p), Form::Primal, Sharing::NONE).unwrap();
        let mut x = vec![0.0; prob.vars.len()];
        x[0] = 4.0;
        assert!(prob.certify(&x));
        // quadratic form: [-X + X/4 + 1, X/2; X/2, X - 6.25]
        let v = prob.blocks[1].expr.eval(&x);
        assert!((v[(0, 0)] - (-3.0 + 1.0)).abs() < 1e-12);
        assert!((v[(0, 1)] - 2.0).abs() < 1e-12);
        assert!((v[(1, 1)] - (4.0 - 6.25)).abs() < 1e-12);
    }

    #[test]
    fn slack_feasible_from_schur_point() {
        // G = X~ turns a Schur certificate into a slack certificate.
        let (g, f) = scalar_family();
        let p = l2_index(2.5, &f).unwrap();
        let schur = assemble_dissipativity(&g, &f, Performance::Index(&p), Form::Schur, Sharing::NONE).unwrap();
        let slack = assemble_dissipativity(&g, &f, Performance::Index(&p), Form::Slack, Sharing::NONE).unwrap();
        let xt = 0.25;
        assert!(schur.certify(&[xt]));
        assert!(slack.certify(&[xt, xt]));
    }

    #[test]
    fn energy_to_peak_rejects_feedthrough_and_zero_gamma() {
        let g = ConstrainingGraph::self_loops(1);
        let f = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.1)]).unwrap();
        assert!(assemble_energy_to_peak(&g, &f, Some(1.2), EnergyForm::Basic).is_err());
        let (g, f) = scalar_family();
        assert!(assemble_energy_to_peak(&g, &f, Some(0.0), EnergyForm::Basic).is_err());
    }

    #[test]
    fn blocks_are_affine() {
        // F(x + y) - F(x) - F(y) + F(0) vanishes for affine F.
        let (g, f) = scalar_family();
        let p = l2_index(2.0, &f).unwrap();
        for form in Form::ALL {
            let prob = assemble_performance(&g, &f, &p, form, Sharing::NONE).unwrap();
            let n = prob.vars.len();
            let x: Vec<f64> = (0..n).map(|k| 0.3 + k as f64).collect();
            let y: Vec<f64> = (0..n).map(|k| -1.1 + 0.5 * k as f64).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            for b in &prob.blocks {
                let r = b.expr.eval(&xy) - b.expr.eval(&x) - b.expr.eval(&y) + b.expr.eval(&vec![0.0; n]);
                assert!(r.amax() < 1e-12);
            }
        }
        let _ = VariableSet::new();
    }
}
