//! Trajectory-level validation: simulation along walks, empirical gain
//! lower bounds, dissipation audits and a product-norm audit.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::certify::Certificate;
use crate::error::{Error, Result};
use crate::linalg::{max_eig, spectral_norm, zeros, Mat};
use crate::model::graph::{ConstrainingGraph, EdgeWalk, NodeId};
use crate::model::system::{EdgeSystems, PerformanceIndex, StateSpace};
use crate::whrt::{BasePlant, Strategy};

type Vector = DVector<f64>;

/// One rollout: `x[t+1] = A x[t] + B w[t]`, `z[t] = C x[t] + D w[t]` with the
/// matrices of edge `edges[t]`. Signals are blocked per step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub edges: Vec<usize>,
    pub nodes: Vec<NodeId>,
    pub labels: Vec<usize>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

fn energy(s: &[Vec<f64>]) -> f64 {
    s.iter().flatten().map(|v| v * v).sum()
}

impl Trajectory {
    pub fn input_energy(&self) -> f64 {
        energy(&self.w)
    }

    pub fn output_energy(&self) -> f64 {
        energy(&self.z)
    }

    /// CSV rows `t,node,label,x...,w...,z...`; short blocks leave cells empty.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let width = |s: &[Vec<f64>]| s.iter().map(|v| v.len()).max().unwrap_or(0);
        let (nx, nw, nz) = (width(&self.x), width(&self.w), width(&self.z));
        let mut header = vec!["t".to_string(), "node".into(), "label".into()];
        header.extend((1..=nx).map(|i| format!("x{i}")));
        header.extend((1..=nw).map(|i| format!("w{i}")));
        header.extend((1..=nz).map(|i| format!("z{i}")));
        writeln!(out, "{}", header.join(","))?;
        let cells = |v: Option<&Vec<f64>>, n: usize| -> Vec<String> {
            (0..n).map(|i| v.and_then(|v| v.get(i)).map(|x| format!("{x:.17e}")).unwrap_or_default()).collect()
        };
        for t in 0..self.x.len() {
            let mut row = vec![t.to_string()];
            row.push(self.nodes.get(t).map(|n| n.to_string()).unwrap_or_default());
            row.push(self.labels.get(t).map(|l| l.to_string()).unwrap_or_default());
            row.extend(cells(self.x.get(t), nx));
            row.extend(cells(self.w.get(t), nw));
            row.extend(cells(self.z.get(t), nz));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn mv(m: &Mat, v: &Vector) -> Vector {
    m * v
}

/// Rolls the family out along `walk` from `x0` with per-step inputs.
pub fn simulate(g: &ConstrainingGraph, f: &impl EdgeSystems, walk: &EdgeWalk, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Trajectory> {
    if inputs.len() != walk.len() {
        return Err(Error::Dimension(format!("{} input blocks for a walk of length {}", inputs.len(), walk.len())));
    }
    let mut x = Vector::from_column_slice(x0);
    let mut t = Trajectory { edges: walk.edges().to_vec(), nodes: Vec::new(), labels: Vec::new(), x: vec![x0.to_vec()], w: Vec::new(), z: Vec::new() };
    for (step, (&k, w)) in walk.edges().iter().zip(inputs).enumerate() {
        let e = g.edge(k);
        let s = f.system_for(e)?;
        if x.len() != s.states() || w.len() != s.inputs() {
            return Err(Error::Dimension(format!("step {step} (label {}): state {} / input {} vs system {} / {}", e.label, x.len(), w.len(), s.states(), s.inputs())));
        }
        let wv = Vector::from_column_slice(w);
        let z = mv(s.c(), &x) + mv(s.d(), &wv);
        x = mv(s.a(), &x) + mv(s.b(), &wv);
        t.nodes.push(e.tail);
        t.labels.push(e.label);
        t.w.push(w.clone());
        t.z.push(z.as_slice().to_vec());
        t.x.push(x.as_slice().to_vec());
    }
    Ok(t)
}

fn systems<'a>(g: &ConstrainingGraph, f: &'a impl EdgeSystems, edges: &[usize]) -> Result<Vec<&'a StateSpace>> {
    edges.iter().map(|&k| f.system_for(g.edge(k))).collect()
}

/// Zero-state response z = T w along the walk.
fn forward(sys: &[&StateSpace], w: &[Vector]) -> Vec<Vector> {
    let mut x = Vector::zeros(sys.first().map(|s| s.states()).unwrap_or(0));
    let mut z = Vec::with_capacity(sys.len());
    for (s, w) in sys.iter().zip(w) {
        z.push(mv(s.c(), &x) + mv(s.d(), w));
        x = mv(s.a(), &x) + mv(s.b(), w);
    }
    z
}

/// Adjoint w = T' z, by the backward costate recursion.
fn adjoint(sys: &[&StateSpace], z: &[Vector]) -> Vec<Vector> {
    let mut lam = Vector::zeros(sys.first().map(|s| s.states()).unwrap_or(0));
    let mut w = vec![Vector::zeros(0); sys.len()];
    for t in (0..sys.len()).rev() {
        let s = sys[t];
        w[t] = s.b().tr_mul(&lam) + s.d().tr_mul(&z[t]);
        lam = s.a().tr_mul(&lam) + s.c().tr_mul(&z[t]);
    }
    w
}

/// Sampling settings for the empirical bounds.
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    /// Walk length in graph steps.
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// Forward/adjoint product pairs per walk.
    pub iterations: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { horizon: 200, trials: 16, seed: 1, iterations: 20 }
    }
}

/// Empirical lower bound with the walk (edge indices) and input attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalBound {
    pub value: f64,
    pub edges: Vec<usize>,
    /// Attaining input for the l2 bound; empty for the peak bound.
    pub input: Vec<Vec<f64>>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform choice among outgoing edges from a uniform start node.
pub fn random_walk(g: &ConstrainingGraph, len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut node = *g.nodes().choose(rng).expect("graph has nodes");
    let mut edges = Vec::with_capacity(len);
    for _ in 0..len {
        let Some(&k) = g.out_edges(node).choose(rng) else { break };
        edges.push(k);
        node = g.edge(k).head;
    }
    edges
}

/// Greedy walk: each step takes the edge whose update maximizes the state
/// norm under a random input.
fn adversarial_walk(g: &ConstrainingGraph, f: &impl EdgeSystems, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let mut node = *g.nodes().choose(rng).expect("graph has nodes");
    let n = f.system_for(g.edge(g.out_edges(node)[0]))?.states();
    let mut x = gaussian(rng, n);
    let mut edges = Vec::with_capacity(len);
    for _ in 0..len {
        let mut best: Option<(f64, usize, Vector)> = None;
        for &k in g.out_edges(node) {
            let s = f.system_for(g.edge(k))?;
            let w = gaussian(rng, s.inputs());
            let xn = mv(s.a(), &x) + mv(s.b(), &w);
            let score = xn.norm_squared() + (mv(s.c(), &x) + mv(s.d(), &w)).norm_squared();
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, k, xn));
            }
        }
        let Some((_, k, xn)) = best else { break };
        edges.push(k);
        node = g.edge(k).head;
        let nrm = xn.norm();
        x = if nrm > 0.0 { xn / nrm } else { gaussian(rng, n) };
    }
    Ok(edges)
}

fn sample_walk(g: &ConstrainingGraph, f: &impl EdgeSystems, opts: &SimOptions, trial: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if trial % 2 == 0 {
        Ok(random_walk(g, opts.horizon, rng))
    } else {
        adversarial_walk(g, f, opts.horizon, rng)
    }
}

/// Runs `trial` for every index on scoped threads and keeps the largest
/// value (lowest trial index on ties).
fn best_of<F>(trials: usize, trial: F) -> Result<EmpiricalBound>
where
    F: Fn(usize) -> Result<EmpiricalBound> + Sync,
{
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(trials.max(1));
    let results: Vec<Result<EmpiricalBound>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|h| {
                let trial = &trial;
                s.spawn(move || (h..trials).step_by(threads).map(|t| (t, trial(t))).collect::<Vec<_>>())
            })
            .collect();
        let mut all: Vec<(usize, Result<EmpiricalBound>)> = handles.into_iter().flat_map(|h| h.join().expect("trial thread panicked")).collect();
        all.sort_by_key(|(t, _)| *t);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let mut best: Option<EmpiricalBound> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.unwrap_or(EmpiricalBound { value: 0.0, edges: Vec::new(), input: Vec::new() }))
}

/// Flattened block signal.
fn flatten(s: &[Vector]) -> Vector {
    Vector::from_iterator(s.iter().map(|v| v.len()).sum(), s.iter().flat_map(|v| v.iter().copied()))
}

fn unflatten(v: &Vector, like: &[&StateSpace], inputs: bool) -> Vec<Vector> {
    let mut k = 0;
    like.iter()
        .map(|s| {
            let n = if inputs { s.inputs() } else { s.outputs() };
            let b = v.rows(k, n).into_owned();
            k += n;
            b
        })
        .collect()
}

fn orthogonalize(v: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(v);
            v.axpy(-c, b, 1.0);
        }
    }
}

/// Largest singular value of the walk operator over a Krylov space of
/// `steps` forward/adjoint products (Golub-Kahan with full
/// reorthogonalization), returned with an input attaining it.
fn top_singular(sys: &[&StateSpace], w0: Vector, steps: usize) -> (f64, Vector) {
    let t = |v: &Vector| flatten(&forward(sys, &unflatten(v, sys, true)));
    let ta = |u: &Vector| flatten(&adjoint(sys, &unflatten(u, sys, false)));
    let n0 = w0.norm();
    if n0 == 0.0 {
        return (0.0, w0);
    }
    let mut vs = vec![w0 / n0];
    let mut us: Vec<Vector> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for j in 0..steps.max(1) {
        let mut u = t(&vs[j]);
        orthogonalize(&mut u, &us);
        let a = u.norm();
        if a <= 1e-300 {
            break;
        }
        alpha.push(a);
        us.push(u / a);
        let mut v = ta(&us[j]);
        orthogonalize(&mut v, &vs);
        let b = v.norm();
        if j + 1 == steps.max(1) || b <= 1e-14 * a {
            break;
        }
        beta.push(b);
        vs.push(v / b);
    }
    let k = alpha.len();
    if k == 0 {
        return (0.0, vs.swap_remove(0));
    }
    let mut bd = zeros(k, k);
    for i in 0..k {
        bd[(i, i)] = alpha[i];
        if i + 1 < k {
            bd[(i, i + 1)] = beta[i];
        }
    }
    let svd = bd.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = (0..k).max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).expect("k > 0");
    let mut w = Vector::zeros(vs[0].len());
    for i in 0..k {
        w.axpy(vt[(top, i)], &vs[i], 1.0);
    }
    let w = w.normalize();
    // Re-evaluate by simulation so the value is attained exactly.
    (t(&w).norm(), w)
}

/// Lower bound on the l2 gain over sampled walks (alternating uniform and
/// greedy) with inputs refined by Krylov iteration on the zero-state
/// operator of each walk.
pub fn empirical_l2_lb(g: &ConstrainingGraph, f: &(impl EdgeSystems + Sync), opts: &SimOptions) -> Result<EmpiricalBound> {
    if opts.horizon == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    best_of(opts.trials, |trial| {
        let mut rng = trial_rng(opts.seed, trial);
        let edges = sample_walk(g, f, opts, trial, &mut rng)?;
        let sys = systems(g, f, &edges)?;
        let w0 = flatten(&sys.iter().map(|s| gaussian(&mut rng, s.inputs())).collect::<Vec<_>>());
        let (value, w) = top_singular(&sys, w0, opts.iterations);
        let input = unflatten(&w, &sys, true).iter().map(|v| v.as_slice().to_vec()).collect();
        Ok(EmpiricalBound { value, edges, input })
    })
}

/// Lower bound on the energy-to-peak gain. Along each walk the bound
/// `max_t sqrt(lambda_max(C_t W_t C_t'))` is exact, with W_t the reachability
/// Gramian of the walk prefix.
pub fn empirical_peak_lb(g: &ConstrainingGraph, f: &(impl EdgeSystems + Sync), opts: &SimOptions) -> Result<EmpiricalBound> {
    if opts.horizon == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    for e in g.edges() {
        if f.system_for(e)?.d().iter().any(|&v| v != 0.0) {
            return Err(Error::Invalid(format!("energy-to-peak needs D = 0, label {} has nonzero feedthrough", e.label)));
        }
    }
    best_of(opts.trials, |trial| {
        let mut rng = trial_rng(opts.seed, trial);
        let edges = sample_walk(g, f, opts, trial, &mut rng)?;
        let sys = systems(g, f, &edges)?;
        let n = sys.first().map(|s| s.states()).unwrap_or(0);
        let mut w = zeros(n, n);
        let mut value: f64 = 0.0;
        for s in &sys {
            let out = s.c() * &w * s.c().transpose();
            if out.nrows() > 0 {
                value = value.max(max_eig(&out).max(0.0).sqrt());
            }
            w = s.a() * &w * s.a().transpose() + s.b() * s.b().transpose();
        }
        Ok(EmpiricalBound { value, edges, input: Vec::new() })
    })
}

/// Primal storage matrices per node: "X[i]"/"X" directly, otherwise the
/// inverse of "Xt[i]"/"Xt".
pub fn storage_from_certificate(cert: &Certificate, g: &ConstrainingGraph) -> Result<BTreeMap<NodeId, Mat>> {
    g.nodes()
        .iter()
        .map(|&i| {
            if let Some(x) = cert.node_matrix("X", i) {
                return Ok((i, x.clone()));
            }
            let xt = cert.node_matrix("Xt", i).ok_or_else(|| Error::Invalid(format!("certificate has no storage for node {i}")))?;
            let inv = xt.clone().try_inverse().ok_or_else(|| Error::Invalid(format!("Xt for node {i} is singular")))?;
            Ok((i, inv))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationAudit {
    /// Per step: V_i(x) - V_j(x+) - [w; z]' P [w; z].
    pub slacks: Vec<f64>,
    /// V(x_0) - V(x_T) - sum of supply terms over the whole trajectory.
    pub telescoped: f64,
    pub min_slack: f64,
}

/// Evaluates the dissipation inequality of `storage` and index `p` step by
/// step along a trajectory. Storage matrices of dimension larger than the
/// state (augmented certificates) use their leading block.
pub fn check_dissipation(g: &ConstrainingGraph, traj: &Trajectory, storage: &BTreeMap<NodeId, Mat>, p: &PerformanceIndex) -> Result<DissipationAudit> {
    let v = |node: NodeId, x: &[f64]| -> Result<f64> {
        let m = storage.get(&node).ok_or_else(|| Error::Invalid(format!("no storage for node {node}")))?;
        if m.nrows() < x.len() {
            return Err(Error::Dimension(format!("storage of node {node} is {}x{}, state has {}", m.nrows(), m.ncols(), x.len())));
        }
        let xv = Vector::from_column_slice(x);
        let m = m.view((0, 0), (x.len(), x.len()));
        Ok(xv.dot(&(m * &xv)))
    };
    let mut slacks = Vec::with_capacity(traj.edges.len());
    let mut supply_total = 0.0;
    for (t, &k) in traj.edges.iter().enumerate() {
        let e = g.edge(k);
        let ix = p.get(e.label).ok_or_else(|| Error::Invalid(format!("index lacks label {}", e.label)))?;
        let wz = Vector::from_iterator(traj.w[t].len() + traj.z[t].len(), traj.w[t].iter().chain(&traj.z[t]).copied());
        let supply = wz.dot(&(ix.matrix() * &wz));
        supply_total += supply;
        slacks.push(v(e.tail, &traj.x[t])? - v(e.head, &traj.x[t + 1])? - supply);
    }
    let telescoped = match (traj.edges.first(), traj.edges.last()) {
        (Some(&a), Some(&b)) => v(g.edge(a).tail, &traj.x[0])? - v(g.edge(b).head, traj.x.last().expect("nonempty"))? - supply_total,
        _ => 0.0,
    };
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DissipationAudit { slacks, telescoped, min_slack: if min_slack.is_finite() { min_slack } else { 0.0 } })
}

const AUDIT_BUDGET: usize = 5_000_000;

/// max over walks of exactly `depth` steps of
/// ||A_{e_k} ... A_{e_1}||^{1/depth}, an upper estimate of the growth rate
/// that decreases towards the joint spectral radius of the constrained
/// family as the depth grows. Values at or above one flag a risk of
/// instability; values below one do not prove stability.
pub fn spectral_audit(g: &ConstrainingGraph, f: &impl EdgeSystems, depth: usize) -> Result<f64> {
    if depth == 0 || depth > 20 {
        return Err(Error::Invalid(format!("audit depth must lie in 1..=20, got {depth}")));
    }
    let mut best: f64 = 0.0;
    let mut visited = 0usize;
    // Stack of (node, product, length).
    let mut stack: Vec<(NodeId, Mat, usize)> = Vec::new();
    for &i in g.nodes() {
        if let Some(&k) = g.out_edges(i).first() {
            let n = f.system_for(g.edge(k))?.states();
            stack.push((i, Mat::identity(n, n), 0));
        }
    }
    while let Some((node, prod, len)) = stack.pop() {
        for &k in g.out_edges(node) {
            let e = g.edge(k);
            let p = f.system_for(e)?.a() * &prod;
            visited += 1;
            if visited > AUDIT_BUDGET {
                return Err(Error::WalkBudget(AUDIT_BUDGET));
            }
            if len + 1 == depth {
                best = best.max(spectral_norm(&p).powf(1.0 / depth as f64));
            } else {
                stack.push((e.head, p, len + 1));
            }
        }
    }
    Ok(best)
}

/// Steps the base plant through an outcome word (true = success). At a
/// success the next entry of `u` is applied; after a loss the actuator
/// applies zero or holds its last value. Returns the states (one more than
/// the word) and outputs.
pub fn simulate_base_word(p: &BasePlant, word: &[bool], strategy: Strategy, x0: &[f64], w: &[Vec<f64>], u: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if w.len() != word.len() {
        return Err(Error::Dimension(format!("{} inputs for a word of length {}", w.len(), word.len())));
    }
    let du = p.b_u.ncols();
    let mut applied = Vector::zeros(du);
    let mut next_u = u.iter();
    let mut x = Vector::from_column_slice(x0);
    let mut xs = vec![x0.to_vec()];
    let mut zs = Vec::with_capacity(word.len());
    for (&hit, wt) in word.iter().zip(w) {
        if hit {
            let v = next_u.next().ok_or_else(|| Error::Dimension("too few control values".into()))?;
            applied = Vector::from_column_slice(v);
        } else if strategy == Strategy::Zero {
            applied = Vector::zeros(du);
        }
        let wv = Vector::from_column_slice(wt);
        let z = mv(&p.c, &x) + mv(&p.d, &wv) + mv(&p.d_u, &applied);
        x = mv(&p.a, &x) + mv(&p.b, &wv) + mv(&p.b_u, &applied);
        xs.push(x.as_slice().to_vec());
        zs.push(z.as_slice().to_vec());
    }
    Ok((xs, zs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::system::{l2_index, SystemFamily};

    fn scalar() -> (ConstrainingGraph, SystemFamily) {
        (ConstrainingGraph::self_loops(1), SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap())
    }

    #[test]
    fn impulse_response() {
        let (g, f) = scalar();
        let walk = EdgeWalk::new(&g, vec![0; 4]).unwrap();
        let t = simulate(&g, &f, &walk, &[0.0], &[vec![1.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let xs: Vec<f64> = t.x.iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 0.5, 0.25, 0.125]);
        let zero = simulate(&g, &f, &walk, &[0.0], &vec![vec![0.0]; 4]).unwrap();
        assert!(zero.x.iter().chain(&zero.z).flatten().all(|&v| v == 0.0));
        assert!(simulate(&g, &f, &walk, &[0.0], &vec![vec![0.0, 1.0]; 4]).is_err());
    }

    #[test]
    fn scalar_bounds() {
        let (g, f) = scalar();
        let opts = SimOptions { horizon: 60, trials: 4, ..Default::default() };
        let l2 = empirical_l2_lb(&g, &f, &opts).unwrap();
        assert!(l2.value >= 1.99 && l2.value <= 2.0 + 1e-9, "{}", l2.value);
        let peak = empirical_peak_lb(&g, &f, &opts).unwrap();
        assert!(peak.value >= 1.15 && peak.value <= (4.0f64 / 3.0).sqrt() + 1e-12, "{}", peak.value);
        let zero = SystemFamily::new(vec![StateSpace::scalar(0.0, 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(empirical_peak_lb(&g, &zero, &opts).unwrap().value, 0.0);
        let again = empirical_l2_lb(&g, &f, &opts).unwrap();
        assert_eq!(again.value, l2.value);
    }

    #[test]
    fn dissipation_of_scalar_storage() {
        // X = 4/3 satisfies the l2 inequality at gamma = 2 for a = 0.5.
        let (g, f) = scalar();
        let walk = EdgeWalk::new(&g, vec![0; 5]).unwrap();
        let t = simulate(&g, &f, &walk, &[0.3], &[vec![1.0], vec![-2.0], vec![0.5], vec![0.0], vec![1.0]]).unwrap();
        let p = l2_index(2.0, &f).unwrap();
        let good = BTreeMap::from([(1, Mat::from_element(1, 1, 4.0 / 3.0))]);
        let a = check_dissipation(&g, &t, &good, &p).unwrap();
        assert!(a.min_slack >= -1e-12);
        assert!((a.telescoped - a.slacks.iter().sum::<f64>()).abs() < 1e-12);
        let bad = BTreeMap::from([(1, Mat::from_element(1, 1, -4.0 / 3.0))]);
        assert!(check_dissipation(&g, &t, &bad, &p).unwrap().min_slack < 0.0);
    }

    #[test]
    fn audit_scalar() {
        let (g, f) = scalar();
        assert!((spectral_audit(&g, &f, 8).unwrap() - 0.5).abs() < 1e-15);
        assert!(spectral_audit(&g, &f, 21).is_err());
    }
}
