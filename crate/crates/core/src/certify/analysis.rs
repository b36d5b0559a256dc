//! Analysis drivers: assemble, solve, certify, and search on the level.

use serde::Serialize;

use super::{residuals_at, Certificate, ResidualReport};
use crate::error::{Error, Result};
use crate::lmi::assemble::{
    assemble_dissipativity, assemble_energy_to_peak, assemble_performance, assemble_robust_performance, EnergyForm, Form, Performance, RobustForm, Sharing,
};
use crate::lmi::lfr::{ClosedLoopFamily, EdgeLfrs};
use crate::lmi::multiplier::MultiplierClass;
use crate::lmi::LmiProblem;
use crate::model::graph::ConstrainingGraph;
use crate::model::system::{l2_index_dims, EdgeSystems, PerformanceIndex};
use crate::sdp::{bisect_gamma, solve_lmi, BisectOptions, BisectionStep, SdpSolver, SolveStatus};

/// What is certified.
#[derive(Clone, Copy, Debug)]
pub enum Criterion<'a> {
    /// Smallest l2 gain bound.
    L2,
    /// Feasibility for a fixed quadratic index.
    Quadratic(&'a PerformanceIndex),
    /// Smallest energy-to-peak gain bound.
    EnergyToPeak,
}

/// How the level is searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    /// Minimize the level variable in one solve where the form allows it,
    /// bisecting otherwise.
    Direct,
    /// Always bisect on gamma.
    Bisect,
}

#[derive(Clone, Copy, Debug)]
pub struct AnalysisOptions {
    pub form: Form,
    pub sharing: Sharing,
    pub search: Search,
    pub bisect: BisectOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { form: Form::Primal, sharing: Sharing::NONE, search: Search::Direct, bisect: BisectOptions::default() }
    }
}

/// A certified problem instance.
#[derive(Clone, Debug)]
pub struct AnalysisResult {
    /// Certified level; `None` for a fixed-index feasibility check.
    pub gamma: Option<f64>,
    pub problem: LmiProblem,
    pub x: Vec<f64>,
    /// Bisection steps, empty for a single solve.
    pub steps: Vec<BisectionStep>,
}

impl AnalysisResult {
    pub fn certificate(&self) -> Certificate {
        Certificate::from_solution(&self.problem, &self.x, self.gamma)
    }

    pub fn residuals(&self) -> ResidualReport {
        residuals_at(&self.problem, &self.x)
    }
}

/// (input, output) dimensions per label 1..=m, read off the edges.
pub fn label_dims(g: &ConstrainingGraph, f: &impl EdgeSystems) -> Result<Vec<(usize, usize)>> {
    let mut dims = vec![(0, 0); g.num_labels()];
    for e in g.edges() {
        let s = f.system_for(e)?;
        dims[e.label - 1] = (s.inputs(), s.outputs());
    }
    Ok(dims)
}

/// Performance-channel dimensions per label of an LFR family.
pub fn perf_dims(g: &ConstrainingGraph, lfr: &impl EdgeLfrs) -> Result<Vec<(usize, usize)>> {
    let mut dims = vec![(0, 0); g.num_labels()];
    for e in g.edges() {
        let s = lfr.lfr_for(e)?;
        dims[e.label - 1] = (s.perf_inputs(), s.perf_outputs());
    }
    Ok(dims)
}

/// Solves a fixed problem; `Error::Infeasible` unless the point certifies.
pub fn solve_feasibility(prob: LmiProblem, solver: &dyn SdpSolver) -> Result<AnalysisResult> {
    let sol = solve_lmi(&prob, solver)?;
    if sol.certified {
        let x = sol.result.x.unwrap_or_default();
        return Ok(AnalysisResult { gamma: None, problem: prob, x, steps: Vec::new() });
    }
    match sol.result.status {
        SolveStatus::NumericalFailure => Err(Error::Solver(format!("{}: numerical failure", prob.form))),
        _ => Err(Error::Infeasible),
    }
}

/// Minimizes the level variable `var` of `direct` (level = `to_gamma(value)`)
/// and falls back to bisecting `fixed` when the optimum does not certify.
pub fn solve_level(
    direct: Option<LmiProblem>,
    var: &str,
    to_gamma: fn(f64) -> f64,
    fixed: impl Fn(f64) -> Result<LmiProblem>,
    solver: &dyn SdpSolver,
    opts: BisectOptions,
) -> Result<AnalysisResult> {
    let mut opts = opts;
    if let Some(prob) = direct {
        let sol = solve_lmi(&prob, solver)?;
        let id = prob.vars.find(var).ok_or_else(|| Error::Invalid(format!("problem has no level variable {var}")))?;
        match (sol.certified, sol.result.status) {
            (true, _) => {
                let x = sol.result.x.unwrap_or_default();
                let gamma = to_gamma(prob.vars.unpack(id, &x)[(0, 0)]);
                return Ok(AnalysisResult { gamma: Some(gamma), problem: prob, x, steps: Vec::new() });
            }
            (false, SolveStatus::Infeasible) => return Err(Error::Infeasible),
            (false, _) => {
                log::warn!("{}: level optimum did not certify, bisecting instead", prob.form);
                if let Some(x) = sol.result.x.as_deref() {
                    let g = to_gamma(prob.vars.unpack(id, x)[(0, 0)]);
                    if g.is_finite() && g > opts.lo {
                        opts.hint = g * 1.01;
                    }
                }
            }
        }
    }
    let trace = bisect_gamma(fixed, solver, opts)?;
    Ok(AnalysisResult { gamma: Some(trace.gamma), problem: trace.problem, x: trace.x, steps: trace.steps })
}

fn energy_form(form: Form) -> EnergyForm {
    if form.has_slack() {
        EnergyForm::Slack
    } else {
        EnergyForm::Basic
    }
}

fn sqrt(t: f64) -> f64 {
    t.max(0.0).sqrt()
}

fn ident(g: f64) -> f64 {
    g
}

/// Certifies a family without uncertainty, e.g. a closed loop.
pub fn analyze_nominal(g: &ConstrainingGraph, f: &impl EdgeSystems, crit: Criterion, opts: &AnalysisOptions, solver: &dyn SdpSolver) -> Result<AnalysisResult> {
    match crit {
        Criterion::Quadratic(p) => solve_feasibility(assemble_performance(g, f, p, opts.form, opts.sharing)?, solver),
        Criterion::L2 => {
            let dims = label_dims(g, f)?;
            let direct = match (opts.search, opts.form) {
                (Search::Direct, Form::Primal | Form::Schur | Form::Slack) => Some(assemble_dissipativity(g, f, Performance::L2Level, opts.form, opts.sharing)?),
                _ => None,
            };
            solve_level(direct, "t", sqrt, |gm| assemble_performance(g, f, &l2_index_dims(gm, &dims)?, opts.form, opts.sharing), solver, opts.bisect)
        }
        Criterion::EnergyToPeak => {
            let ef = energy_form(opts.form);
            let direct = match opts.search {
                Search::Direct => Some(assemble_energy_to_peak(g, f, None, ef)?),
                Search::Bisect => None,
            };
            solve_level(direct, "gamma", ident, |gm| assemble_energy_to_peak(g, f, Some(gm), ef), solver, opts.bisect)
        }
    }
}

/// Robust certification with multipliers for the uncertainty channel. The
/// primal form minimizes the level directly; the dual slack form bisects.
pub fn analyze_robust(
    g: &ConstrainingGraph,
    lfr: &impl EdgeLfrs,
    mult: &MultiplierClass,
    crit: Criterion,
    opts: &AnalysisOptions,
    solver: &dyn SdpSolver,
) -> Result<AnalysisResult> {
    let form = match opts.form {
        Form::Primal => RobustForm::Primal,
        Form::DualSlack => RobustForm::DualSlack,
        f => return Err(Error::Invalid(format!("robust analysis supports the primal and dual-slack forms, not {}", f.name()))),
    };
    match crit {
        Criterion::Quadratic(p) => solve_feasibility(assemble_robust_performance(g, lfr, mult, Performance::Index(p), form, opts.sharing)?, solver),
        Criterion::L2 => {
            let dims = perf_dims(g, lfr)?;
            let direct = match (opts.search, form) {
                (Search::Direct, RobustForm::Primal) => Some(assemble_robust_performance(g, lfr, mult, Performance::L2Level, form, opts.sharing)?),
                _ => None,
            };
            let fixed = |gm: f64| {
                let p = l2_index_dims(gm, &dims)?;
                assemble_robust_performance(g, lfr, mult, Performance::Index(&p), form, opts.sharing)
            };
            solve_level(direct, "t", sqrt, fixed, solver, opts.bisect)
        }
        Criterion::EnergyToPeak => Err(Error::Invalid("robust energy-to-peak analysis is not available".into())),
    }
}

/// Nominal analysis of a closed loop with the uncertainty frozen at
/// Delta = delta I.
pub fn analyze_fixed_delta(
    g: &ConstrainingGraph,
    cl: &ClosedLoopFamily,
    delta: f64,
    crit: Criterion,
    opts: &AnalysisOptions,
    solver: &dyn SdpSolver,
) -> Result<AnalysisResult> {
    analyze_nominal(g, &cl.at_delta(delta)?, crit, opts, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::system::{StateSpace, SystemFamily};
    use crate::sdp::NativeSolver;

    fn scalar() -> (ConstrainingGraph, SystemFamily) {
        (ConstrainingGraph::self_loops(1), SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap())
    }

    #[test]
    fn direct_and_bisect_agree() {
        let (g, f) = scalar();
        let solver = NativeSolver::default();
        let d = analyze_nominal(&g, &f, Criterion::L2, &AnalysisOptions::default(), &solver).unwrap();
        assert!((d.gamma.unwrap() - 2.0).abs() < 1e-4, "{:?}", d.gamma);
        assert!(d.residuals().pass);
        let opts = AnalysisOptions { form: Form::DualSchur, search: Search::Bisect, ..Default::default() };
        let b = analyze_nominal(&g, &f, Criterion::L2, &opts, &solver).unwrap();
        assert!((b.gamma.unwrap() - 2.0).abs() < 1e-3);
        assert!(!b.steps.is_empty());
    }

    #[test]
    fn energy_to_peak_scalar() {
        let (g, f) = scalar();
        let solver = NativeSolver::default();
        let r = analyze_nominal(&g, &f, Criterion::EnergyToPeak, &AnalysisOptions::default(), &solver).unwrap();
        let exact = (4.0f64 / 3.0).sqrt();
        assert!((r.gamma.unwrap() - exact).abs() < 1e-4, "{:?}", r.gamma);
    }

    #[test]
    fn fixed_index_infeasible() {
        let (g, f) = scalar();
        let solver = NativeSolver::default();
        let p = l2_index_dims(1.5, &[(1, 1)]).unwrap();
        let err = analyze_nominal(&g, &f, Criterion::Quadratic(&p), &AnalysisOptions::default(), &solver).unwrap_err();
        assert!(matches!(err, Error::Infeasible), "{err}");
        let p = l2_index_dims(2.5, &[(1, 1)]).unwrap();
        assert!(analyze_nominal(&g, &f, Criterion::Quadratic(&p), &AnalysisOptions::default(), &solver).is_ok());
    }
}
