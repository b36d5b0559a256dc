//! Bisection on the performance level gamma.

use serde::Serialize;

use super::{solve_lmi, SdpSolver};
use crate::error::{Error, Result};
use crate::lmi::LmiProblem;

#[derive(Clone, Copy, Debug)]
pub struct BisectOptions {
    /// Lower end of the bracket (assumed infeasible unless tested feasible).
    pub lo: f64,
    /// First upper endpoint to try; multiplied by 10 until feasible.
    pub hint: f64,
    /// Give up when no feasible level is found up to this value.
    pub max: f64,
    /// Relative gap (hi - lo) / hi at which to stop.
    pub rel_tol: f64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions { lo: 1e-3, hint: 10.0, max: 1e6, rel_tol: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub feasible: bool,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct BisectionTrace {
    pub steps: Vec<BisectionStep>,
    /// Smallest level with a certified solution.
    pub gamma: f64,
    /// Problem and solution at `gamma`.
    pub problem: LmiProblem,
    pub x: Vec<f64>,
}

impl BisectionTrace {
    /// Every infeasible level lies below every feasible one.
    pub fn is_monotone(&self) -> bool {
        self.violation().is_none()
    }

    fn violation(&self) -> Option<(f64, f64)> {
        let min_feas = self.steps.iter().filter(|s| s.feasible).map(|s| s.gamma).fold(f64::INFINITY, f64::min);
        self.steps
            .iter()
            .filter(|s| !s.feasible && s.gamma >= min_feas)
            .map(|s| (min_feas, s.gamma))
            .next()
    }
}

struct Probe<'a, F> {
    assemble: F,
    solver: &'a dyn SdpSolver,
    steps: Vec<BisectionStep>,
    best: Option<(f64, LmiProblem, Vec<f64>)>,
}

impl<F: Fn(f64) -> Result<LmiProblem>> Probe<'_, F> {
    fn test(&mut self, gamma: f64) -> Result<bool> {
        let prob = (self.assemble)(gamma)?;
        let sol = solve_lmi(&prob, self.solver)?;
        let feasible = sol.certified;
        log::info!("gamma = {gamma:.6}: {}", if feasible { "feasible" } else { "infeasible" });
        self.steps.push(BisectionStep { gamma, feasible, residual: sol.result.residual });
        if feasible && self.best.as_ref().is_none_or(|b| gamma < b.0) {
            self.best = Some((gamma, prob, sol.result.x.unwrap_or_default()));
        }
        Ok(feasible)
    }
}

/// Smallest certified gamma for a family of problems assumed monotone in
/// gamma. A step is feasible iff the solver reports optimal and the point
/// passes certification.
pub fn bisect_gamma(assemble: impl Fn(f64) -> Result<LmiProblem>, solver: &dyn SdpSolver, opts: BisectOptions) -> Result<BisectionTrace> {
    let mut p = Probe { assemble, solver, steps: Vec::new(), best: None };
    let mut hi = opts.hint.max(opts.lo);
    while !p.test(hi)? {
        if hi >= opts.max {
            return Err(Error::InfeasibleAtBracket(opts.max));
        }
        hi = (hi * 10.0).min(opts.max);
    }
    let mut lo = opts.lo;
    if p.test(lo)? {
        hi = lo;
    }
    while (hi - lo) / hi > opts.rel_tol {
        let mid = if hi / lo > 4.0 { (hi * lo).sqrt() } else { 0.5 * (hi + lo) };
        if p.test(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (gamma, problem, x) = p.best.expect("feasible endpoint recorded");
    let trace = BisectionTrace { steps: p.steps, gamma, problem, x };
    if let Some((feasible, infeasible)) = trace.violation() {
        return Err(Error::NonMonotone { feasible, infeasible });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::assemble::{assemble_performance, Sharing};
    use crate::lmi::Form;
    use crate::model::system::{l2_index, StateSpace, SystemFamily};
    use crate::model::ConstrainingGraph;
    use crate::sdp::NativeSolver;

    #[test]
    fn scalar_l2_gain_is_two() {
        let g = ConstrainingGraph::self_loops(1);
        let f = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap();
        let solver = NativeSolver::default();
        let tr = bisect_gamma(|gm| assemble_performance(&g, &f, &l2_index(gm, &f)?, Form::Slack, Sharing::NONE), &solver, BisectOptions::default()).unwrap();
        assert!((tr.gamma - 2.0).abs() < 1e-3, "{}", tr.gamma);
        assert!(tr.is_monotone());
        assert!(tr.problem.certify(&tr.x));
    }

    #[test]
    fn unstable_system_exceeds_bracket() {
        let g = ConstrainingGraph::self_loops(1);
        let f = SystemFamily::new(vec![StateSpace::scalar(1.5, 1.0, 1.0, 0.0)]).unwrap();
        let solver = NativeSolver::default();
        let opts = BisectOptions { max: 1e3, ..Default::default() };
        let err = bisect_gamma(|gm| assemble_performance(&g, &f, &l2_index(gm, &f)?, Form::Primal, Sharing::NONE), &solver, opts).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAtBracket(_)));
    }
}
