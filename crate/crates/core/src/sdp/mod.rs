//! Conic lowering of LMI problems, the embedded and file-based solver paths,
//! and bisection on the performance level.

mod bisect;
mod native;
mod sdpa;

use serde::{Deserialize, Serialize};

pub use bisect::{bisect_gamma, BisectOptions, BisectionStep, BisectionTrace};
pub use native::NativeSolver;
pub use sdpa::{emit_sdpa, read_sdpa_solution, write_sdpa, SdpaSolver};

use crate::error::{Error, Result};
use crate::linalg::{eye, min_eig, Mat};
use crate::lmi::LmiProblem;

/// One semidefinite constraint F0 + sum_k x_k F_k >= 0, already signed and
/// shifted by its strictness margin.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeConstraint {
    pub name: String,
    pub f0: Mat,
    pub coeffs: Vec<(usize, Mat)>,
}

impl ConeConstraint {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut m = self.f0.clone();
        for (k, c) in &self.coeffs {
            m += c * x[*k];
        }
        m
    }
}

/// Packed-variable semidefinite program: minimize c'x subject to the cones.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub cones: Vec<ConeConstraint>,
}

impl ConicProgram {
    /// Largest violation max(0, -lambda_min) over all cones.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.cones.iter().map(|c| (-min_eig(&c.eval(x))).max(0.0)).fold(0.0, f64::max)
    }
}

/// Lowers an LMI problem. Strict blocks become sgn F - eps_s I >= 0,
/// semidefinite blocks sgn F >= 0.
pub fn lower(prob: &LmiProblem) -> Result<ConicProgram> {
    if prob.blocks.is_empty() {
        return Err(Error::Invalid("empty constraint list".into()));
    }
    let n = prob.vars.len();
    let mut objective = vec![0.0; n];
    if let Some(obj) = &prob.objective {
        for &(k, c) in obj {
            objective[k] += c;
        }
    }
    let cones = prob
        .blocks
        .iter()
        .map(|b| {
            let s = b.sense.sign();
            let d = b.dim();
            let shift = if b.sense.is_strict() { b.margin } else { 0.0 };
            let f0 = b.expr.constant_part() * s - eye(d) * shift;
            let coeffs = b
                .expr
                .terms()
                .iter()
                .map(|(&k, c)| {
                    if k >= n {
                        return Err(Error::Invalid(format!("block {} references unknown variable {k}", b.name)));
                    }
                    Ok((k, c * s))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConeConstraint { name: b.name.clone(), f0, coeffs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConicProgram { num_vars: n, objective, cones })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
    BracketExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Variable values; present iff the status is optimal.
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Largest primal cone violation at the returned point.
    pub residual: f64,
    pub iterations: u32,
}

impl SolveResult {
    pub fn failed(status: SolveStatus, iterations: u32) -> Self {
        SolveResult { status, x: None, objective: None, residual: f64::INFINITY, iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// A semidefinite solver. Implementations are reentrant.
pub trait SdpSolver: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, p: &ConicProgram) -> Result<SolveResult>;
}

/// Solver chosen by a spec string: "native" or "sdpa:<command>".
pub fn solver_from_spec(spec: &str) -> Result<Box<dyn SdpSolver>> {
    match spec.trim() {
        "" | "native" => Ok(Box::new(NativeSolver::default())),
        s => match s.strip_prefix("sdpa:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(SdpaSolver::new(cmd.trim()))),
            _ => Err(Error::Invalid(format!("unknown solver '{s}' (expected native or sdpa:<command>)"))),
        },
    }
}

/// Solver selected by `CSLS_SDP_SOLVER`, defaulting to the native path.
pub fn solver_from_env() -> Result<Box<dyn SdpSolver>> {
    solver_from_spec(&std::env::var("CSLS_SDP_SOLVER").unwrap_or_default())
}

/// Outcome of solving an LMI problem and re-checking the returned point.
#[derive(Clone, Debug)]
pub struct LmiSolution {
    pub result: SolveResult,
    /// True iff the result is optimal and every block passes its threshold.
    pub certified: bool,
}

impl LmiSolution {
    pub fn x(&self) -> Option<&[f64]> {
        self.result.x.as_deref()
    }
}

pub fn solve_lmi(prob: &LmiProblem, solver: &dyn SdpSolver) -> Result<LmiSolution> {
    let cp = lower(prob)?;
    let result = solver.solve(&cp)?;
    let certified = result.x.as_deref().map(|x| result.is_optimal() && prob.certify(x)).unwrap_or(false);
    log::debug!(
        "{}: {} vars, {} cones, status {:?}, residual {:.2e}, certified {certified}",
        prob.form,
        cp.num_vars,
        cp.cones.len(),
        result.status,
        result.residual
    );
    Ok(LmiSolution { result, certified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{AffineExpr, BlockTag, LmiBlock, Sense};

    /// X > 0 and a X - X < 0 for a scalar X.
    pub(crate) fn scalar_lyapunov(a2: f64) -> LmiProblem {
        let mut p = LmiProblem::new("lyapunov");
        let id = p.vars.symmetric("X", 1);
        let x = p.vars.expr(id);
        p.push(LmiBlock::new("X > 0", x.clone(), Sense::PositiveDefinite, BlockTag::Global, 1e-7).unwrap());
        p.push(LmiBlock::new("lyap", &x.scale(a2) - &x, Sense::NegativeDefinite, BlockTag::Global, 1e-7).unwrap());
        p
    }

    #[test]
    fn lowering_bookkeeping() {
        let mut p = LmiProblem::new("t");
        let id = p.vars.scalar("x");
        let x = p.vars.expr(id);
        let e = &x - &AffineExpr::identity(1);
        p.push(LmiBlock::new("x >= 1", e, Sense::PositiveSemidefinite, BlockTag::Global, 1e-7).unwrap());
        p.minimize(id);
        let cp = lower(&p).unwrap();
        assert_eq!((cp.num_vars, cp.cones.len(), cp.cones[0].dim()), (1, 1, 1));
        assert_eq!(cp.cones[0].f0[(0, 0)], -1.0);
        let r = NativeSolver::default().solve(&cp).unwrap();
        assert!((r.x.unwrap()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_lyapunov_verdicts() {
        let s = NativeSolver::default();
        let ok = solve_lmi(&scalar_lyapunov(0.25), &s).unwrap();
        assert!(ok.result.is_optimal() && ok.certified);
        let bad = solve_lmi(&scalar_lyapunov(1.0), &s).unwrap();
        assert!(!bad.certified);
        assert_eq!(bad.result.status, SolveStatus::Infeasible);
    }

    #[test]
    fn empty_program_rejected() {
        assert!(lower(&LmiProblem::new("empty")).is_err());
    }

    #[test]
    fn solver_specs() {
        assert_eq!(solver_from_spec("native").unwrap().name(), "native");
        assert!(solver_from_spec("sdpa:csdp").unwrap().name().contains("csdp"));
        assert!(solver_from_spec("mosek").is_err());
    }
}
