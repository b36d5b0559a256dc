//! Embedded interior-point path (Clarabel).

use std::sync::Once;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{ConicProgram, SdpSolver, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::svec;

#[derive(Clone, Debug)]
pub struct NativeSolver {
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for NativeSolver {
    fn default() -> Self {
        NativeSolver { max_iter: 500, verbose: false }
    }
}

/// Builds b and A for s = b - A x in the product of packed PSD cones.
fn conic_data(p: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let mut b = Vec::new();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars];
    let mut cones = Vec::with_capacity(p.cones.len());
    for c in &p.cones {
        let off = b.len();
        b.extend(svec(&c.f0));
        for (k, f) in &c.coeffs {
            for (r, v) in svec(f).into_iter().enumerate() {
                if v != 0.0 {
                    cols[*k].push((off + r, -v));
                }
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(c.dim()));
    }
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for col in &mut cols {
        col.sort_by_key(|e| e.0);
        for &(r, v) in col.iter() {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    (CscMatrix::new(b.len(), p.num_vars, colptr, rowval, nzval), b, cones)
}

impl SdpSolver for NativeSolver {
    fn name(&self) -> String {
        "native".into()
    }

    fn solve(&self, p: &ConicProgram) -> Result<SolveResult> {
        // Clarabel can panic when an eigen-decomposition of an iterate fails;
        // retry once without equilibration and report a numerical failure
        // if that also fails.
        silence_solver_panics();
        for equilibrate in [true, false] {
            match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| self.run(p, equilibrate))) {
                Ok(r) => return r,
                Err(_) => log::warn!("native solver aborted (equilibration {equilibrate})"),
            }
        }
        Ok(SolveResult::failed(SolveStatus::NumericalFailure, 0))
    }
}

/// Panics raised inside Clarabel are caught and reported as solver
/// failures, so their default panic message is suppressed. Other panics
/// reach the previous hook unchanged.
fn silence_solver_panics() {
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let previous = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if info.location().is_some_and(|l| l.file().contains("clarabel")) {
                return;
            }
            previous(info)
        }));
    });
}

impl NativeSolver {
    fn run(&self, p: &ConicProgram, equilibrate: bool) -> Result<SolveResult> {
        let (a, b, cones) = conic_data(p);
        let pm = CscMatrix::zeros((p.num_vars, p.num_vars));
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .equilibrate_enable(equilibrate)
            .build()
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&pm, &p.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalFailure,
        };
        if status != SolveStatus::Optimal {
            log::debug!("native solver: {:?} after {} iterations", sol.status, sol.iterations);
            return Ok(SolveResult::failed(status, sol.iterations));
        }
        let x = sol.x.clone();
        Ok(SolveResult {
            status,
            residual: p.max_residual(&x),
            objective: Some(p.objective.iter().zip(&x).map(|(c, v)| c * v).sum()),
            x: Some(x),
            iterations: sol.iterations,
        })
    }
}
