//! The SDPA file path, driven by a small cvxpy script. Skipped when python3
//! or cvxpy is unavailable.

use std::path::PathBuf;
use std::process::Command;

use csls::certify::{analyze_nominal, AnalysisOptions, Criterion, Search};
use csls::lmi::Form;
use csls::model::{ConstrainingGraph, StateSpace, SystemFamily};
use csls::sdp::{solver_from_spec, BisectOptions, NativeSolver};

fn driver() -> Option<String> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/support/sdpa_cvxpy.py");
    let ok = Command::new("python3").args(["-c", "import cvxpy"]).output().map(|o| o.status.success()).unwrap_or(false);
    if !ok {
        eprintln!("skipping: python3 with cvxpy not found");
        return None;
    }
    Some(format!("sdpa:python3 {}", script.display()))
}

#[test]
fn external_solver_matches_native() {
    let Some(spec) = driver() else { return };
    let solver = solver_from_spec(&spec).unwrap();
    let g = ConstrainingGraph::from_triples(&[(1, 1, 1), (1, 2, 2), (2, 1, 1)], 2).unwrap();
    let f = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0), StateSpace::scalar(-0.3, 1.0, 2.0, 0.1)]).unwrap();
    // Direct level minimization, then a coarse bisection (each external
    // solve starts a python process).
    let cases = [(Form::Primal, Search::Direct, 1e-4), (Form::DualSlack, Search::Bisect, 1e-2)];
    for (form, search, tol) in cases {
        let opts = AnalysisOptions { form, search, bisect: BisectOptions { rel_tol: tol, ..Default::default() }, ..Default::default() };
        let ext = analyze_nominal(&g, &f, Criterion::L2, &opts, solver.as_ref()).unwrap();
        let nat = analyze_nominal(&g, &f, Criterion::L2, &opts, &NativeSolver::default()).unwrap();
        let (a, b) = (ext.gamma.unwrap(), nat.gamma.unwrap());
        assert!((a - b).abs() <= 2.0 * tol * b, "{form:?}: external {a}, native {b}");
        assert!(ext.residuals().pass);
    }
}

#[test]
fn missing_external_command_is_a_solver_error() {
    let solver = solver_from_spec("sdpa:/nonexistent/sdpa-binary").unwrap();
    let g = ConstrainingGraph::self_loops(1);
    let f = SystemFamily::new(vec![StateSpace::scalar(0.5, 1.0, 1.0, 0.0)]).unwrap();
    let err = analyze_nominal(&g, &f, Criterion::L2, &AnalysisOptions::default(), solver.as_ref()).unwrap_err();
    assert!(matches!(err, csls::Error::Solver(_)), "{err}");
}
