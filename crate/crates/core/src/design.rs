//! State-feedback synthesis: solve, recover the gains, re-certify the
//! closed loop.

use crate::certify::{close_loop, label_dims, recover_controller, solve_feasibility, solve_level, AnalysisResult, Certificate, Controller, Criterion, Search};
use crate::error::{Error, Result};
use crate::lmi::assemble::{assemble_robust_synthesis, assemble_synthesis, Form, Performance};
use crate::lmi::lfr::{ClosedLoopFamily, OpenLoopFamily};
use crate::lmi::multiplier::MultiplierClass;
use crate::model::graph::ConstrainingGraph;
use crate::model::system::l2_index_dims;
use crate::sdp::{BisectOptions, SdpSolver};

#[derive(Clone, Copy, Debug)]
pub struct SynthesisOptions {
    /// One of schur, slack, dual-schur, dual-slack.
    pub form: Form,
    /// A single gain for all nodes.
    pub shared_gain: bool,
    pub search: Search,
    pub bisect: BisectOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { form: Form::DualSlack, shared_gain: false, search: Search::Direct, bisect: BisectOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub controller: Controller,
    pub analysis: AnalysisResult,
}

impl SynthesisResult {
    pub fn gamma(&self) -> Option<f64> {
        self.analysis.gamma
    }

    pub fn certificate(&self) -> Certificate {
        self.analysis.certificate()
    }

    pub fn close(&self, open: &OpenLoopFamily, g: &ConstrainingGraph) -> Result<ClosedLoopFamily> {
        close_loop(open, &self.controller, g)
    }
}

fn finish(g: &ConstrainingGraph, analysis: AnalysisResult) -> Result<SynthesisResult> {
    let controller = recover_controller(&analysis.certificate(), g)?;
    Ok(SynthesisResult { controller, analysis })
}

fn perf_label_dims(open: &OpenLoopFamily, g: &ConstrainingGraph) -> Result<Vec<(usize, usize)>> {
    label_dims(g, &open.nominal().lfr_family().nominal())
}

/// Nominal synthesis; the uncertainty channel of `open` is ignored.
pub fn synthesize(g: &ConstrainingGraph, open: &OpenLoopFamily, crit: Criterion, opts: &SynthesisOptions, solver: &dyn SdpSolver) -> Result<SynthesisResult> {
    let nominal = open.nominal();
    let analysis = match crit {
        Criterion::Quadratic(p) => solve_feasibility(assemble_synthesis(g, &nominal, Performance::Index(p), opts.form, opts.shared_gain)?, solver)?,
        Criterion::L2 => {
            let dims = perf_label_dims(open, g)?;
            let direct = match (opts.search, opts.form) {
                (Search::Direct, Form::Schur | Form::Slack) => Some(assemble_synthesis(g, &nominal, Performance::L2Level, opts.form, opts.shared_gain)?),
                _ => None,
            };
            let fixed = |gm: f64| {
                let p = l2_index_dims(gm, &dims)?;
                assemble_synthesis(g, &nominal, Performance::Index(&p), opts.form, opts.shared_gain)
            };
            solve_level(direct, "t", |t| t.max(0.0).sqrt(), fixed, solver, opts.bisect)?
        }
        Criterion::EnergyToPeak => return Err(Error::Invalid("energy-to-peak synthesis is not available".into())),
    };
    finish(g, analysis)
}

/// Robust synthesis with inverse multipliers; bisects on gamma for the l2
/// criterion.
pub fn synthesize_robust(
    g: &ConstrainingGraph,
    open: &OpenLoopFamily,
    mult: &MultiplierClass,
    crit: Criterion,
    opts: &SynthesisOptions,
    solver: &dyn SdpSolver,
) -> Result<SynthesisResult> {
    let analysis = match crit {
        Criterion::Quadratic(p) => solve_feasibility(assemble_robust_synthesis(g, open, mult, p, opts.form, opts.shared_gain)?, solver)?,
        Criterion::L2 => {
            let dims = perf_label_dims(open, g)?;
            let fixed = |gm: f64| {
                let p = l2_index_dims(gm, &dims)?;
                assemble_robust_synthesis(g, open, mult, &p, opts.form, opts.shared_gain)
            };
            solve_level(None, "t", |t| t, fixed, solver, opts.bisect)?
        }
        Criterion::EnergyToPeak => return Err(Error::Invalid("energy-to-peak synthesis is not available".into())),
    };
    finish(g, analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{analyze_nominal, AnalysisOptions};
    use crate::linalg::Mat;
    use crate::lmi::lfr::{LfrSystem, OpenLoopSystem, UncertaintyStructure};
    use crate::model::system::StateSpace;
    use crate::sdp::NativeSolver;

    /// x+ = 2x + w + u, z = x: the gain -2 gives x+ = w, l2 gain 1, which
    /// is optimal since z_k = w_{k-1} for every gain.
    #[test]
    fn deadbeat_scalar() {
        let g = ConstrainingGraph::self_loops(1);
        let lfr = LfrSystem::from_nominal(&StateSpace::scalar(2.0, 1.0, 1.0, 0.0));
        let one = Mat::from_element(1, 1, 1.0);
        let open = OpenLoopFamily::new(vec![OpenLoopSystem::new(lfr, one, Mat::zeros(0, 1), Mat::zeros(1, 1)).unwrap()], vec![UncertaintyStructure::RepeatedScalar]).unwrap();
        let solver = NativeSolver::default();
        for form in [Form::Schur, Form::Slack, Form::DualSchur, Form::DualSlack] {
            let opts = SynthesisOptions { form, shared_gain: true, ..Default::default() };
            let r = synthesize(&g, &open, Criterion::L2, &opts, &solver).unwrap();
            assert!((r.gamma().unwrap() - 1.0).abs() < 2e-3, "{form:?}: {:?}", r.gamma());
            let cl = r.close(&open, &g).unwrap();
            let check = analyze_nominal(&g, &cl.nominal(), Criterion::L2, &AnalysisOptions::default(), &solver).unwrap();
            assert!(check.gamma.unwrap() <= r.gamma().unwrap() * (1.0 + 1e-3));
        }
    }
}
