//! End-to-end tasks on a model file: what to certify ([`Setup`]), running
//! it, rebuilding the problem behind a stored certificate, and validating a
//! certificate against simulation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{
    analyze_fixed_delta, analyze_nominal, analyze_robust, check_residuals, close_loop, label_dims, perf_dims, recover_controller, AnalysisOptions, AnalysisResult,
    Certificate, Controller, Criterion, ResidualReport, Search,
};
use crate::design::{synthesize, synthesize_robust, SynthesisOptions};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, spectral_norm};
use crate::lmi::assemble::{
    assemble_dissipativity, assemble_energy_to_peak, assemble_performance, assemble_robust_performance, assemble_robust_synthesis, assemble_synthesis, EnergyForm, Form,
    Performance, RobustForm, Sharing,
};
use crate::lmi::lfr::{ClosedLoopFamily, OpenLoopFamily};
use crate::lmi::multiplier::MultiplierClass;
use crate::lmi::LmiProblem;
use crate::model::file::Model;
use crate::model::graph::{ConstrainingGraph, EdgeWalk};
use crate::model::system::{l2_index_dims, NodeLabelSystems, PerformanceIndex};
use crate::sdp::{BisectOptions, SdpSolver};
use crate::sim::{check_dissipation, empirical_l2_lb, empirical_peak_lb, random_walk, simulate, spectral_audit, storage_from_certificate, SimOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Analyze,
    Synthesize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    L2,
    Quadratic,
    EnergyToPeak,
}

impl FromStr for CriterionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(CriterionKind::L2),
            "quadratic" => Ok(CriterionKind::Quadratic),
            "energy-to-peak" => Ok(CriterionKind::EnergyToPeak),
            _ => Err(Error::Invalid(format!("unknown criterion '{s}' (expected l2, quadratic or energy-to-peak)"))),
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionKind::L2 => "l2",
            CriterionKind::Quadratic => "quadratic",
            CriterionKind::EnergyToPeak => "energy-to-peak",
        })
    }
}

/// Treatment of the uncertainty channel. Deltas are normalized, so the
/// admissible set is |delta| <= 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mode {
    Nominal,
    Robust,
    FixedDelta(f64),
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Mode::Nominal),
            "robust" => Ok(Mode::Robust),
            _ => {
                let v = s
                    .strip_prefix("fixed-delta:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Invalid(format!("unknown mode '{s}' (expected nominal, robust or fixed-delta:<value>)")))?;
                Ok(Mode::FixedDelta(v))
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Nominal => f.write_str("nominal"),
            Mode::Robust => f.write_str("robust"),
            Mode::FixedDelta(d) => write!(f, "fixed-delta:{d}"),
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> String {
        m.to_string()
    }
}

/// Everything that determines which LMI problem is posed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub task: Task,
    pub criterion: CriterionKind,
    pub mode: Mode,
    pub form: Form,
    /// One slack matrix G for all nodes (analysis).
    #[serde(default)]
    pub shared_g: bool,
    /// One gain for all nodes (synthesis).
    #[serde(default)]
    pub shared_gain: bool,
}

impl Setup {
    pub fn analyze(criterion: CriterionKind, mode: Mode, form: Form) -> Self {
        Setup { task: Task::Analyze, criterion, mode, form, shared_g: false, shared_gain: false }
    }

    pub fn synthesize(criterion: CriterionKind, mode: Mode, form: Form, shared_gain: bool) -> Self {
        Setup { task: Task::Synthesize, criterion, mode, form, shared_g: false, shared_gain }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("setup serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("setup: {e}")))
    }

    fn sharing(&self) -> Sharing {
        if self.shared_g {
            Sharing::shared_g()
        } else {
            Sharing::NONE
        }
    }

    /// Flag and model checks done before any solving.
    pub fn check(&self, model: &Model) -> Result<()> {
        if self.criterion == CriterionKind::Quadratic && model.index.is_none() {
            return Err(Error::Invalid("the quadratic criterion needs an index in the model".into()));
        }
        if self.criterion == CriterionKind::EnergyToPeak {
            if self.task == Task::Synthesize || self.mode == Mode::Robust {
                return Err(Error::Invalid("energy-to-peak is available for nominal and fixed-delta analysis only".into()));
            }
            for (k, s) in model.systems().systems().iter().enumerate() {
                if s.d().iter().any(|&v| v != 0.0) {
                    return Err(Error::Invalid(format!("energy-to-peak needs D = 0, label {} has nonzero feedthrough", k + 1)));
                }
            }
        }
        if self.mode == Mode::Robust && !model.plant.has_uncertainty() {
            return Err(Error::Invalid("robust mode needs an uncertainty channel in the model".into()));
        }
        if matches!(self.mode, Mode::FixedDelta(_)) && !model.plant.has_uncertainty() {
            log::warn!("fixed-delta mode on a model without uncertainty is the nominal analysis");
        }
        if self.shared_g && !self.form.has_slack() {
            return Err(Error::Invalid(format!("a shared G needs a slack form, not {}", self.form.name())));
        }
        match self.task {
            Task::Synthesize => {
                if !model.has_control() {
                    return Err(Error::Invalid("synthesis needs a control channel in the model".into()));
                }
                let ok = match self.mode {
                    Mode::Robust => matches!(self.form, Form::DualSchur | Form::DualSlack),
                    _ => !matches!(self.form, Form::Primal | Form::Dual),
                };
                if !ok {
                    return Err(Error::Invalid(format!("form {} is not available for {} synthesis", self.form.name(), self.mode)));
                }
            }
            Task::Analyze => {
                if self.mode == Mode::Robust && !matches!(self.form, Form::Primal | Form::DualSlack) {
                    return Err(Error::Invalid(format!("robust analysis supports the primal and dual-slack forms, not {}", self.form.name())));
                }
                if self.criterion == CriterionKind::EnergyToPeak && !matches!(self.form, Form::Primal | Form::Slack) {
                    return Err(Error::Invalid("energy-to-peak analysis uses the primal or slack form".into()));
                }
            }
        }
        Ok(())
    }
}

fn criterion<'a>(kind: CriterionKind, model: &'a Model) -> Result<Criterion<'a>> {
    Ok(match kind {
        CriterionKind::L2 => Criterion::L2,
        CriterionKind::EnergyToPeak => Criterion::EnergyToPeak,
        CriterionKind::Quadratic => Criterion::Quadratic(model.index.as_ref().ok_or_else(|| Error::Invalid("model has no index".into()))?),
    })
}

/// The loop to analyze: closed with `ctrl` when given, otherwise with u = 0.
pub fn closed_loop(model: &Model, ctrl: Option<&Controller>) -> Result<ClosedLoopFamily> {
    match ctrl {
        Some(k) => close_loop(&model.plant, k, &model.graph),
        None => {
            let map = model
                .graph
                .node_label_pairs()
                .into_iter()
                .map(|(i, l)| Ok(((i, l), model.plant.get(l).ok_or_else(|| Error::Invalid(format!("label {l} unassigned")))?.lfr.clone())))
                .collect::<Result<_>>()?;
            Ok(ClosedLoopFamily { map, structures: model.plant.structures.clone() })
        }
    }
}

fn multipliers(model: &Model) -> MultiplierClass {
    MultiplierClass::for_structures(&model.plant.structures)
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub search: Search,
    pub bisect: BisectOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { search: Search::Direct, bisect: BisectOptions::default() }
    }
}

/// Result of [`execute`]. For synthesis, `reanalysis` is the primal-form
/// level of the closed loop in the same mode.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub setup: Setup,
    pub analysis: AnalysisResult,
    pub controller: Option<Controller>,
    pub reanalysis: Option<f64>,
}

impl Outcome {
    pub fn certificate(&self) -> Certificate {
        Certificate { setup: Some(self.setup.to_json()), ..self.analysis.certificate() }
    }
}

fn analyze(setup: &Setup, model: &Model, cl: &ClosedLoopFamily, opts: &RunOptions, solver: &dyn SdpSolver) -> Result<AnalysisResult> {
    let g = &model.graph;
    let crit = criterion(setup.criterion, model)?;
    let aopts = AnalysisOptions { form: setup.form, sharing: setup.sharing(), search: opts.search, bisect: opts.bisect };
    match setup.mode {
        Mode::Nominal => analyze_nominal(g, &cl.nominal(), crit, &aopts, solver),
        Mode::FixedDelta(d) => analyze_fixed_delta(g, cl, d, crit, &aopts, solver),
        Mode::Robust => analyze_robust(g, cl, &multipliers(model), crit, &aopts, solver),
    }
}

/// Runs an analysis (of `ctrl`'s loop when given) or a synthesis.
pub fn execute(setup: &Setup, model: &Model, ctrl: Option<&Controller>, opts: &RunOptions, solver: &dyn SdpSolver) -> Result<Outcome> {
    setup.check(model)?;
    let g = &model.graph;
    match setup.task {
        Task::Analyze => {
            let cl = closed_loop(model, ctrl)?;
            let analysis = analyze(setup, model, &cl, opts, solver)?;
            Ok(Outcome { setup: *setup, analysis, controller: ctrl.cloned(), reanalysis: None })
        }
        Task::Synthesize => {
            let crit = criterion(setup.criterion, model)?;
            let sopts = SynthesisOptions { form: setup.form, shared_gain: setup.shared_gain, search: opts.search, bisect: opts.bisect };
            let r = match setup.mode {
                Mode::Nominal => synthesize(g, &model.plant, crit, &sopts, solver)?,
                Mode::FixedDelta(d) => synthesize(g, &model.plant.at_delta(d)?, crit, &sopts, solver)?,
                Mode::Robust => synthesize_robust(g, &model.plant, &multipliers(model), crit, &sopts, solver)?,
            };
            let check = Setup { task: Task::Analyze, form: Form::Primal, shared_g: false, shared_gain: false, ..*setup };
            let cl = closed_loop(model, Some(&r.controller))?;
            let reanalysis = match analyze(&check, model, &cl, &RunOptions { search: Search::Direct, ..*opts }, solver) {
                Ok(a) => a.gamma,
                Err(e) => {
                    log::warn!("closed-loop re-analysis failed: {e}");
                    None
                }
            };
            Ok(Outcome { setup: *setup, analysis: r.analysis, controller: Some(r.controller), reanalysis })
        }
    }
}

/// How a certificate fixes the level: through a level variable, or at its
/// recorded gamma.
enum Level {
    Variable,
    Fixed(f64),
    None,
}

fn level(setup: &Setup, cert: &Certificate) -> Result<Level> {
    let var = match setup.criterion {
        CriterionKind::Quadratic => return Ok(Level::None),
        CriterionKind::L2 => "t",
        CriterionKind::EnergyToPeak => "gamma",
    };
    if cert.matrices.contains_key(var) {
        return Ok(Level::Variable);
    }
    cert.gamma.map(Level::Fixed).ok_or_else(|| Error::Invalid("certificate records no gamma".into()))
}

fn l2_fixed(gamma: f64, dims: &[(usize, usize)]) -> Result<PerformanceIndex> {
    l2_index_dims(gamma, dims)
}

/// Reassembles the problem a certificate was produced for.
pub fn rebuild_problem(model: &Model, cert: &Certificate, ctrl: Option<&Controller>) -> Result<LmiProblem> {
    let setup = Setup::from_json(cert.setup.as_ref().ok_or_else(|| Error::Invalid("certificate has no setup record".into()))?)?;
    let g = &model.graph;
    let lvl = level(&setup, cert)?;
    let quadratic = || model.index.as_ref().ok_or_else(|| Error::Invalid("model has no index".into()));
    match setup.task {
        Task::Analyze => {
            let cl = closed_loop(model, ctrl)?;
            let nominal_problem = |sys: &NodeLabelSystems| -> Result<LmiProblem> {
                match (setup.criterion, &lvl) {
                    (CriterionKind::Quadratic, _) => assemble_performance(g, sys, quadratic()?, setup.form, setup.sharing()),
                    (CriterionKind::L2, Level::Variable) => assemble_dissipativity(g, sys, Performance::L2Level, setup.form, setup.sharing()),
                    (CriterionKind::L2, Level::Fixed(gm)) => assemble_performance(g, sys, &l2_fixed(*gm, &label_dims(g, sys)?)?, setup.form, setup.sharing()),
                    (CriterionKind::EnergyToPeak, l) => {
                        let ef = if setup.form.has_slack() { EnergyForm::Slack } else { EnergyForm::Basic };
                        let gm = if let Level::Fixed(v) = l { Some(*v) } else { None };
                        assemble_energy_to_peak(g, sys, gm, ef)
                    }
                    _ => Err(Error::Invalid("inconsistent certificate level".into())),
                }
            };
            match setup.mode {
                Mode::Nominal => nominal_problem(&cl.nominal()),
                Mode::FixedDelta(d) => nominal_problem(&cl.at_delta(d)?),
                Mode::Robust => {
                    let form = if setup.form == Form::DualSlack { RobustForm::DualSlack } else { RobustForm::Primal };
                    let mult = multipliers(model);
                    match (setup.criterion, lvl) {
                        (CriterionKind::Quadratic, _) => assemble_robust_performance(g, &cl, &mult, Performance::Index(quadratic()?), form, setup.sharing()),
                        (_, Level::Variable) => assemble_robust_performance(g, &cl, &mult, Performance::L2Level, form, setup.sharing()),
                        (_, Level::Fixed(gm)) => assemble_robust_performance(g, &cl, &mult, Performance::Index(&l2_fixed(gm, &perf_dims(g, &cl)?)?), form, setup.sharing()),
                        _ => Err(Error::Invalid("inconsistent certificate level".into())),
                    }
                }
            }
        }
        Task::Synthesize => {
            let open: OpenLoopFamily = match setup.mode {
                Mode::FixedDelta(d) => model.plant.at_delta(d)?,
                _ => model.plant.clone(),
            };
            let dims = label_dims(g, &open.nominal().lfr_family().nominal())?;
            let fixed;
            let p = match (setup.criterion, lvl) {
                (CriterionKind::Quadratic, _) => Some(quadratic()?),
                (_, Level::Fixed(gm)) => {
                    fixed = l2_fixed(gm, &dims)?;
                    Some(&fixed)
                }
                _ => None,
            };
            match (setup.mode, p) {
                (Mode::Robust, Some(p)) => assemble_robust_synthesis(g, &open, &multipliers(model), p, setup.form, setup.shared_gain),
                (Mode::Robust, None) => Err(Error::Invalid("robust synthesis certificates carry a fixed gamma".into())),
                (_, Some(p)) => assemble_synthesis(g, &open.nominal(), Performance::Index(p), setup.form, setup.shared_gain),
                (_, None) => assemble_synthesis(g, &open.nominal(), Performance::L2Level, setup.form, setup.shared_gain),
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub sim: SimOptions,
    /// Random walks for the dissipation audit.
    pub walks: usize,
    pub walk_length: usize,
    /// Depth of the product-norm audit.
    pub depth: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { sim: SimOptions::default(), walks: 100, walk_length: 40, depth: 12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioCheck {
    /// "nominal" or "delta=<value>".
    pub scenario: String,
    pub empirical: Option<f64>,
    pub gamma: Option<f64>,
    pub bound_pass: bool,
    pub min_slack: Option<f64>,
    pub dissipation_pass: bool,
    /// Informational only.
    pub product_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub residuals: Option<ResidualReport>,
    /// Set when the certificate cannot be matched to the rebuilt problem.
    pub residual_error: Option<String>,
    pub scenarios: Vec<ScenarioCheck>,
    pub pass: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "residual check:")?;
        match (&self.residuals, &self.residual_error) {
            (Some(r), _) => writeln!(f, "{r}")?,
            (None, Some(e)) => writeln!(f, "FAIL {e}")?,
            _ => {}
        }
        for s in &self.scenarios {
            let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<16} empirical {:>10} <= gamma {:>10}: {}   min slack {:>12}: {}   product norm {}",
                s.scenario,
                opt(s.empirical),
                opt(s.gamma),
                if s.bound_pass { "PASS" } else { "FAIL" },
                s.min_slack.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into()),
                if s.dissipation_pass { "PASS" } else { "FAIL" },
                opt(s.product_norm),
            )?;
        }
        write!(f, "verdict: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Scenarios covered by a mode: the nominal loop, the fixed delta, or a grid
/// over |delta| <= 1.
pub fn scenarios(mode: Mode) -> Vec<(String, Option<f64>)> {
    match mode {
        Mode::Nominal => vec![("nominal".into(), None)],
        Mode::FixedDelta(d) => vec![(format!("delta={d}"), Some(d))],
        Mode::Robust => [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&d| (format!("delta={d}"), Some(d))).collect(),
    }
}

fn dissipation_audit(g: &ConstrainingGraph, sys: &NodeLabelSystems, cert: &Certificate, p: &PerformanceIndex, opts: &ValidateOptions) -> Result<f64> {
    let storage = storage_from_certificate(cert, g)?;
    let scale_x = storage.values().map(spectral_norm).fold(0.0, f64::max);
    let scale_p = p.blocks().iter().map(|b| max_abs(&b.matrix())).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.sim.seed);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.walks {
        let edges = random_walk(g, opts.walk_length, &mut rng);
        let walk = EdgeWalk::new(g, edges)?;
        let inputs: Vec<Vec<f64>> = walk.edges().iter().map(|&k| sys.map[&(g.edge(k).tail, g.edge(k).label)].inputs()).map(|n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let n = storage.values().next().map(|m| m.nrows()).unwrap_or(0);
        let states = sys.map.values().next().map(|s| s.states()).unwrap_or(n);
        let x0: Vec<f64> = (0..states).map(|_| rng.random_range(-1.0..1.0)).collect();
        let traj = simulate(g, sys, &walk, &x0, &inputs)?;
        let audit = check_dissipation(g, &traj, &storage, p)?;
        // Slack relative to the size of the terms in each step.
        for (t, s) in audit.slacks.iter().enumerate() {
            let mag = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            let size = 1.0 + (scale_x * (mag(&traj.x[t]) + mag(&traj.x[t + 1]))) + scale_p * (mag(&traj.w[t]) + mag(&traj.z[t]));
            worst = worst.min(s / size);
        }
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Residual re-check, empirical gain bounds and dissipation audits per
/// scenario. PASS iff all of them hold; the product-norm audit is reported
/// only.
pub fn validate(model: &Model, cert: &Certificate, ctrl: Option<&Controller>, opts: &ValidateOptions) -> Result<ValidationReport> {
    let setup = Setup::from_json(cert.setup.as_ref().ok_or_else(|| Error::Invalid("certificate has no setup record".into()))?)?;
    let g = &model.graph;
    let recovered;
    let ctrl = match (setup.task, ctrl) {
        (Task::Synthesize, None) => {
            recovered = recover_controller(cert, g)?;
            Some(&recovered)
        }
        (_, c) => c,
    };
    let (residuals, residual_error) = match rebuild_problem(model, cert, ctrl).and_then(|p| check_residuals(cert, &p)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let gamma = match setup.criterion {
        CriterionKind::L2 => cert.gamma,
        CriterionKind::EnergyToPeak => cert.gamma,
        CriterionKind::Quadratic => None,
    };
    let cl = closed_loop(model, ctrl)?;
    let mut checks = Vec::new();
    for (name, delta) in scenarios(setup.mode) {
        let sys = match delta {
            None => cl.nominal(),
            Some(d) => cl.at_delta(d)?,
        };
        let empirical = match (gamma, setup.criterion) {
            (Some(_), CriterionKind::L2) => Some(empirical_l2_lb(g, &sys, &opts.sim)?.value),
            (Some(_), CriterionKind::EnergyToPeak) => Some(empirical_peak_lb(g, &sys, &opts.sim)?.value),
            _ => None,
        };
        let bound_pass = match (empirical, gamma) {
            (Some(e), Some(gm)) => e <= gm + 1e-6 * gm.max(1.0),
            _ => true,
        };
        let index = match setup.criterion {
            CriterionKind::L2 => gamma.map(|gm| l2_index_dims(gm, &label_dims(g, &sys)?)).transpose()?,
            CriterionKind::Quadratic => model.index.clone(),
            CriterionKind::EnergyToPeak => None,
        };
        let min_slack = match &index {
            Some(p) => Some(dissipation_audit(g, &sys, cert, p, opts)?),
            None => None,
        };
        let dissipation_pass = min_slack.is_none_or(|s| s >= -1e-9);
        let product_norm = spectral_audit(g, &sys, opts.depth).ok();
        checks.push(ScenarioCheck { scenario: name, empirical, gamma, bound_pass, min_slack, dissipation_pass, product_norm });
    }
    let pass = residuals.as_ref().is_some_and(|r| r.pass) && checks.iter().all(|c| c.bound_pass && c.dissipation_pass);
    Ok(ValidationReport { residuals, residual_error, scenarios: checks, pass })
}

/// Certified level of the loop at each delta (normalized), in the given
/// analysis setup with `mode` replaced per row. Rows run on up to `jobs`
/// threads and come back in input order.
pub fn sweep_delta(
    setup: &Setup,
    model: &Model,
    ctrl: Option<&Controller>,
    deltas: &[f64],
    opts: &RunOptions,
    solver: &dyn SdpSolver,
    jobs: usize,
) -> Vec<(f64, Result<Option<f64>>)> {
    let jobs = jobs.max(1).min(deltas.len().max(1));
    let mut out: BTreeMap<usize, (f64, Result<Option<f64>>)> = BTreeMap::new();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|h| {
                s.spawn(move || {
                    (h..deltas.len())
                        .step_by(jobs)
                        .map(|k| {
                            let row = Setup { task: Task::Analyze, mode: Mode::FixedDelta(deltas[k]), ..*setup };
                            (k, (deltas[k], execute(&row, model, ctrl, opts, solver).map(|o| o.analysis.gamma)))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("sweep thread panicked"));
        }
    });
    out.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_strings() {
        assert_eq!("fixed-delta:0.2".parse::<Mode>().unwrap(), Mode::FixedDelta(0.2));
        assert_eq!(Mode::Robust.to_string(), "robust");
        assert!("fixed-delta:x".parse::<Mode>().is_err());
        let s = Setup::synthesize(CriterionKind::L2, Mode::FixedDelta(-0.5), Form::DualSlack, true);
        assert_eq!(Setup::from_json(&s.to_json()).unwrap(), s);
    }
}
