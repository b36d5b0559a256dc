//! `csls`: compile weakly-hard constraints into models, certify and
//! synthesize, validate certificates against simulation, sweep fixed deltas.
//!
//! Exit codes: 0 success, 2 infeasible, 3 validation failure, 4 input error,
//! 5 solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use csls::certify::{Certificate, Controller, Search};
use csls::linalg::{from_rows, to_rows};
use csls::lmi::Form;
use csls::model::{IndexBlock, Model};
use csls::pipeline::{execute, scenarios, sweep_delta, validate, CriterionKind, Mode, Outcome, RunOptions, Setup, ValidateOptions};
use csls::sdp::{solver_from_env, solver_from_spec, BisectOptions, SdpSolver};
use csls::sim::{empirical_l2_lb, simulate, SimOptions};
use csls::whrt::{compile_model, lift, BasePlant, Strategy, WhrtConstraint};
use csls::Error;

#[derive(Parser)]
#[command(name = "csls", version, about = "Certified analysis and synthesis for constrained switched linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile "whrt:<k>/<n>:<zero|hold>" and a base plant into a model file.
    CompileWhrt(CompileArgs),
    /// Print the lifted matrices of a base plant for one label.
    Lift(LiftArgs),
    /// Certify a level (or feasibility) for a model, optionally closed with a controller.
    Analyze(RunArgs),
    /// Synthesize a state-feedback controller.
    Synthesize(RunArgs),
    /// Re-check a certificate and compare it with simulation.
    Validate(ValidateArgs),
    /// Certified level per fixed delta.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Constraint string, e.g. whrt:2/3:zero.
    #[arg(long)]
    constraint: String,
    /// Base plant file, or "example" / "example:<radius>" for the built-in plant.
    #[arg(long)]
    plant: String,
    /// Base index file {Q, S, R}, lifted per label.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Overrides the strategy of the constraint string.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    plant: String,
    #[arg(long)]
    label: usize,
    #[arg(long, default_value = "zero")]
    strategy: Strategy,
    /// Output file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    /// Controller file closing the loop (analysis and validation).
    #[arg(long)]
    controller: Option<PathBuf>,
    /// Solver: "native" or "sdpa:<command>"; defaults to CSLS_SDP_SOLVER.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory for reports and artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// l2, quadratic or energy-to-peak.
    #[arg(long, default_value = "l2")]
    criterion: CriterionKind,
    /// nominal, robust or fixed-delta:<value>.
    #[arg(long, default_value = "nominal")]
    mode: String,
    /// primal, schur, slack, dual, dual-schur or dual-slack.
    #[arg(long)]
    form: Option<String>,
    /// One gain for every node (synthesis).
    #[arg(long)]
    shared_gain: bool,
    /// One slack matrix G for every node (analysis, slack forms).
    #[arg(long)]
    shared_g: bool,
    /// Always bisect on gamma instead of minimizing the level directly.
    #[arg(long)]
    bisect: bool,
    /// Relative bisection tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 16)]
    trials: usize,
    /// Writes the worst sampled trajectory of the first scenario as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// a:b:step
    #[arg(long)]
    sweep_delta: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "l2")]
    criterion: CriterionKind,
    #[arg(long, default_value = "primal")]
    form: String,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

/// Failure with an exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible | Error::InfeasibleAtBracket(_) => 2,
            Error::Solver(_) | Error::NonMonotone { .. } | Error::IllConditioned { .. } => 5,
            _ => 4,
        };
        Fail { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail { code: 4, msg: e.to_string() }
    }
}

fn input(msg: impl Into<String>) -> Fail {
    Fail { code: 4, msg: msg.into() }
}

type Res<T> = std::result::Result<T, Fail>;

fn read_json(path: &Path) -> Res<Value> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Res<()> {
    fs::write(path, serde_json::to_string_pretty(v).expect("json") + "\n")?;
    Ok(())
}

fn load_plant(spec: &str) -> Res<BasePlant> {
    match spec.strip_prefix("example") {
        Some("") => Ok(BasePlant::example(None)),
        Some(r) => {
            let radius = r.strip_prefix(':').and_then(|r| r.parse::<f64>().ok()).ok_or_else(|| input(format!("bad plant spec '{spec}'")))?;
            Ok(BasePlant::example(Some(radius)))
        }
        None => Ok(BasePlant::from_json(&read_json(Path::new(spec))?)?),
    }
}

fn solver(spec: &Option<String>) -> Res<Box<dyn SdpSolver>> {
    Ok(match spec {
        Some(s) => solver_from_spec(s)?,
        None => solver_from_env()?,
    })
}

fn load_controller(path: &Option<PathBuf>) -> Res<Option<Controller>> {
    path.as_ref().map(|p| Controller::from_json(&read_json(p)?).map_err(Fail::from)).transpose()
}

/// Radius of the model's uncertainty, used to read deltas in plant units.
fn radius(model: &Model) -> Option<f64> {
    model.whrt.as_ref()?.get("radius")?.as_f64().filter(|r| *r > 0.0)
}

fn normalize(model: &Model, delta: f64) -> f64 {
    radius(model).map_or(delta, |r| delta / r)
}

fn physical(model: &Model, delta: f64) -> f64 {
    radius(model).map_or(delta, |r| delta * r)
}

fn parse_mode(model: &Model, s: &str) -> Res<Mode> {
    Ok(match s.parse::<Mode>()? {
        Mode::FixedDelta(d) => Mode::FixedDelta(normalize(model, d)),
        m => m,
    })
}

fn describe_mode(model: &Model, m: Mode) -> String {
    match m {
        Mode::FixedDelta(d) => format!("fixed-delta:{} (normalized {d})", fmt_num(physical(model, d))),
        m => m.to_string(),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{}", (v * 1e12).round() / 1e12)
}

fn cmd_compile(a: &CompileArgs) -> Res<()> {
    let mut c = WhrtConstraint::parse(&a.constraint)?;
    if let Some(s) = a.strategy {
        c.strategy = s;
    }
    let plant = load_plant(&a.plant)?;
    let index = match &a.index {
        Some(p) => {
            let v = read_json(p)?;
            let get = |k: &str| -> Res<csls::linalg::Mat> {
                let rows: Vec<Vec<f64>> = serde_json::from_value(v.get(k).cloned().ok_or_else(|| input(format!("index file lacks {k}")))?).map_err(|e| input(e.to_string()))?;
                Ok(from_rows(&rows, None)?)
            };
            Some(IndexBlock::new(get("Q")?, get("S")?, get("R")?)?)
        }
        None => None,
    };
    let model = compile_model(&c, &plant, index.as_ref())?;
    model.save(&a.out)?;
    let mut text = format!("constraint {c}\ngraph: {} nodes, {} labels\n", model.graph.nodes().len(), model.graph.num_labels());
    for e in model.graph.edges() {
        text += &format!("  {e}\n");
    }
    text += &format!("model written to {}\n", a.out.display());
    emit(&text);
    Ok(())
}

fn cmd_lift(a: &LiftArgs) -> Res<()> {
    let plant = load_plant(&a.plant)?;
    let l = lift(&plant, a.label, a.strategy)?;
    let v = json!({
        "label": a.label,
        "strategy": a.strategy,
        "A": to_rows(&l.a), "Bw": to_rows(&l.b_w), "Bu": to_rows(&l.b_u),
        "C": to_rows(&l.c), "Dw": to_rows(&l.d_w), "Du": to_rows(&l.d_u),
    });
    match &a.out {
        Some(p) => write_json(p, &v)?,
        None => emit(&(serde_json::to_string_pretty(&v).expect("json") + "\n")),
    }
    Ok(())
}

fn default_form(synth: bool) -> Form {
    if synth {
        Form::DualSlack
    } else {
        Form::Primal
    }
}

fn run_report(model: &Model, o: &Outcome) -> (String, Value) {
    let mut text = String::new();
    let s = &o.setup;
    let task = match s.task {
        csls::pipeline::Task::Analyze => "analyze",
        csls::pipeline::Task::Synthesize => "synthesize",
    };
    text += &format!("task: {task}\ncriterion: {}\nmode: {}\nform: {}\n", s.criterion, describe_mode(model, s.mode), s.form.name());
    if s.shared_gain {
        text += "shared gain\n";
    }
    if s.shared_g {
        text += "shared G\n";
    }
    match o.analysis.gamma {
        Some(g) => text += &format!("certified gamma: {g:.6}\n"),
        None => text += "feasible\n",
    }
    if !o.analysis.steps.is_empty() {
        text += "bisection:\n";
        for st in &o.analysis.steps {
            text += &format!("  gamma {:>14.6}  {}\n", st.gamma, if st.feasible { "feasible" } else { "infeasible" });
        }
    }
    if let (Some(k), s) = (&o.controller, s.task) {
        if s == csls::pipeline::Task::Synthesize {
            text += &format!("controller: {k}\n");
        }
    }
    if let Some(r) = o.reanalysis {
        text += &format!("closed-loop re-analysis (primal): {r:.6}\n");
    }
    let res = o.analysis.residuals();
    text += &format!("residuals:\n{res}\n");
    let side = json!({
        "setup": s.to_json(),
        "gamma": o.analysis.gamma,
        "bisection": o.analysis.steps,
        "controller": o.controller.as_ref().map(|k| k.to_json()),
        "reanalysis": o.reanalysis,
        "residuals": res,
    });
    (text, side)
}

fn finish_report(dir: &Path, name: &str, text: &str, side: &Value) -> Res<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{name}.txt")), text)?;
    write_json(&dir.join(format!("{name}.json")), side)?;
    emit(text);
    Ok(())
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn load_model(path: &Path) -> Res<Model> {
    Model::load(path).map_err(|e| Fail { msg: format!("{}: {}", path.display(), Fail::from(e).msg), code: 4 })
}

fn cmd_run(a: &RunArgs, synth: bool) -> Res<()> {
    let model = load_model(&a.common.model)?;
    let mode = parse_mode(&model, &a.mode)?;
    let form = match &a.form {
        Some(f) => Form::parse(f)?,
        None => default_form(synth),
    };
    if a.shared_gain && !synth {
        return Err(input("--shared-gain applies to synthesis"));
    }
    if !(a.tol > 0.0 && a.tol < 1.0) {
        return Err(input("--tol must lie in (0, 1)"));
    }
    let setup = if synth {
        Setup::synthesize(a.criterion, mode, form, a.shared_gain)
    } else {
        Setup { shared_g: a.shared_g, ..Setup::analyze(a.criterion, mode, form) }
    };
    setup.check(&model)?;
    let ctrl = if synth { None } else { load_controller(&a.common.controller)? };
    let solver = solver(&a.common.solver)?;
    let opts = RunOptions { search: if a.bisect { Search::Bisect } else { Search::Direct }, bisect: BisectOptions { rel_tol: a.tol, ..Default::default() } };
    let o = execute(&setup, &model, ctrl.as_ref(), &opts, solver.as_ref())?;
    let dir = &a.common.out;
    fs::create_dir_all(dir)?;
    let cert = o.certificate();
    cert.save(&dir.join("certificate.json"))?;
    if synth {
        if let Some(k) = &o.controller {
            k.save(&dir.join("controller.json"))?;
        }
    }
    let (text, side) = run_report(&model, &o);
    finish_report(dir, if synth { "synthesize" } else { "analyze" }, &text, &side)?;
    if !o.analysis.residuals().pass {
        return Err(Fail { code: 3, msg: "residual check failed".into() });
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Res<()> {
    let model = load_model(&a.common.model)?;
    let cert = Certificate::from_json(&read_json(&a.certificate)?)?;
    let ctrl = load_controller(&a.common.controller)?;
    if a.horizon == 0 {
        return Err(input("--horizon must be at least 1"));
    }
    let opts = ValidateOptions { sim: SimOptions { horizon: a.horizon, trials: a.trials, seed: a.seed, ..Default::default() }, ..Default::default() };
    let report = validate(&model, &cert, ctrl.as_ref(), &opts)?;
    let text = format!("{report}\n");
    let side = serde_json::to_value(&report).expect("json");
    finish_report(&a.common.out, "validate", &text, &side)?;
    if let Some(path) = &a.csv {
        let setup = cert.setup.as_ref().map(csls::pipeline::Setup::from_json).transpose()?.ok_or_else(|| input("certificate has no setup record"))?;
        let recovered = match (&ctrl, setup.task) {
            (None, csls::pipeline::Task::Synthesize) => Some(csls::certify::recover_controller(&cert, &model.graph)?),
            (c, _) => c.clone(),
        };
        let cl = csls::pipeline::closed_loop(&model, recovered.as_ref())?;
        let (_, delta) = scenarios(setup.mode).remove(0);
        let sys = match delta {
            Some(d) => cl.at_delta(d)?,
            None => cl.nominal(),
        };
        let b = empirical_l2_lb(&model.graph, &sys, &opts.sim)?;
        let walk = csls::model::EdgeWalk::new(&model.graph, b.edges.clone())?;
        let n = model.plant.states();
        let traj = simulate(&model.graph, &sys, &walk, &vec![0.0; n], &b.input)?;
        let mut f = fs::File::create(path)?;
        traj.write_csv(&mut f)?;
    }
    if !report.pass {
        return Err(Fail { code: 3, msg: "validation failed".into() });
    }
    Ok(())
}

fn parse_range(s: &str) -> Res<Vec<f64>> {
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| input(format!("bad range '{s}' (expected a:b:step)")))?;
    let [a, b, step] = parts[..] else {
        return Err(input(format!("bad range '{s}' (expected a:b:step)")));
    };
    if !(step > 0.0) || b < a {
        return Err(input(format!("bad range '{s}': need a <= b and step > 0")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}

fn cmd_sweep(a: &SweepArgs) -> Res<()> {
    let model = load_model(&a.common.model)?;
    let deltas = parse_range(&a.sweep_delta)?;
    let ctrl = load_controller(&a.common.controller)?;
    let setup = Setup::analyze(a.criterion, Mode::FixedDelta(0.0), Form::parse(&a.form)?);
    setup.check(&model)?;
    let solver = solver(&a.common.solver)?;
    let opts = RunOptions { search: Search::Direct, bisect: BisectOptions { rel_tol: a.tol, ..Default::default() } };
    let normalized: Vec<f64> = deltas.iter().map(|&d| normalize(&model, d)).collect();
    let rows = sweep_delta(&setup, &model, ctrl.as_ref(), &normalized, &opts, solver.as_ref(), a.jobs);
    let mut text = format!("{:>10}  {:>12}\n", "delta", "gamma");
    let mut side = Vec::new();
    let mut worst: Option<Fail> = None;
    for ((d, r), phys) in rows.into_iter().zip(&deltas) {
        let cell = match &r {
            Ok(Some(g)) => format!("{g:.6}"),
            Ok(None) => "feasible".into(),
            Err(e) => format!("error: {e}"),
        };
        text += &format!("{:>10}  {:>12}\n", fmt_num(*phys), cell);
        side.push(json!({ "delta": fmt_num(*phys).parse::<f64>().unwrap_or(*phys), "normalized": d, "gamma": r.as_ref().ok().cloned().flatten(), "error": r.as_ref().err().map(|e| e.to_string()) }));
        if let Err(e) = r {
            worst.get_or_insert(Fail::from(e));
        }
    }
    finish_report(&a.common.out, "sweep", &text, &json!({ "setup": setup.to_json(), "rows": side }))?;
    worst.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::CompileWhrt(a) => cmd_compile(a),
        Command::Lift(a) => cmd_lift(a),
        Command::Analyze(a) => cmd_run(a, false),
        Command::Synthesize(a) => cmd_run(a, true),
        Command::Validate(a) => cmd_validate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
