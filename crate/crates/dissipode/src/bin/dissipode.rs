// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: solve, kappa, sweep, cost, verify, and the two
//! application generators. All reports are machine-readable (JSON schema
//! "dissipode/1"; sweeps default to CSV with a fixed header).
//!
//! Exit codes: 0 success, 1 usage/IO error, 2 mathematical-hypothesis
//! violation (including failed verification suites).

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dissipode::analysis::{self, run_point, rows_to_csv, SweepAxis, SweepConfig, SweepValue};
use dissipode::block_system::assemble;
use dissipode::error::{Error, Result};
use dissipode::ode_model::{
    certify_dissipativity, default_certification_grid, DissipativeOdeProblem, ProblemSpec,
};
use dissipode::schemes::{select_step, SchemeKind, Task, DEFAULT_QUAD_NODES};
use dissipode::{mm, verify};

const SCHEMA: &str = "dissipode/1";

/// Print to stdout, tolerating a closed pipe (e.g. `dissipode ... | head`).
/// Appends a newline only when the text does not already end with one.
fn print_line(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = if text.ends_with('\n') {
        write!(out, "{text}")
    } else {
        writeln!(out, "{text}")
    };
}

#[derive(Parser)]
#[command(
    name = "dissipode",
    version,
    about = "All-at-once linear-system toolkit for dissipative linear ODEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select steps, assemble, solve, and compare against the reference oracle.
    Solve(SolveArgs),
    /// Report the condition-number bound and the exact condition number.
    Kappa(KappaArgs),
    /// Sweep one axis (t | eps | scheme | mp) and emit one row per point.
    Sweep(SweepArgs),
    /// Report the modeled query costs for a task.
    Cost(CostArgs),
    /// Run the named verification suites.
    Verify(VerifyArgs),
    /// Build and certify a semi-discretized heat problem.
    AppHeat(AppHeatArgs),
    /// Build and certify a non-Hermitian dynamics problem.
    AppNonhermitian(AppNonHermitianArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    Trap,
    Dyson,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    History,
    Final,
    HistoryHomogeneous,
}

impl From<TaskArg> for Task {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::History => Task::History,
            TaskArg::Final => Task::Final,
            TaskArg::HistoryHomogeneous => Task::HistoryHomogeneous,
        }
    }
}

#[derive(Args)]
struct SchemeFlags {
    /// Time discretization scheme.
    #[arg(long, value_enum, default_value = "euler")]
    scheme: SchemeArg,
    /// Dyson truncation order K (dyson only).
    #[arg(long, default_value_t = 2)]
    dyson_order: usize,
    /// Quadrature nodes per simplex axis (dyson only).
    #[arg(long, default_value_t = DEFAULT_QUAD_NODES)]
    quad_nodes: usize,
}

impl SchemeFlags {
    fn build(&self) -> SchemeKind {
        match self.scheme {
            SchemeArg::Euler => SchemeKind::Euler,
            SchemeArg::Trap => SchemeKind::Trapezoidal,
            SchemeArg::Dyson => SchemeKind::Dyson {
                order: self.dyson_order,
                quad_nodes: self.quad_nodes,
            },
        }
    }
}

#[derive(Args)]
struct ProblemFlag {
    /// Problem definition: a JSON file path, or inline JSON starting with '{'.
    #[arg(long)]
    problem: String,
}

impl ProblemFlag {
    fn spec(&self) -> Result<ProblemSpec> {
        if self.problem.trim_start().starts_with('{') {
            ProblemSpec::parse(&self.problem)
        } else {
            ProblemSpec::load(&PathBuf::from(&self.problem))
        }
    }

    fn build(&self) -> Result<Arc<DissipativeOdeProblem>> {
        Ok(Arc::new(self.spec()?.build()?))
    }
}

#[derive(Args)]
struct OutputFlags {
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutputFlags {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => std::fs::write(path, text)?,
            None => print_line(text),
        }
        Ok(())
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemFlag,
    #[command(flatten)]
    scheme: SchemeFlags,
    #[arg(long, value_enum, default_value = "history")]
    task: TaskArg,
    /// Target accuracy in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Padding copies: an integer, or "auto" for ⌈M/(ηT)⌉ on final tasks.
    #[arg(long, default_value = "auto")]
    mp: String,
    /// Export the assembled system as <base>.mtx plus <base>.json.
    #[arg(long)]
    export_mm: Option<PathBuf>,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct KappaArgs {
    #[command(flatten)]
    problem: ProblemFlag,
    #[command(flatten)]
    scheme: SchemeFlags,
    /// Derive the step from this accuracy target (history task).
    #[arg(long)]
    eps: Option<f64>,
    /// Number of evolution steps (h = T/M) when --eps is not given.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    mp: usize,
    #[arg(long)]
    export_mm: Option<PathBuf>,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    problem: ProblemFlag,
    #[command(flatten)]
    scheme: SchemeFlags,
    #[arg(long, value_enum, default_value = "history")]
    task: TaskArg,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemFlag,
    #[command(flatten)]
    scheme: SchemeFlags,
    #[arg(long, value_enum, default_value = "history")]
    task: TaskArg,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Sweep axis: t | eps | scheme | mp.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values (scheme axis: euler,trap,dyson).
    #[arg(long, default_value = "")]
    values: String,
    /// Worker threads for the sweep fan-out.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output format: csv (default) or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run only the suites whose name contains this substring.
    #[arg(long)]
    filter: Option<String>,
    /// Perturb a padding block; the solve suite must then fail.
    #[arg(long, default_value_t = false)]
    inject_fault: bool,
}

#[derive(Args)]
struct AppHeatArgs {
    /// Thermal diffusivity a > 0.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Flow velocity b.
    #[arg(long, default_value_t = 0.0)]
    b_vel: f64,
    /// Spatial dimension d.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Grid points per axis are nx + 1.
    #[arg(long, default_value_t = 8)]
    nx: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Constant potential c ≤ 0.
    #[arg(long, default_value_t = 0.0)]
    c_const: f64,
    /// Constant source term.
    #[arg(long, default_value_t = 0.0)]
    f_const: f64,
    #[command(flatten)]
    out: OutputFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum NonHermitianDemo {
    /// H = σ_x, L = −I.
    Rabi,
    /// H = 0, L = diag(−1, −2).
    Decay,
    /// H(t) = t·σ_z, L = −I.
    Driven,
}

#[derive(Args)]
struct AppNonHermitianArgs {
    #[arg(long, value_enum, default_value = "rabi")]
    demo: NonHermitianDemo,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[command(flatten)]
    out: OutputFlags,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args).map(|_| 0),
        Command::Kappa(args) => cmd_kappa(args).map(|_| 0),
        Command::Sweep(args) => cmd_sweep(args).map(|_| 0),
        Command::Cost(args) => cmd_cost(args).map(|_| 0),
        Command::Verify(args) => cmd_verify(args),
        Command::AppHeat(args) => cmd_app_heat(args).map(|_| 0),
        Command::AppNonhermitian(args) => cmd_app_nonhermitian(args).map(|_| 0),
    }
}

fn parse_mp(raw: &str) -> Result<Option<usize>> {
    if raw == "auto" {
        return Ok(None);
    }
    raw.parse::<usize>()
        .map(Some)
        .map_err(|_| Error::InvalidConfig(format!("--mp must be an integer or 'auto', got {raw}")))
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let scheme = args.scheme.build();
    let task: Task = args.task.into();
    let mp_override = parse_mp(&args.mp)?;
    let (sel, mp, row) = run_point(&problem, scheme, task, args.eps, mp_override)?;
    if let Some(base) = &args.export_mm {
        let system = assemble(&problem, scheme.with_order(sel.k), sel.m, mp, sel.h)?;
        mm::export_system(&system, base)?;
    }
    let report = json!({
        "schema": SCHEMA,
        "command": "solve",
        "task": task.to_string(),
        "scheme": row.scheme,
        "eps": args.eps,
        "problem": problem_summary(&problem),
        "h": row.h,
        "m": row.m,
        "k": row.k,
        "mp": mp,
        "state_error_history": row.err_history,
        "state_error_final": row.err_final,
        "success_probability": row.success_prob,
        "kappa_bound": row.kappa_bound,
        "kappa_exact": row.kappa_exact,
        "queries_oa": row.queries_oa,
        "queries_state_prep": row.queries_state_prep,
        "aa_rounds": row.aa_rounds,
    });
    args.out.emit(&serde_json::to_string_pretty(&report)?)
}

fn problem_summary(problem: &DissipativeOdeProblem) -> serde_json::Value {
    json!({
        "dim": problem.dim(),
        "t_final": problem.t_final(),
        "eta": problem.eta(),
        "alpha_a": problem.alpha_a(),
        "alpha_b": problem.alpha_b(),
        "homogeneous": problem.is_homogeneous(),
    })
}

fn cmd_kappa(args: KappaArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let scheme = args.scheme.build();
    let (m, h, k) = match (args.eps, args.m) {
        (Some(eps), _) => {
            let sel = select_step(&problem, scheme, eps, Task::History)?;
            (sel.m, sel.h, sel.k)
        }
        (None, Some(m)) => (m, problem.t_final() / m as f64, None),
        (None, None) => {
            return Err(Error::InvalidConfig(
                "kappa needs either --eps or --m".into(),
            ))
        }
    };
    let system = assemble(&problem, scheme.with_order(k), m, args.mp, h)?;
    if let Some(base) = &args.export_mm {
        mm::export_system(&system, base)?;
    }
    // The bound call verifies the hypothesis; exit code 2 via the error path.
    let bound = system.kappa_bound(problem.eta(), problem.t_final())?;
    let exact = match system.kappa_exact() {
        Ok(v) => Some(v),
        Err(Error::DimensionGuardExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let report = json!({
        "schema": SCHEMA,
        "command": "kappa",
        "scheme": scheme.to_string(),
        "problem": problem_summary(&problem),
        "h": h,
        "m": m,
        "mp": args.mp,
        "hypothesis_ok": true,
        "norm_bound": bound.norm_bound,
        "inv_bound": bound.inv_bound,
        "kappa_bound": bound.kappa,
        "kappa_exact": exact,
    });
    args.out.emit(&serde_json::to_string_pretty(&report)?)
}

fn cmd_cost(args: CostArgs) -> Result<()> {
    let problem = args.problem.build()?;
    let scheme = args.scheme.build();
    let task: Task = args.task.into();
    let report = analysis::cost_model(&problem, scheme, task, args.eps)?;
    let wrapped = json!({
        "schema": SCHEMA,
        "command": "cost",
        "problem": problem_summary(&problem),
        "report": report,
    });
    args.out.emit(&serde_json::to_string_pretty(&wrapped)?)
}

fn parse_values(axis: SweepAxis, raw: &str, flags: &SchemeFlags) -> Result<Vec<SweepValue>> {
    let items: Vec<&str> = raw
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    items
        .into_iter()
        .map(|item| match axis {
            SweepAxis::THorizon | SweepAxis::Eps => item
                .parse::<f64>()
                .map(SweepValue::Real)
                .map_err(|_| Error::InvalidConfig(format!("bad numeric value '{item}'"))),
            SweepAxis::Mp => item
                .parse::<usize>()
                .map(SweepValue::Int)
                .map_err(|_| Error::InvalidConfig(format!("bad integer value '{item}'"))),
            SweepAxis::Scheme => match item {
                "euler" => Ok(SweepValue::Scheme(SchemeKind::Euler)),
                "trap" => Ok(SweepValue::Scheme(SchemeKind::Trapezoidal)),
                "dyson" => Ok(SweepValue::Scheme(SchemeKind::Dyson {
                    order: flags.dyson_order,
                    quad_nodes: flags.quad_nodes,
                })),
                other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
            },
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let axis = SweepAxis::parse(&args.axis)?;
    let values = parse_values(axis, &args.values, &args.scheme)?;
    let spec = args.problem.spec()?;
    let config = SweepConfig {
        axis,
        values,
        scheme: args.scheme.build(),
        task: args.task.into(),
        eps: args.eps,
        mp: None,
    };
    let factory = move |horizon: Option<f64>| -> Result<Arc<DissipativeOdeProblem>> {
        let spec = match horizon {
            Some(t) => spec.with_t_final(t)?,
            None => spec.clone(),
        };
        Ok(Arc::new(spec.build()?))
    };
    let rows = match args.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| analysis::run_sweep(&factory, &config))
        }
        None => analysis::run_sweep(&factory, &config),
    };
    let text = match args.format.as_str() {
        "csv" => rows_to_csv(&rows),
        "json" => serde_json::to_string_pretty(&json!({
            "schema": SCHEMA,
            "command": "sweep",
            "rows": rows,
        }))?,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown format '{other}' (csv | json)"
            )))
        }
    };
    args.out.emit(&text)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let outcomes = verify::run_suites(args.seed, args.filter.as_deref(), args.inject_fault);
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no suite matches filter {:?} (available: {})",
            args.filter,
            verify::SUITE_NAMES.join(", ")
        )));
    }
    let mut all_ok = true;
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        print_line(&format!("[{status}] {}", outcome.name));
        for line in &outcome.lines {
            print_line(line);
        }
        all_ok &= outcome.passed;
    }
    Ok(if all_ok { 0 } else { 2 })
}

fn cmd_app_heat(args: AppHeatArgs) -> Result<()> {
    let spec = ProblemSpec::Heat {
        a: args.a,
        b_vel: args.b_vel,
        d: args.d,
        n_x: args.nx,
        t_final: args.t,
        c_const: args.c_const,
        f_const: args.f_const,
    };
    let problem = spec.build()?;
    let grid = default_certification_grid(&problem);
    let cert = certify_dissipativity(&problem, &grid)?;
    let bound =
        -8.0 * args.a * args.d as f64 * (args.nx * args.nx) as f64
            / ((args.nx + 2) * (args.nx + 2)) as f64;
    let two_lambda = -2.0 * cert.measured_eta;
    let report = json!({
        "schema": SCHEMA,
        "command": "app-heat",
        "problem": problem_summary(&problem),
        "measured_eta": cert.measured_eta,
        "worst_time": cert.worst_time,
        "certified": cert.pass,
        "gap_bound": bound,
        "gap_bound_satisfied": two_lambda <= bound + 1e-9,
    });
    args.out.emit(&serde_json::to_string_pretty(&report)?)
}

fn cmd_app_nonhermitian(args: AppNonHermitianArgs) -> Result<()> {
    use dissipode::linalg::{cmat_from_real, creal, identity, spectral_norm, C64, CMat, CVec};
    use dissipode::ode_model::{make_non_hermitian_problem, Generator};
    use dissipode::reference_oracle::propagator;

    let e1 = CVec::from_fn(2, |i, _| creal(if i == 0 { 1.0 } else { 0.0 }));
    let t = args.t;
    let (problem, closed_form, label) = match args.demo {
        NonHermitianDemo::Rabi => {
            let sx = cmat_from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
            let p = make_non_hermitian_problem(
                Generator::Constant(sx.clone()),
                Generator::Constant(identity(2) * creal(-1.0)),
                e1,
                t,
                None,
            )?;
            let decay = (-t).exp();
            let expect =
                identity(2) * creal(decay * t.cos()) + &sx * C64::new(0.0, -decay * t.sin());
            (p, expect, "exp(-t)(cos t I - i sin t sigma_x)")
        }
        NonHermitianDemo::Decay => {
            let damp = cmat_from_real(&[&[-1.0, 0.0], &[0.0, -2.0]]);
            let p = make_non_hermitian_problem(
                Generator::Constant(CMat::zeros(2, 2)),
                Generator::Constant(damp),
                e1,
                t,
                None,
            )?;
            let expect = CMat::from_fn(2, 2, |i, j| {
                if i == j {
                    creal(((-(i as f64) - 1.0) * t).exp())
                } else {
                    creal(0.0)
                }
            });
            (p, expect, "diag(exp(-t), exp(-2t))")
        }
        NonHermitianDemo::Driven => {
            let p = make_non_hermitian_problem(
                Generator::Varying(std::sync::Arc::new(|s: f64| {
                    cmat_from_real(&[&[s, 0.0], &[0.0, -s]])
                })),
                Generator::Constant(identity(2) * creal(-1.0)),
                e1,
                t,
                None,
            )?;
            let expect = CMat::from_fn(2, 2, |i, j| {
                if i == j {
                    let phase = t * t / 2.0 * if i == 0 { -1.0 } else { 1.0 };
                    C64::from_polar((-t).exp(), phase)
                } else {
                    creal(0.0)
                }
            });
            (p, expect, "exp(-t) exp(-i t^2/2 sigma_z)")
        }
    };
    let prop = propagator(&problem, 0.0, t, 1e-10)?;
    let residual = spectral_norm(&(&prop.matrix - &closed_form));
    let report = json!({
        "schema": SCHEMA,
        "command": "app-nonhermitian",
        "problem": problem_summary(&problem),
        "t": t,
        "closed_form": label,
        "propagator_residual": residual,
        "propagator_norm": spectral_norm(&prop.matrix),
        "decay_bound": (-problem.eta() * t).exp(),
    });
    args.out.emit(&serde_json::to_string_pretty(&report)?)
}
