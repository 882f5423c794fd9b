//! Command-line driver: sample scenarios, solve the dispatch, verify a
//! decision against the frequency thresholds, compare reformulations, and
//! export solver-ready models.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible instance, 4 backend or
//! environment failure. Every command is deterministic given its flags.

use clap::{Parser, Subcommand};
use jcedkit::evaluate::{compare_methods, ex_post_evaluate, ExPostReport};
use jcedkit::grid::{load_case, GridCase};
use jcedkit::model::{
    build_model, extract_decision, BuildError, BuildMode, BuildOptions, BuiltModel,
    DispatchDecision, ZGroup,
};
use jcedkit::reform::{reform, Method, ReformOptions, ReformSummary};
use jcedkit::scenario::{
    empirical_quantile, load_uncertainty, read_scenarios_csv, sample_scenarios,
    write_scenarios_csv, QuantileSide, ScenarioSet, UncertaintyModel,
};
use jcedkit::sim::{verify_decision, SimOptions, VerifyReport};
use jcedkit::solve::{solve, write_mps, Backend, SolveError, SolveOptions, SolveStatus};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "jcedkit",
    version,
    about = "Chance-constrained economic dispatch with inverter frequency-support co-optimization"
)]
struct Cli {
    /// Grid case JSON.
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    /// TOML run config supplying defaults for every flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver backend: "embedded" or "exec:<path>". Flag beats the
    /// JCEDKIT_BACKEND environment variable, which beats the config file.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Worker threads for sampling and evaluation (0 = automatic).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw scenarios from the uncertainty model and write them as CSV.
    Sample {
        /// Number of scenarios.
        #[arg(long)]
        n: Option<usize>,
        /// Uncertainty model JSON; omitted means zero forecast error.
        #[arg(long)]
        uncertainty: Option<PathBuf>,
    },
    /// Build, reformulate and solve; write decision and model per method.
    Solve {
        /// Reformulation; repeat the flag to solve several in one run.
        #[arg(long = "method")]
        methods: Vec<String>,
        /// co-opt, fixed or individual.
        #[arg(long)]
        mode: Option<String>,
        /// Pinned virtual inertia (s, device base); fixed mode only.
        #[arg(long)]
        fix_h: Option<f64>,
        /// Pinned virtual droop (pu, device base); fixed mode only.
        #[arg(long)]
        fix_d: Option<f64>,
        /// Sample size when sampling inline.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        /// Pre-sampled scenario CSV; overrides inline sampling.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        mip_gap: Option<f64>,
    },
    /// Simulate a sweep of disturbances against a decision and evaluate it
    /// on a fresh scenario set.
    Verify {
        /// Decision JSON from `solve` (or a bare decision object).
        #[arg(long)]
        decision: PathBuf,
        /// Disturbance step in MW; repeatable. Default sweep: +/-5..25% of
        /// net load in 5% steps.
        #[arg(long = "dp")]
        dps: Vec<f64>,
        /// Fresh test-set size for the ex-post evaluation.
        #[arg(long)]
        test_n: Option<usize>,
        /// Fresh test-set seed (default: training seed + 1).
        #[arg(long)]
        test_seed: Option<u64>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        /// Ex-post shortfall price in $/MWh.
        #[arg(long)]
        shed_price: Option<f64>,
    },
    /// Solve the same instance with several methods and tabulate them.
    Compare {
        /// Default: saa then msaa.
        #[arg(long = "method")]
        methods: Vec<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        fix_h: Option<f64>,
        #[arg(long)]
        fix_d: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Wall-time repeats per method (median reported).
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        mip_gap: Option<f64>,
    },
    /// Write the reformulated model as MPS without solving it.
    ExportModel {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        fix_h: Option<f64>,
        #[arg(long)]
        fix_d: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

/// Optional per-field replacements applied onto the case thresholds.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdPatch {
    rocof_max_hz_per_s: Option<f64>,
    nadir_max_hz: Option<f64>,
    ss_max_hz: Option<f64>,
    d_load_pu: Option<f64>,
    dt_h: Option<f64>,
    delta_f: Option<f64>,
    delta_dibr: Option<f64>,
    delta_sfr: Option<f64>,
    delta_l: Option<f64>,
    delta_r: Option<f64>,
}

/// The config file mirrors the flags; any flag given on the command line
/// wins over the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    case: Option<PathBuf>,
    uncertainty: Option<PathBuf>,
    scenarios: Option<PathBuf>,
    n: Option<usize>,
    seed: Option<u64>,
    test_n: Option<usize>,
    test_seed: Option<u64>,
    methods: Option<Vec<String>>,
    mode: Option<String>,
    fix_h: Option<f64>,
    fix_d: Option<f64>,
    backend: Option<String>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    shed_price: Option<f64>,
    repeats: Option<usize>,
    time_limit: Option<f64>,
    mip_gap: Option<f64>,
    thresholds: Option<ThresholdPatch>,
}

enum CliError {
    Input(String),
    Infeasible(String),
    Backend(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Backend(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) | CliError::Backend(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            // Unattainable frequency envelope: no dispatch can exist.
            BuildError::Sfr(inner) => CliError::Infeasible(inner.to_string()),
            other => input(other),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Invalid(m) => input(m),
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<jcedkit::evaluate::EvalError> for CliError {
    fn from(e: jcedkit::evaluate::EvalError) -> Self {
        use jcedkit::evaluate::EvalError as E;
        match e {
            E::Build(b) => b.into(),
            E::Solve(s) => s.into(),
            other => input(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Everything resolved from flags, environment and config file.
struct Ctx {
    case: GridCase,
    cfg: FileConfig,
    out: PathBuf,
    backend_label: String,
    seed: u64,
    solve_opts: SolveOptions,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| input(format!("config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| input(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let jobs = cli.jobs.or(cfg.jobs).unwrap_or(0);
    if jobs > 0 {
        // Ignore the error when a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let case_path = cli
        .case
        .clone()
        .or_else(|| cfg.case.clone())
        .ok_or_else(|| input("no case given: pass --case or set `case` in the config"))?;
    let mut case = load_case(&case_path).map_err(input)?;
    if let Some(patch) = &cfg.thresholds {
        apply_patch(&mut case, patch);
        case.validate().map_err(input)?;
    }

    let backend_label = cli
        .backend
        .clone()
        .or_else(|| std::env::var("JCEDKIT_BACKEND").ok())
        .or_else(|| cfg.backend.clone())
        .unwrap_or_else(|| "embedded".into());
    let backend = Backend::from_str(&backend_label).map_err(input)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(7);
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Backend(format!("create {}: {e}", out.display())))?;

    let solve_opts = SolveOptions { backend, ..SolveOptions::default() };
    let ctx = Ctx { case, cfg, out, backend_label, seed, solve_opts };

    match cli.cmd {
        Cmd::Sample { n, uncertainty } => cmd_sample(&ctx, n, uncertainty),
        Cmd::Solve { methods, mode, fix_h, fix_d, n, uncertainty, scenarios, time_limit, mip_gap } => {
            let mut ctx = ctx;
            tune_solver(&mut ctx, time_limit, mip_gap);
            cmd_solve(&ctx, methods, mode, fix_h, fix_d, n, uncertainty, scenarios)
        }
        Cmd::Verify { decision, dps, test_n, test_seed, uncertainty, shed_price } => {
            cmd_verify(&ctx, decision, dps, test_n, test_seed, uncertainty, shed_price)
        }
        Cmd::Compare {
            methods,
            mode,
            fix_h,
            fix_d,
            n,
            uncertainty,
            scenarios,
            repeats,
            time_limit,
            mip_gap,
        } => {
            let mut ctx = ctx;
            tune_solver(&mut ctx, time_limit, mip_gap);
            cmd_compare(&ctx, methods, mode, fix_h, fix_d, n, uncertainty, scenarios, repeats)
        }
        Cmd::ExportModel { method, mode, fix_h, fix_d, n, uncertainty, scenarios } => {
            cmd_export(&ctx, method, mode, fix_h, fix_d, n, uncertainty, scenarios)
        }
    }
}

fn tune_solver(ctx: &mut Ctx, time_limit: Option<f64>, mip_gap: Option<f64>) {
    if let Some(t) = time_limit.or(ctx.cfg.time_limit) {
        ctx.solve_opts.time_limit_s = t;
    }
    if let Some(g) = mip_gap.or(ctx.cfg.mip_gap) {
        ctx.solve_opts.mip_gap = g;
    }
}

fn apply_patch(case: &mut GridCase, p: &ThresholdPatch) {
    let t = &mut case.thresholds;
    macro_rules! patch {
        ($($f:ident),*) => { $( if let Some(v) = p.$f { t.$f = v; } )* };
    }
    patch!(
        rocof_max_hz_per_s,
        nadir_max_hz,
        ss_max_hz,
        d_load_pu,
        dt_h,
        delta_f,
        delta_dibr,
        delta_sfr,
        delta_l
    );
    if let Some(v) = p.delta_r {
        t.delta_r = Some(v);
    }
}

fn parse_mode(
    mode: Option<String>,
    fix_h: Option<f64>,
    fix_d: Option<f64>,
    cfg: &FileConfig,
) -> Result<BuildMode, CliError> {
    let name = mode.or_else(|| cfg.mode.clone()).unwrap_or_else(|| "co-opt".into());
    match name.as_str() {
        "co-opt" => Ok(BuildMode::CoOptimized),
        "individual" => Ok(BuildMode::Individual),
        "fixed" => {
            let h_s = fix_h.or(cfg.fix_h).ok_or_else(|| input("fixed mode needs --fix-h"))?;
            let d_pu = fix_d.or(cfg.fix_d).ok_or_else(|| input("fixed mode needs --fix-d"))?;
            Ok(BuildMode::Fixed { h_s, d_pu })
        }
        other => Err(input(format!("unknown mode `{other}` (expected co-opt, fixed, individual)"))),
    }
}

fn parse_methods(given: Vec<String>, cfg: &FileConfig, default: &[Method]) -> Result<Vec<Method>, CliError> {
    let names: Vec<String> = if !given.is_empty() {
        given
    } else if let Some(m) = &cfg.methods {
        m.clone()
    } else {
        return Ok(default.to_vec());
    };
    names.iter().map(|s| Method::from_str(s).map_err(input)).collect()
}

fn mode_label(mode: &BuildMode) -> String {
    match mode {
        BuildMode::CoOptimized => "co-opt".into(),
        BuildMode::Individual => "individual".into(),
        BuildMode::Fixed { h_s, d_pu } => format!("fixed(h={h_s}, d={d_pu})"),
    }
}

/// Scenario set from an explicit CSV or by inline sampling.
fn obtain_scenarios(
    ctx: &Ctx,
    n: Option<usize>,
    uncertainty: Option<PathBuf>,
    scenarios: Option<PathBuf>,
) -> Result<ScenarioSet, CliError> {
    let set = match scenarios.or_else(|| ctx.cfg.scenarios.clone()) {
        Some(path) => read_scenarios_csv(&path).map_err(input)?,
        None => {
            let model = load_uncertainty_or_default(ctx, uncertainty)?;
            let n = n.or(ctx.cfg.n).unwrap_or(500);
            sample_scenarios(&ctx.case, &model, n, ctx.seed).map_err(input)?
        }
    };
    set.validate(&ctx.case).map_err(input)?;
    Ok(set)
}

fn load_uncertainty_or_default(
    ctx: &Ctx,
    flag: Option<PathBuf>,
) -> Result<UncertaintyModel, CliError> {
    match flag.or_else(|| ctx.cfg.uncertainty.clone()) {
        Some(path) => {
            let m = load_uncertainty(&path).map_err(input)?;
            m.validate(&ctx.case).map_err(input)?;
            Ok(m)
        }
        None => Ok(UncertaintyModel::default()),
    }
}

fn save(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Backend(format!("write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Backend(format!("serialize: {e}")))?;
    text.push('\n');
    save(path, &text)
}

fn cmd_sample(ctx: &Ctx, n: Option<usize>, uncertainty: Option<PathBuf>) -> Result<(), CliError> {
    let model = load_uncertainty_or_default(ctx, uncertainty)?;
    let n = n.or(ctx.cfg.n).unwrap_or(500);
    let set = sample_scenarios(&ctx.case, &model, n, ctx.seed).map_err(input)?;
    let csv_path = ctx.out.join("scenarios.csv");
    write_scenarios_csv(&set, &csv_path).map_err(|e| CliError::Backend(e.to_string()))?;
    println!("wrote {}", csv_path.display());
    #[derive(Serialize)]
    struct Meta<'a> {
        case: &'a str,
        n: usize,
        seed: u64,
        rng_id: &'a str,
    }
    save_json(
        &ctx.out.join("scenarios.meta.json"),
        &Meta { case: &ctx.case.name, n: set.n(), seed: set.seed, rng_id: &set.rng_id },
    )?;
    println!("sampled {} scenarios (seed {})", set.n(), set.seed);
    Ok(())
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    case: &'a str,
    n_scenarios: usize,
    seed: u64,
    method: Method,
    mode: BuildMode,
    backend: &'a str,
    status: SolveStatus,
    wall_s: f64,
    objective_per_h: f64,
    objective_exact_per_h: f64,
    reform: ReformSummary,
    decision: DispatchDecision,
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    ctx: &Ctx,
    methods: Vec<String>,
    mode: Option<String>,
    fix_h: Option<f64>,
    fix_d: Option<f64>,
    n: Option<usize>,
    uncertainty: Option<PathBuf>,
    scenarios: Option<PathBuf>,
) -> Result<(), CliError> {
    let methods = parse_methods(methods, &ctx.cfg, &[Method::Msaa])?;
    let mode = parse_mode(mode, fix_h, fix_d, &ctx.cfg)?;
    let set = obtain_scenarios(ctx, n, uncertainty, scenarios)?;
    println!(
        "case {}  n={} seed={}  mode {}  backend {}",
        ctx.case.name,
        set.n(),
        set.seed,
        mode_label(&mode),
        ctx.backend_label
    );

    let mut solved: Vec<(Method, f64, f64)> = Vec::new();
    for method in methods {
        let t0 = std::time::Instant::now();
        let mut model = build_model(&ctx.case, &set, mode, &BuildOptions::default())?;
        let summary = reform(&mut model, method, &ReformOptions::default()).map_err(input)?;
        save(&ctx.out.join(format!("model-{method}.mps")), &write_mps(&model.program))?;
        let sol = solve(&model.program, &ctx.solve_opts)?;
        let wall = t0.elapsed().as_secs_f64();
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Limit if !sol.values.is_empty() => {
                println!("note: {method} hit the solver limit; reporting the incumbent");
            }
            SolveStatus::Infeasible => {
                let family = diagnose_infeasible(ctx, &set, mode, method);
                return Err(CliError::Infeasible(format!(
                    "{method} reformulation is infeasible; narrowed to: {family}"
                )));
            }
            SolveStatus::Unbounded => {
                return Err(input(format!("{method} model is unbounded; check cost signs")));
            }
            SolveStatus::Limit => {
                return Err(CliError::Backend(format!(
                    "{method} hit the solver limit with no incumbent; raise --time-limit"
                )));
            }
        }
        let decision = extract_decision(&model, &ctx.case, sol.objective, &sol.values);
        println!(
            "method {method}  status {:?}  objective {:.4} $/h  exact {:.4} $/h  wall {:.3} s",
            sol.status, decision.objective_per_h, decision.objective_exact_per_h, wall
        );
        let record = SolveRecord {
            case: &ctx.case.name,
            n_scenarios: set.n(),
            seed: set.seed,
            method,
            mode,
            backend: &ctx.backend_label,
            status: sol.status,
            wall_s: wall,
            objective_per_h: decision.objective_per_h,
            objective_exact_per_h: decision.objective_exact_per_h,
            reform: summary,
            decision: decision.clone(),
        };
        save_json(&ctx.out.join(format!("solve-{method}.json")), &record)?;
        solved.push((method, decision.objective_per_h, wall));
    }
    if solved.len() >= 2 {
        let (m0, obj0, w0) = &solved[0];
        let (m1, obj1, w1) = &solved[1];
        if obj0.abs() > 1e-12 {
            println!(
                "cost error ({m0} vs {m1}): {:.4}%  speedup x{:.2}",
                100.0 * (obj0 - obj1) / obj0,
                w0 / w1.max(1e-12)
            );
        }
    }
    Ok(())
}

/// Point at the family that breaks a reformulated model: try the plain
/// dispatch core, then each indicator group alone at its quantile floor
/// (a relaxation of what any method enforces, so blame is sound).
fn diagnose_infeasible(ctx: &Ctx, set: &ScenarioSet, mode: BuildMode, method: Method) -> String {
    let probe = |prep: &dyn Fn(&mut BuiltModel)| -> Option<SolveStatus> {
        let mut m = build_model(&ctx.case, set, mode, &BuildOptions::default()).ok()?;
        prep(&mut m);
        solve(&m.program, &ctx.solve_opts).ok().map(|s| s.status)
    };
    match probe(&|_| {}) {
        Some(SolveStatus::Infeasible) => {
            return "the deterministic dispatch core (balance, reserves, energy)".into();
        }
        Some(_) => {}
        None => return format!("(diagnosis unavailable; {method} model reported infeasible)"),
    }
    for group in [ZGroup::Freq, ZGroup::Dibr, ZGroup::Line] {
        let delta = group.delta(&ctx.case);
        let status = probe(&|m: &mut BuiltModel| {
            for fi in 0..m.families.len() {
                if m.families[fi].group != group {
                    continue;
                }
                let q = empirical_quantile(
                    &m.families[fi].w,
                    &m.meta.weights,
                    delta,
                    QuantileSide::Upper,
                );
                let y = m.families[fi].y;
                m.program.lb[y] = m.program.lb[y].max(q);
            }
        });
        if status == Some(SolveStatus::Infeasible) {
            return format!(
                "the {} chance family (its quantile requirement alone is unservable)",
                group.tag()
            );
        }
    }
    "the joint combination of chance families (each group alone is servable)".into()
}

#[derive(Deserialize)]
struct DecisionFile {
    decision: DispatchDecision,
}

fn load_decision(path: &Path) -> Result<DispatchDecision, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("decision {}: {e}", path.display())))?;
    if let Ok(file) = serde_json::from_str::<DecisionFile>(&text) {
        return Ok(file.decision);
    }
    serde_json::from_str(&text).map_err(|e| input(format!("decision {}: {e}", path.display())))
}

fn cmd_verify(
    ctx: &Ctx,
    decision_path: PathBuf,
    dps: Vec<f64>,
    test_n: Option<usize>,
    test_seed: Option<u64>,
    uncertainty: Option<PathBuf>,
    shed_price: Option<f64>,
) -> Result<(), CliError> {
    let decision = load_decision(&decision_path)?;
    let th = &ctx.case.thresholds;
    println!(
        "thresholds: rocof {} Hz/s, nadir {} Hz, steady-state {} Hz",
        th.rocof_max_hz_per_s, th.nadir_max_hz, th.ss_max_hz
    );

    let sweep: Vec<f64> = if dps.is_empty() {
        let net = ctx.case.net_load_mw();
        let mut v: Vec<f64> = (1..=5).map(|k| 0.05 * k as f64 * net).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        v.extend(neg);
        v
    } else {
        dps
    };
    let report = verify_decision(&ctx.case, &decision, &sweep, &SimOptions::default());
    println!("disturbance MW   rocof Hz/s   nadir Hz     ss Hz   devices   result");
    for c in &report.checks {
        let dev_ok = c.devices.iter().all(|d| d.ok);
        println!(
            "{:>14.2} {:>12.4} {:>10.4} {:>9.4} {:>9} {:>8}",
            c.dp_mw,
            c.metrics.rocof_hz_per_s,
            c.metrics.nadir_hz,
            c.metrics.ss_dev_hz,
            if dev_ok { "ok" } else { "blown" },
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "sweep: {} ({passed}/{} points)",
        if report.pass { "pass" } else { "FAIL" },
        report.checks.len()
    );

    let model = load_uncertainty_or_default(ctx, uncertainty)?;
    let n = test_n.or(ctx.cfg.test_n).or(ctx.cfg.n).unwrap_or(1000);
    let seed = test_seed.or(ctx.cfg.test_seed).unwrap_or(ctx.seed + 1);
    let test = sample_scenarios(&ctx.case, &model, n, seed).map_err(input)?;
    let price = shed_price.or(ctx.cfg.shed_price).unwrap_or(5000.0);
    let ex_post = ex_post_evaluate(&ctx.case, &decision, &test, price)?;
    print!("{}", ex_post.text_table());

    #[derive(Serialize)]
    struct Full<'a> {
        case: &'a str,
        thresholds: &'a jcedkit::grid::Thresholds,
        sweep: &'a VerifyReport,
        ex_post: &'a ExPostReport,
    }
    save_json(
        &ctx.out.join("verify-report.json"),
        &Full { case: &ctx.case.name, thresholds: th, sweep: &report, ex_post: &ex_post },
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    ctx: &Ctx,
    methods: Vec<String>,
    mode: Option<String>,
    fix_h: Option<f64>,
    fix_d: Option<f64>,
    n: Option<usize>,
    uncertainty: Option<PathBuf>,
    scenarios: Option<PathBuf>,
    repeats: Option<usize>,
) -> Result<(), CliError> {
    let methods = parse_methods(methods, &ctx.cfg, &[Method::Saa, Method::Msaa])?;
    let mode = parse_mode(mode, fix_h, fix_d, &ctx.cfg)?;
    let set = obtain_scenarios(ctx, n, uncertainty, scenarios)?;
    let repeats = repeats.or(ctx.cfg.repeats).unwrap_or(1);
    let cmp = compare_methods(
        &ctx.case,
        &set,
        mode,
        &BuildOptions::default(),
        &ReformOptions::default(),
        &methods,
        repeats,
        &ctx.solve_opts,
    )?;
    print!("{}", cmp.text_table());
    save_json(&ctx.out.join("compare.json"), &cmp)?;
    let mut csv = jcedkit::evaluate::MethodComparison::csv_header().to_string();
    csv.push_str(&cmp.csv_rows(&format!("{}", set.n())));
    save(&ctx.out.join("compare.csv"), &csv)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_export(
    ctx: &Ctx,
    method: Option<String>,
    mode: Option<String>,
    fix_h: Option<f64>,
    fix_d: Option<f64>,
    n: Option<usize>,
    uncertainty: Option<PathBuf>,
    scenarios: Option<PathBuf>,
) -> Result<(), CliError> {
    let methods = parse_methods(method.into_iter().collect(), &ctx.cfg, &[Method::Msaa])?;
    let method = methods[0];
    let mode = parse_mode(mode, fix_h, fix_d, &ctx.cfg)?;
    let set = obtain_scenarios(ctx, n, uncertainty, scenarios)?;
    let mut model = build_model(&ctx.case, &set, mode, &BuildOptions::default())?;
    reform(&mut model, method, &ReformOptions::default()).map_err(input)?;
    let p = &model.program;
    let path = ctx.out.join(format!("model-{method}.mps"));
    save(&path, &write_mps(p))?;
    println!(
        "{} vars ({} integer), {} rows ({} lazy)",
        p.var_names.len(),
        p.integer.iter().filter(|&&b| b).count(),
        p.rows.len(),
        p.rows.iter().filter(|r| r.lazy).count()
    );
    Ok(())
}
