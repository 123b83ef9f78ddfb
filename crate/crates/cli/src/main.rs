use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use swerve_safety::dynamics::{find_swerve, SearchOptions};
use swerve_safety::lower_bound::lower_bound;
use swerve_safety::scenario::d_swerve_for_brake;
use swerve_safety::sim::CollisionTest;
use swerve_safety::sweep::{self, SweepSpec, SweepVariable, Table};
use swerve_safety::verify::{self, Suite, VerifyOptions};
use swerve_safety::{
    Config, Error, FormulaMode, FormulaOptions, RuleRegistry, ScenarioContext, ScenarioRegistry, SwerveManoeuvre,
    TripleState,
};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;

#[derive(Parser)]
#[command(name = "swerve-safety", version, about = "Safe following distances for vehicles that can brake or swerve")]
struct Cli {
    /// Parameter file (`key = value` lines); built-in defaults otherwise.
    #[arg(long, global = true, env = "SWERVE_SAFETY_CONFIG")]
    config: Option<PathBuf>,

    /// Override a single parameter, e.g. `--set a_min_brake=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Evaluate the formulas exactly as originally printed.
    #[arg(long, global = true)]
    literal_formulas: bool,

    /// Worker threads for sweeps and verification (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Seed for randomised verification.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario distances and following rules for one speed pair, as JSON.
    Distance(DistanceArgs),
    /// Kinematic swerve trajectory as CSV.
    SwerveProfile(ProfileArgs),
    /// Distance or clearance tables over a speed grid, as CSV.
    Sweep(SweepArgs),
    /// Compare the dynamic-model swerve with the kinematic one, as JSON.
    DynamicValidate(DynamicArgs),
    /// Run the simulation oracle suites and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DistanceArgs {
    /// Scenarios to evaluate (bb, sb, bs, ss); all when omitted.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    /// Following rules to evaluate (rss-braking, universal, positions, uniform).
    #[arg(long, value_delimiter = ',')]
    rule: Vec<String>,
    #[arg(long)]
    vr: f64,
    #[arg(long)]
    vf: f64,
    /// Speed of the vehicle ahead of the lead, for the following rules.
    #[arg(long)]
    v3: Option<f64>,
    /// Measured lead-to-third-vehicle gap, for the `positions` rule.
    #[arg(long)]
    d23: Option<f64>,
    /// Reaction time; the configured value when omitted.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Speed during the swerve, m/s.
    #[arg(long)]
    v: f64,
    /// Sample spacing, s.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Scenario distances, swerve-aware and braking-only following distances.
    Distances,
    /// Longitudinal clearance of the kinematic, particle and dynamic swerves.
    Clearance,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = Figure::Distances)]
    figure: Figure,
    /// Swept speed: v_r, v_f or v_all.
    #[arg(long, default_value = "v_all")]
    variable: String,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    #[arg(long, default_value_t = 30.0)]
    stop: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Speed of the vehicle that is not swept.
    #[arg(long, default_value_t = 0.0)]
    other: f64,
    /// Columns to keep, e.g. `d_bb,d_hat`.
    #[arg(long, value_delimiter = ',')]
    outputs: Vec<String>,
    /// Include the dynamic-model columns in the clearance table.
    #[arg(long)]
    dynamic: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DynamicMode {
    Constrained,
    Unconstrained,
    Both,
}

#[derive(Args)]
struct DynamicArgs {
    /// Initial speed, m/s.
    #[arg(long)]
    v0: f64,
    #[arg(long, value_enum, default_value_t = DynamicMode::Both)]
    mode: DynamicMode,
    /// Write the trajectory of each found manoeuvre as CSV next to this path
    /// (`<stem>_constrained.csv`, `<stem>_unconstrained.csv`).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Keep every n-th integration step in trajectory CSVs.
    #[arg(long, default_value_t = 10)]
    stride: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Theorems,
    Tightness,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: SuiteArg,
    /// Random cases per pairwise theorem.
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Random blocks for the whole-road theorem.
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    /// Random speed pairs per tightness family.
    #[arg(long, default_value_t = 40)]
    probes: usize,
    /// Use exact rotated rectangles in tightness probes.
    #[arg(long)]
    exact: bool,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::UnknownName { .. } | Error::Io(_) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| Failure::usage(e.to_string()))?,
        None => Config::default(),
    };
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("--set {key}: `{value}` is not a number")))?;
        config
            .set(key.trim(), value)
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    Ok(config)
}

fn options(cli: &Cli) -> FormulaOptions {
    if cli.literal_formulas {
        FormulaOptions::literal()
    } else {
        FormulaOptions::default()
    }
}

fn run(cli: &Cli) -> Outcome {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Distance(a) => distance(cli, &config, a),
        Command::SwerveProfile(a) => profile(cli, &config, a),
        Command::Sweep(a) => sweep_cmd(cli, &config, a),
        Command::DynamicValidate(a) => dynamic(cli, &config, a),
        Command::Verify(a) => verify_cmd(cli, &config, a),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::usage(e.to_string()))
        }
    }
}

fn emit_json(cli: &Cli, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    emit(cli, &text)
}

fn emit_table(cli: &Cli, table: &Table, config: &Config) -> Result<(), Failure> {
    emit(cli, &table.to_csv(&config.fingerprint())?)?;
    if table.warnings.is_empty() {
        return Ok(());
    }
    let text = table.warnings.join("\n") + "\n";
    match &cli.out {
        Some(path) => {
            let side = sidecar(path);
            fs::write(&side, text).map_err(|e| Failure::usage(format!("{}: {e}", side.display())))
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".warnings");
    path.with_file_name(name)
}

fn mode_name(cli: &Cli) -> &'static str {
    match options(cli).mode {
        FormulaMode::Corrected => "corrected",
        FormulaMode::Literal => "literal",
    }
}

fn distance(cli: &Cli, config: &Config, a: &DistanceArgs) -> Outcome {
    let mut ctx = ScenarioContext::from_config(config, options(cli));
    if let Some(rho) = a.rho {
        ctx.safety.rho = rho;
        ctx.safety.validate()?;
    }
    let scenarios = ScenarioRegistry::standard();
    let rules = RuleRegistry::standard();
    let names: Vec<String> = if a.scenario.is_empty() && a.rule.is_empty() {
        scenarios.names().into_iter().map(String::from).collect()
    } else {
        a.scenario.clone()
    };
    let mut results = Vec::new();
    for name in &names {
        let r = scenarios.get(name)?.evaluate(&ctx, a.vr, a.vf, ctx.safety.rho)?;
        results.push(serde_json::to_value(r).map_err(|e| Failure::usage(e.to_string()))?);
    }
    let state = TripleState {
        v1: a.vr,
        v2: a.vf,
        v3: a.v3,
        d_23: a.d23,
    };
    let mut rule_results = Vec::new();
    for name in &a.rule {
        let r = rules.get(name)?.distance(&ctx, &state)?;
        rule_results.push(serde_json::to_value(r).map_err(|e| Failure::usage(e.to_string()))?);
    }
    emit_json(
        cli,
        &json!({
            "config": config.fingerprint(),
            "mode": mode_name(cli),
            "v_r": a.vr,
            "v_f": a.vf,
            "rho": ctx.safety.rho,
            "scenarios": results,
            "rules": rule_results,
        }),
    )?;
    Ok(0)
}

fn profile(cli: &Cli, config: &Config, a: &ProfileArgs) -> Outcome {
    if !(a.dt > 0.0) {
        return Err(Failure::usage("--dt must be positive"));
    }
    let m = SwerveManoeuvre::build(a.v, &config.geometry, &config.safety, options(cli).mode)?;
    emit_table(cli, &sweep::kinematic_trajectory(&m, a.dt), config)?;
    Ok(0)
}

fn sweep_cmd(cli: &Cli, config: &Config, a: &SweepArgs) -> Outcome {
    let spec = SweepSpec {
        variable: SweepVariable::from_name(&a.variable)?,
        start: a.start,
        stop: a.stop,
        step: a.step,
        other: a.other,
        outputs: a.outputs.clone(),
    };
    let table = match a.figure {
        Figure::Distances => {
            let ctx = ScenarioContext::from_config(config, options(cli));
            sweep::distance_sweep(&ctx, &spec, cli.jobs)?
        }
        Figure::Clearance => {
            let speeds = spec.grid()?;
            sweep::clearance_sweep(config, &speeds, a.dynamic, &SearchOptions::default(), cli.jobs)
        }
    };
    emit_table(cli, &table, config)?;
    if table.all_rows_failed() {
        return Err(Failure {
            code: EXIT_DOMAIN,
            message: "every row of the sweep failed".into(),
        });
    }
    Ok(0)
}

fn dynamic(cli: &Cli, config: &Config, a: &DynamicArgs) -> Outcome {
    let mut safety = config.safety;
    safety.rho = 0.0;
    let ctx = ScenarioContext::new(config.geometry, safety, options(cli));
    let kin = d_swerve_for_brake(&ctx, a.v0, 0.0, 0.0)?;
    let x_c = kin.components["x_c"];
    let d_prime = kin.components["d_prime"];
    let y_c = kin.components["y_c"];
    let lower = lower_bound(a.v0, 0.0, y_c, &config.geometry, &safety)?;
    let kinematic = x_c + d_prime;
    let modes: &[(bool, &str)] = match a.mode {
        DynamicMode::Constrained => &[(true, "constrained")],
        DynamicMode::Unconstrained => &[(false, "unconstrained")],
        DynamicMode::Both => &[(true, "constrained"), (false, "unconstrained")],
    };
    let mut runs = Vec::new();
    for &(constrained, name) in modes {
        let s = find_swerve(
            a.v0,
            constrained,
            &config.dynamic,
            &config.geometry,
            &safety,
            &SearchOptions::default(),
        )?;
        let x = s.x_c + s.d_prime;
        if let Some(base) = &a.trajectory {
            let stem = base.file_stem().unwrap_or_default().to_string_lossy();
            let path = base.with_file_name(format!("{stem}_{name}.csv"));
            let text = sweep::dynamic_trajectory(&s.trajectory, a.stride).to_csv(&config.fingerprint())?;
            fs::write(&path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        }
        runs.push(json!({
            "mode": name,
            "x_c": x,
            "x_c_com": s.x_c,
            "t_c": s.t_c,
            "y_c": s.y_c,
            "brake": s.control.brake,
            "t_f": s.control.t_f,
            "steering_rates": s.control.steering_rates,
            "max_yaw": s.max_yaw,
            "peak_lateral_acceleration": s.trajectory.peak_lateral_acceleration,
            "relative_error_vs_kinematic": (x - kinematic) / kinematic,
            "bracketed": lower.x_bar_c <= x && x <= kinematic,
            "evaluations": s.evaluations,
        }));
    }
    emit_json(
        cli,
        &json!({
            "config": config.fingerprint(),
            "v0": a.v0,
            "x_c_kinematic": kinematic,
            "x_c_kinematic_com": x_c,
            "x_c_lower": lower.x_bar_c,
            "y_c_kinematic": y_c,
            "dynamic": runs,
        }),
    )?;
    Ok(0)
}

fn verify_cmd(cli: &Cli, config: &Config, a: &VerifyArgs) -> Outcome {
    let ctx = ScenarioContext::from_config(config, options(cli));
    let suite = match a.suite {
        SuiteArg::Theorems => Suite::Theorems,
        SuiteArg::Tightness => Suite::Tightness,
    };
    let o = VerifyOptions {
        seed: cli.seed,
        cases: a.cases,
        blocks: a.blocks,
        probes: a.probes,
        tightness_test: if a.exact {
            CollisionTest::Exact
        } else {
            CollisionTest::BoundingBox
        },
        jobs: cli.jobs,
        ..VerifyOptions::default()
    };
    let report = verify::verify(suite, &ctx, &o);
    let mut value = serde_json::to_value(&report).map_err(|e| Failure::usage(e.to_string()))?;
    value["config"] = json!(config.fingerprint());
    value["mode"] = json!(mode_name(cli));
    emit_json(cli, &value)?;
    Ok(if report.ok { 0 } else { EXIT_VERIFY })
}
