//! `riswb`: optimize, evaluate and export phase profiles for a wideband
//! liquid-crystal reconfigurable surface.
//!
//! Commands that read a scenario write a manifest before their results and
//! each CSV names that manifest in its metadata line. Failures, including
//! usage errors, exit with status 2 and a JSON object on stderr.

use clap::{Args, Parser, Subcommand, ValueEnum};
use riswb_core::benchmarks::{evaluate_profile, run_method, Method, RunOptions};
use riswb_core::evaluation::{heatmap, runtime_sweep, squint_vs_frequency, squint_vs_size, HeatMapSpec, SquintSetup};
use riswb_core::io::{
    heatmap_csv, phase_csv, read_phase_csv, report_csv, runtime_csv, squint_csv, write_atomic, CsvMeta, IterationRecord,
    RunManifest,
};
use riswb_core::lc_phase::PhaseProfile;
use riswb_core::scalable::Aggregation;
use riswb_core::scenario::{load_scenario, Region, Scenario};
use riswb_core::secrecy::{EvalMode, LinkEvaluator};
use riswb_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const MANIFEST: &str = "manifest.json";

#[derive(Parser)]
#[command(name = "riswb", version, about = "Wideband secrecy-aware phase design for liquid-crystal surfaces")]
struct Cli {
    /// Worker threads (default: logical cores); RIS_WB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a phase profile and write phases, report, iteration log and manifest.
    Optimize(OptimizeArgs),
    /// Evaluate a stored phase profile.
    Evaluate(EvaluateArgs),
    /// Beam-squint study of a center-matched uniform linear array.
    Squint(SquintArgs),
    /// Wall time of one method over surface sizes.
    RuntimeSweep(RuntimeArgs),
    /// Rewrite a phase file, adding control voltages when an LC material is configured.
    ExportPhases(ExportArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML or JSON).
    #[arg(short = 'c', long = "config")]
    config: PathBuf,
    /// Seed; defaults to the scenario's.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Los,
    Blocked,
    Rician,
}

#[derive(Args)]
struct ModeArgs {
    /// Channel model used for evaluation.
    #[arg(long, value_enum, default_value = "los")]
    mode: ModeArg,
    /// Monte-Carlo draws in Rician mode.
    #[arg(long, default_value_t = 20)]
    realizations: usize,
}

impl ModeArgs {
    fn mode(&self) -> EvalMode {
        match self.mode {
            ModeArg::Los => EvalMode::LosOnly,
            ModeArg::Blocked => EvalMode::LosBlocked,
            ModeArg::Rician => EvalMode::Rician { realizations: self.realizations },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Literal,
    ChainRule,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// sdp, scalable, benchmark1, benchmark2 or benchmark3.
    #[arg(long)]
    method: String,
    #[command(flatten)]
    mode: ModeArgs,
    /// How the scalable update combines frequencies.
    #[arg(long, value_enum, default_value = "chain-rule")]
    aggregation: AggregationArg,
    /// Keep the SDP penalty weight across outer iterations.
    #[arg(long)]
    eta_persist: bool,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Phase CSV from a previous run.
    #[arg(long)]
    phases: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    /// Write an SNR heat map at each of these frequencies (Hz).
    #[arg(long = "heatmap-freq")]
    heatmap_freq: Vec<f64>,
    /// Heat-map cells along x and y.
    #[arg(long, default_value_t = 200)]
    nx: usize,
    #[arg(long, default_value_t = 200)]
    ny: usize,
    /// Write the worst-case secrecy rate per evaluation frequency.
    #[arg(long)]
    sr_curve: bool,
    /// Write the squint study for a linear array with the scenario's size and band.
    #[arg(long)]
    squint: bool,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SquintArgs {
    #[arg(long, default_value_t = 60e9)]
    center_hz: f64,
    #[arg(long, default_value_t = 8e9)]
    bandwidth_hz: f64,
    /// Receiver distance in meters.
    #[arg(long, default_value_t = 25.0)]
    distance: f64,
    /// Receiver angle off broadside in degrees.
    #[arg(long, default_value_t = 45.0)]
    angle: f64,
    /// Frequency samples across the band.
    #[arg(long, default_value_t = 401)]
    freq_points: usize,
    /// Array sizes; one size gives the per-frequency curve, several give
    /// the band minimum per size.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    sizes: Vec<usize>,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RuntimeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    method: String,
    /// Surface sizes; the surface is an `N × 1` array.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,300")]
    sizes: Vec<usize>,
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    phases: PathBuf,
    /// Output phase CSV.
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = serde_json::json!({ "error": "usage", "message": e.render().to_string().trim() });
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
        Error::Validation(_) => "validation",
        Error::DegenerateGeometry(_) | Error::DegenerateImage => "geometry",
        Error::Dispersion { .. } => "dispersion",
        Error::TaylorReference(_) => "taylor_reference",
        Error::InvalidArgument(_) | Error::UnknownBenchmark(_) => "invalid_argument",
        Error::ProfileLength { .. } => "profile_length",
        Error::Solver { .. } => "solver",
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    match std::env::var("RIS_WB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("RIS_WB_THREADS must be a thread count, got '{v}'"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Optimize(a) => optimize(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Squint(a) => squint(a),
        Command::RuntimeSweep(a) => runtime(a),
        Command::ExportPhases(a) => export(a),
    }
}

/// Scenario, the hash of the file as given, and the effective seed.
fn load(args: &ScenarioArgs) -> Result<(Scenario, String, u64), Error> {
    let scenario = load_scenario(&args.config)?;
    let hash = scenario.hash();
    match args.seed {
        Some(seed) if seed != scenario.hyper.seed => Ok((scenario.with_seed(seed)?, hash, seed)),
        _ => {
            let seed = scenario.hyper.seed;
            Ok((scenario, hash, seed))
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn corners(r: &Region) -> [[f64; 3]; 2] {
    [[r.min.x, r.min.y, r.min.z], [r.max.x, r.max.y, r.max.z]]
}

fn write_manifest(
    dir: &Path,
    command: &str,
    method: Option<&str>,
    scenario: &Scenario,
    hash: &str,
    seed: u64,
    outputs: &[String],
) -> Result<(), Error> {
    write_manifest_as(dir, MANIFEST, command, method, scenario, hash, seed, outputs)
}

#[allow(clippy::too_many_arguments)]
fn write_manifest_as(
    dir: &Path,
    file: &str,
    command: &str,
    method: Option<&str>,
    scenario: &Scenario,
    hash: &str,
    seed: u64,
    outputs: &[String],
) -> Result<(), Error> {
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        method: method.map(str::to_string),
        scenario_hash: hash.into(),
        seed,
        hyperparameters: scenario.hyper.clone(),
        outputs: outputs.to_vec(),
        user_region: corners(&scenario.user_region),
        eve_region: corners(&scenario.eve_region),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(file), text.as_bytes())
}

fn meta(kind: &str, hash: &str, seed: u64, method: Option<&str>, mode: Option<&str>) -> CsvMeta {
    CsvMeta {
        manifest: Some(MANIFEST.into()),
        method: method.map(str::to_string),
        mode: mode.map(str::to_string),
        ..CsvMeta::new(kind, hash, seed)
    }
}

fn optimize(a: OptimizeArgs) -> Result<(), Error> {
    let method: Method = a.method.parse()?;
    let (scenario, hash, seed) = load(&a.scenario)?;
    ensure_dir(&a.out)?;
    let outputs = ["phases.csv", "report.csv", "iterations.jsonl"].map(String::from);
    let name = method.to_string();
    write_manifest(&a.out, "optimize", Some(&name), &scenario, &hash, seed, &outputs)?;

    let options = RunOptions {
        aggregation: match a.aggregation {
            AggregationArg::Literal => Aggregation::Literal,
            AggregationArg::ChainRule => Aggregation::ChainRule,
        },
        eta_persist: a.eta_persist,
        mode: a.mode.mode(),
    };
    let mut log = String::new();
    let mut push = |r: &IterationRecord| {
        log.push_str(&serde_json::to_string(r).expect("record serializes"));
        log.push('\n');
    };
    let run = run_method(&scenario, method, seed, &options, &mut push)?;
    log::info!("{name}: band-minimum secrecy rate {:.4} bits/symbol", run.report.band_min_bits);

    let mode = options.mode.label();
    let phases = phase_csv(&meta("phases", &hash, seed, Some(&name), None), &run.profile, scenario.lc.material.as_ref());
    write_atomic(&a.out.join(&outputs[0]), phases.as_bytes())?;
    let report = report_csv(&meta("report", &hash, seed, Some(&name), Some(mode)), &run.report);
    write_atomic(&a.out.join(&outputs[1]), report.as_bytes())?;
    write_atomic(&a.out.join(&outputs[2]), log.as_bytes())
}

fn read_profile(path: &Path, scenario: &Scenario) -> Result<PhaseProfile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let phases = read_phase_csv(&text)?;
    let profile = PhaseProfile::new(&phases, scenario.lc.beta, scenario.freq.center_hz);
    LinkEvaluator::new(scenario)?.check_profile(&profile)?;
    Ok(profile)
}

fn evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let (scenario, hash, seed) = load(&a.scenario)?;
    let profile = read_profile(&a.phases, &scenario)?;
    if a.heatmap_freq.is_empty() && !a.sr_curve && !a.squint {
        return Err(Error::InvalidArgument("nothing to do: pass --heatmap-freq, --sr-curve or --squint".into()));
    }
    ensure_dir(&a.out)?;
    let heat_names: Vec<String> = a.heatmap_freq.iter().map(|f| format!("heatmap_{:.0}.csv", f)).collect();
    let mut outputs = heat_names.clone();
    if a.sr_curve {
        outputs.push("sr_curve.csv".into());
    }
    if a.squint {
        outputs.push("squint.csv".into());
    }
    write_manifest(&a.out, "evaluate", None, &scenario, &hash, seed, &outputs)?;

    let mode = a.mode.mode();
    let evaluator = LinkEvaluator::new(&scenario)?;
    let spec = HeatMapSpec { nx: a.nx, ny: a.ny, ..HeatMapSpec::default() };
    for (&f, name) in a.heatmap_freq.iter().zip(&heat_names) {
        let grid = heatmap(&evaluator, &profile, f, &spec, mode)?;
        let text = heatmap_csv(&meta("heatmap", &hash, seed, None, Some(mode.label())), &grid);
        write_atomic(&a.out.join(name), text.as_bytes())?;
    }
    if a.sr_curve {
        let report = evaluate_profile(&scenario, &profile, mode)?;
        let text = report_csv(&meta("sr_curve", &hash, seed, None, Some(mode.label())), &report);
        write_atomic(&a.out.join("sr_curve.csv"), text.as_bytes())?;
    }
    if a.squint {
        let setup = SquintSetup::new(scenario.freq.center_hz, scenario.freq.bandwidth_hz);
        let study = squint_vs_frequency(&setup, scenario.ris_len())?;
        let text = squint_csv(&meta("squint", &hash, seed, None, None), &study);
        write_atomic(&a.out.join("squint.csv"), text.as_bytes())?;
    }
    Ok(())
}

fn squint(a: SquintArgs) -> Result<(), Error> {
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(Error::InvalidArgument("array sizes must be positive".into()));
    }
    if a.freq_points == 0 {
        return Err(Error::InvalidArgument("at least one frequency sample is required".into()));
    }
    let setup = SquintSetup {
        distance_m: a.distance,
        angle_deg: a.angle,
        freq_points: a.freq_points,
        ..SquintSetup::new(a.center_hz, a.bandwidth_hz)
    };
    let study = match a.sizes.as_slice() {
        [n] => squint_vs_frequency(&setup, *n)?,
        sizes => squint_vs_size(&setup, sizes)?,
    };
    ensure_dir(&a.out)?;
    // the study does not depend on a scenario; its hash covers the setup
    let hash = format!("squint:{}:{}:{}:{}", a.center_hz, a.bandwidth_hz, a.distance, a.angle);
    write_atomic(&a.out.join("squint.csv"), squint_csv(&CsvMeta::new("squint", &hash, 0), &study).as_bytes())
}

fn runtime(a: RuntimeArgs) -> Result<(), Error> {
    let method: Method = a.method.parse()?;
    let (scenario, hash, seed) = load(&a.scenario)?;
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(Error::InvalidArgument("surface sizes must be positive".into()));
    }
    ensure_dir(&a.out)?;
    let name = method.to_string();
    write_manifest(&a.out, "runtime-sweep", Some(&name), &scenario, &hash, seed, &["runtime.csv".into()])?;
    let rows = runtime_sweep(&a.sizes, |n| {
        let sized = scenario.modified(|c| c.arrays.ris_shape = [n, 1])?;
        run_method(&sized, method, seed, &RunOptions::default(), &mut |_| {})?;
        log::info!("{name}: N = {n} done");
        Ok(())
    })?;
    let text = runtime_csv(&meta("runtime", &hash, seed, Some(&name), None), &rows);
    write_atomic(&a.out.join("runtime.csv"), text.as_bytes())
}

fn export(a: ExportArgs) -> Result<(), Error> {
    let (scenario, hash, seed) = load(&a.scenario)?;
    let profile = read_profile(&a.phases, &scenario)?;
    let file = a
        .out
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: not a file path", a.out.display())))?
        .to_string_lossy()
        .into_owned();
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    ensure_dir(dir)?;
    // sibling manifest so an export next to a run does not replace the run's
    let manifest = format!("{file}.manifest.json");
    write_manifest_as(dir, &manifest, "export-phases", None, &scenario, &hash, seed, &[file])?;
    let m = CsvMeta { manifest: Some(manifest), ..CsvMeta::new("phases", &hash, seed) };
    let text = phase_csv(&m, &profile, scenario.lc.material.as_ref());
    write_atomic(&a.out, text.as_bytes())
}
