//! `gauzecut` — command-line harness for the gauze-cutting toolkit.
//!
//! Subcommands mirror the pipeline stages (`plan`, `train`, `grasp`,
//! `execute`, `pipeline`) plus utilities (`stewart`, `sync`, `camera`,
//! `bench`). Every run writes its artifacts and a manifest into one output
//! directory; any failure prints a machine-readable error record to stderr
//! (and `error.toml` when the output directory is known) and exits nonzero.

mod manifest;
mod scenario;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use gauzecut::stewart::{MotionMode, PlatformPose};

use manifest::{emit_error, persist_run, Artifact};
use scenario::{parse_motion_kind, Scenario};

/// Environment variable naming the default output root directory.
const OUT_ROOT_ENV: &str = "GAUZECUT_OUT_ROOT";

#[derive(Parser)]
#[command(name = "gauzecut", version, about = "Gauze-cutting simulation and policy-search harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a cut trajectory from the scenario's pattern.
    Plan(RunArgs),
    /// Train a tension policy for the scenario's grasp vertex.
    Train(RunArgs),
    /// Search grasp candidates; the winner's policy becomes policy.txt.
    Grasp(RunArgs),
    /// Run the cut episode under a previously produced policy.txt.
    Execute(ExecuteArgs),
    /// plan + grasp + execute in one run, composed from the staged outputs.
    Pipeline(RunArgs),
    /// Stewart-platform kinematics utilities.
    Stewart {
        #[command(subcommand)]
        cmd: StewartCmd,
    },
    /// Cutting-under-motion controller studies.
    Sync {
        #[command(subcommand)]
        cmd: SyncCmd,
    },
    /// Movable-camera rigid-transform utilities.
    Camera {
        #[command(subcommand)]
        cmd: CameraCmd,
    },
    /// Throughput benchmark: repeated full cut episodes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides scenario output_dir and the env root).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override (the scenario seed is used otherwise).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (never affects results).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct ExecuteArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Policy file to execute (default: <out>/policy.txt).
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StewartCmd {
    /// Inverse kinematics: pose -> six horn angles + residuals.
    Ik(StewartPoseArgs),
    /// Forward kinematics: six horn angles -> pose.
    Fk(StewartFkArgs),
    /// Sample a motion mode's displacement profile.
    Mode(StewartModeArgs),
}

#[derive(Args)]
struct StewartPoseArgs {
    /// Pose as "x_cm,y_cm,z_cm,roll_deg,pitch_deg,yaw_deg" (home-relative).
    #[arg(long)]
    pose: String,
    /// Scenario supplying platform dims (defaults otherwise).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StewartFkArgs {
    /// Six horn angles, degrees, comma-separated.
    #[arg(long)]
    angles: String,
    /// Optional initial pose guess, same format as --pose.
    #[arg(long)]
    guess: Option<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StewartModeArgs {
    /// x | y | z | roll | pitch | yaw
    #[arg(long)]
    axis: String,
    /// sinusoid | breathing
    #[arg(long)]
    kind: String,
    /// cm for translation axes, degrees for rotation axes.
    #[arg(long)]
    amplitude: f64,
    #[arg(long)]
    freq_hz: f64,
    #[arg(long, default_value_t = 10.0)]
    duration_s: f64,
    /// Output sample rate, Hz.
    #[arg(long, default_value_t = 200.0)]
    rate_hz: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SyncCmd {
    /// Monte-Carlo error budget under the scenario's noise model.
    Budget(RunArgs),
    /// One perfect-estimate controller execution.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum CameraCmd {
    /// Fit the rigid world motion behind an observed image transform.
    Map(RunArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario (optional; the default 25x25 circle setup otherwise).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Number of full cut episodes to run.
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Output directory for commands without a scenario: --out, then
/// $GAUZECUT_OUT_ROOT/<label>, then ./gauzecut-out/<label>.
fn flag_out_dir(out: &Option<PathBuf>, label: &str) -> PathBuf {
    if let Some(dir) = out {
        return dir.clone();
    }
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) => Path::new(&root).join(label),
        None => Path::new("gauzecut-out").join(label),
    }
}

/// Output directory for scenario commands: --out, then the scenario's
/// output_dir, then the env/default root under the scenario's file stem.
fn scenario_out_dir(out: &Option<PathBuf>, scenario: &Scenario, path: &Path) -> PathBuf {
    if let Some(dir) = out {
        return dir.clone();
    }
    if let Some(dir) = &scenario.output_dir {
        return PathBuf::from(dir);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    flag_out_dir(&None, &stem)
}

fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn parse_floats<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(anyhow!("{what} needs {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0f64; N];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse::<f64>()
            .with_context(|| format!("{what}: bad number {p:?}"))?;
    }
    Ok(out)
}

fn parse_pose(text: &str) -> Result<PlatformPose> {
    let v = parse_floats::<6>(text, "--pose")?;
    Ok(PlatformPose::from_array(v))
}

fn dims_from(scenario_path: &Option<PathBuf>) -> Result<gauzecut::stewart::PlatformDims> {
    match scenario_path {
        Some(path) => Ok(Scenario::load(path)?.platform.dims()),
        None => Ok(gauzecut::stewart::PlatformDims::default()),
    }
}

/// A fully resolved run ready to persist: where, what, and the manifest
/// context it is recorded under.
struct RunOutput {
    command: &'static str,
    out_dir: PathBuf,
    scenario_path: Option<String>,
    canonical_config: String,
    seed: Option<u64>,
    threads: usize,
    artifacts: Vec<Artifact>,
    /// Human summary printed on success.
    summary: String,
}

fn scenario_run(
    command: &'static str,
    args: &RunArgs,
    stage: impl FnOnce(&Scenario, usize) -> Result<Vec<Artifact>>,
    summarize: impl FnOnce(&Scenario, &[Artifact]) -> String,
) -> Result<RunOutput> {
    let scenario = load_scenario(&args.scenario, args.seed)?;
    let out_dir = scenario_out_dir(&args.out, &scenario, &args.scenario);
    let artifacts = stage(&scenario, args.threads)?;
    let summary = summarize(&scenario, &artifacts);
    Ok(RunOutput {
        command,
        out_dir,
        scenario_path: Some(args.scenario.display().to_string()),
        canonical_config: scenario.canonical(),
        seed: Some(scenario.seed),
        threads: args.threads,
        artifacts,
        summary,
    })
}

fn count_lines(artifacts: &[Artifact], name: &str) -> usize {
    artifacts
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, b)| b.iter().filter(|&&c| c == b'\n').count().saturating_sub(1))
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<RunOutput> {
    match cli.command {
        Command::Plan(args) => scenario_run(
            "plan",
            &args,
            stages::plan_stage,
            |_, artifacts| format!("planned {} waypoints", count_lines(artifacts, "trajectory.csv")),
        ),
        Command::Train(args) => scenario_run(
            "train",
            &args,
            stages::train_stage,
            |s, _| format!("trained policy for grasp vertex {:?}", s.tension.grasp_vertex),
        ),
        Command::Grasp(args) => scenario_run(
            "grasp",
            &args,
            stages::grasp_stage,
            |_, artifacts| {
                format!("evaluated {} candidates", count_lines(artifacts, "grasp_reports.csv"))
            },
        ),
        Command::Execute(args) => {
            let scenario = load_scenario(&args.run.scenario, args.run.seed)?;
            let out_dir = scenario_out_dir(&args.run.out, &scenario, &args.run.scenario);
            let policy_path = args.policy.clone().unwrap_or_else(|| out_dir.join("policy.txt"));
            let policy_bytes = std::fs::read(&policy_path).with_context(|| {
                format!(
                    "cannot read policy file {} (run `train` or `grasp` first, or pass --policy)",
                    policy_path.display()
                )
            })?;
            let artifacts = stages::execute_stage(&scenario, args.run.threads, &policy_bytes)?;
            Ok(RunOutput {
                command: "execute",
                out_dir,
                scenario_path: Some(args.run.scenario.display().to_string()),
                canonical_config: scenario.canonical(),
                seed: Some(scenario.seed),
                threads: args.run.threads,
                artifacts,
                summary: "episode executed".to_string(),
            })
        }
        Command::Pipeline(args) => scenario_run(
            "pipeline",
            &args,
            stages::pipeline_stage,
            |_, artifacts| {
                let score = artifacts
                    .iter()
                    .find(|(n, _)| n == "score.csv")
                    .and_then(|(_, b)| String::from_utf8_lossy(b).lines().nth(1).map(String::from))
                    .unwrap_or_default();
                format!("pipeline complete; {score}")
            },
        ),
        Command::Stewart { cmd } => match cmd {
            StewartCmd::Ik(args) => {
                let pose = parse_pose(&args.pose)?;
                let dims = dims_from(&args.scenario)?;
                let artifacts = stages::stewart_ik_stage(&pose, &dims)?;
                Ok(RunOutput {
                    command: "stewart-ik",
                    out_dir: flag_out_dir(&args.out, "stewart-ik"),
                    scenario_path: args.scenario.as_ref().map(|p| p.display().to_string()),
                    canonical_config: format!("pose = {:?}\n", pose.as_array()),
                    seed: None,
                    threads: 1,
                    artifacts,
                    summary: "ik solved".to_string(),
                })
            }
            StewartCmd::Fk(args) => {
                let angles = parse_floats::<6>(&args.angles, "--angles")?;
                let guess = args.guess.as_deref().map(parse_pose).transpose()?;
                let dims = dims_from(&args.scenario)?;
                let artifacts = stages::stewart_fk_stage(&angles, &dims, guess)?;
                Ok(RunOutput {
                    command: "stewart-fk",
                    out_dir: flag_out_dir(&args.out, "stewart-fk"),
                    scenario_path: args.scenario.as_ref().map(|p| p.display().to_string()),
                    canonical_config: format!("angles = {angles:?}\n"),
                    seed: None,
                    threads: 1,
                    artifacts,
                    summary: "fk solved".to_string(),
                })
            }
            StewartCmd::Mode(args) => {
                let axis = gauzecut::stewart::MotionAxis::parse(&args.axis)
                    .ok_or_else(|| anyhow!("unknown axis {:?}", args.axis))?;
                let kind = parse_motion_kind(&args.kind)?;
                let mode = MotionMode::new(axis, kind, args.amplitude, args.freq_hz)
                    .map_err(|e| anyhow!("motion mode: {e}"))?;
                let artifacts = stages::stewart_mode_stage(&mode, args.duration_s, args.rate_hz)?;
                Ok(RunOutput {
                    command: "stewart-mode",
                    out_dir: flag_out_dir(&args.out, "stewart-mode"),
                    scenario_path: None,
                    canonical_config: format!(
                        "axis = {:?}\nkind = {:?}\namplitude = {}\nfreq_hz = {}\n",
                        args.axis, args.kind, args.amplitude, args.freq_hz
                    ),
                    seed: None,
                    threads: 1,
                    artifacts,
                    summary: format!("sampled {} rows", (args.duration_s * args.rate_hz) as usize + 1),
                })
            }
        },
        Command::Sync { cmd } => match cmd {
            SyncCmd::Budget(args) => scenario_run(
                "sync-budget",
                &args,
                |s, threads| stages::sync_budget_stage(s, threads),
                |s, _| format!("{} trials pooled", s.sync.trials),
            ),
            SyncCmd::Run(args) => scenario_run(
                "sync-run",
                &args,
                |s, _| stages::sync_run_stage(s),
                |s, _| format!("controller {} executed", s.sync.controller),
            ),
        },
        Command::Camera { cmd } => match cmd {
            CameraCmd::Map(args) => scenario_run(
                "camera-map",
                &args,
                |s, _| stages::camera_map_stage(s),
                |_, _| "rigid fit complete".to_string(),
            ),
        },
        Command::Bench(args) => {
            let scenario = args
                .scenario
                .as_ref()
                .map(|p| load_scenario(p, None))
                .transpose()?;
            let (artifacts, report) =
                stages::bench_stage(scenario.as_ref(), args.episodes, args.threads)?;
            let out_dir = match (&args.out, &scenario, &args.scenario) {
                (out @ Some(_), _, _) => flag_out_dir(out, "bench"),
                (None, Some(s), Some(path)) => scenario_out_dir(&None, s, path),
                _ => flag_out_dir(&None, "bench"),
            };
            Ok(RunOutput {
                command: "bench",
                out_dir,
                scenario_path: args.scenario.as_ref().map(|p| p.display().to_string()),
                canonical_config: scenario
                    .as_ref()
                    .map(|s| s.canonical())
                    .unwrap_or_else(|| "default *= true\n".to_string()),
                seed: scenario.as_ref().map(|s| s.seed),
                threads: args.threads,
                artifacts,
                summary: format!(
                    "{} episodes in {:.3} s: {:.1} episodes/s, {:.0} steps/s",
                    report.episodes, report.wall_s, report.episodes_per_s, report.steps_per_s
                ),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Remember enough context to route the error record before consuming the
    // command in `run`.
    let (command_label, out_hint) = describe(&cli.command);
    match run(cli) {
        Ok(output) => {
            match persist_run(
                &output.out_dir,
                output.command,
                output.scenario_path.as_deref(),
                &output.canonical_config,
                output.seed,
                output.threads,
                &output.artifacts,
            ) {
                Ok(_) => {
                    println!("{}: {} -> {}", output.command, output.summary, output.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    emit_error(Some(&output.out_dir), output.command, format!("write artifacts: {e}"));
                    ExitCode::FAILURE
                }
            }
        }
        Err(e) => {
            emit_error(out_hint.as_deref(), command_label, format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

/// Command label + best-effort output dir for error records (the full
/// resolution may itself be what failed).
fn describe(command: &Command) -> (&'static str, Option<PathBuf>) {
    match command {
        Command::Plan(a) => ("plan", a.out.clone()),
        Command::Train(a) => ("train", a.out.clone()),
        Command::Grasp(a) => ("grasp", a.out.clone()),
        Command::Execute(a) => ("execute", a.run.out.clone()),
        Command::Pipeline(a) => ("pipeline", a.out.clone()),
        Command::Stewart { cmd } => match cmd {
            StewartCmd::Ik(a) => ("stewart-ik", a.out.clone()),
            StewartCmd::Fk(a) => ("stewart-fk", a.out.clone()),
            StewartCmd::Mode(a) => ("stewart-mode", a.out.clone()),
        },
        Command::Sync { cmd } => match cmd {
            SyncCmd::Budget(a) => ("sync-budget", a.out.clone()),
            SyncCmd::Run(a) => ("sync-run", a.out.clone()),
        },
        Command::Camera { cmd } => match cmd {
            CameraCmd::Map(a) => ("camera-map", a.out.clone()),
        },
        Command::Bench(a) => ("bench", a.out.clone()),
    }
}
