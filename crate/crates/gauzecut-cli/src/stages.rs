//! Stage implementations behind the subcommands.
//!
//! Each stage builds its artifacts fully in memory as `(name, bytes)` pairs;
//! a single writer persists them afterwards. All floating-point cells use
//! Rust's shortest-roundtrip `Display`, so equal values always produce equal
//! bytes and reruns are byte-identical. The `pipeline` stage literally
//! concatenates the staged outputs — its `execute` step re-parses the
//! `policy.txt` artifact it just produced, so running the stages in separate
//! processes yields the same bytes.

use anyhow::{anyhow, bail, Context, Result};
use gauzecut::cloth::ClothState;
use gauzecut::cutting::EpisodeConfig;
use gauzecut::grasp::{sample_candidates, select_grasp, write_reports_csv, SimEnv};
use gauzecut::planner::{plan_greedy, CutTrajectory};
use gauzecut::scoring::score_cut;
use gauzecut::seeds;
use gauzecut::stewart::{
    forward_kinematics, inverse_kinematics, leg_residuals_cm, MotionMode, PlatformDims,
    PlatformPose, RangeClass,
};
use gauzecut::sync::{execute as sync_execute, error_budget};
use gauzecut::tension::{cem_train, evaluate, write_training_log, PolicyEnv, TensionPolicy};
use gauzecut::camera::{load_camera_matrix, load_points, pose_for_camera_motion, rigid_inverse_map, CameraModel, PoseOutcome};
use gauzecut::parallel::map_indexed;

use crate::manifest::Artifact;
use crate::scenario::{pattern_notches, Scenario};

/// Named RNG streams: one per stage, so adding a stage never perturbs the
/// draws of another.
const STREAM_TRAIN: &str = "train";
const STREAM_GRASP: &str = "grasp";
const STREAM_GRASP_CANDIDATES: &str = "grasp-candidates";
const STREAM_SYNC_BUDGET: &str = "sync-budget";

fn artifact(name: &str, bytes: Vec<u8>) -> Artifact {
    (name.to_string(), bytes)
}

/// Cloth + trajectory from the scenario blocks (the common cutting setup).
fn cutting_setup(
    scenario: &Scenario,
    needed_for: &'static str,
    threads: usize,
) -> Result<(ClothState, CutTrajectory)> {
    let cloth = scenario.cloth.build()?;
    let pattern = scenario.load_pattern(needed_for)?;
    let trajectory = scenario.plan(&pattern, threads)?;
    Ok((cloth, trajectory))
}

fn sim_env(
    scenario: &Scenario,
    cloth: ClothState,
    trajectory: CutTrajectory,
    grasp_vertex: usize,
) -> Result<SimEnv> {
    SimEnv::new(
        cloth,
        trajectory,
        scenario.episode.config(),
        grasp_vertex,
        scenario.tension.d_max_mm,
        scenario.scoring.resolution,
    )
    .map_err(|e| anyhow!("episode setup: {e}"))
}

/// `plan`: pattern → trajectory.csv + plan_summary.csv.
pub fn plan_stage(scenario: &Scenario, threads: usize) -> Result<Vec<Artifact>> {
    let pattern = scenario.load_pattern("plan")?;
    let trajectory = scenario.plan(&pattern, threads)?;
    let notches = pattern_notches(scenario, &pattern);

    let mut csv = String::from("index,segment,new_segment,x_mm,y_mm\n");
    let mut segment = 0usize;
    for (i, p) in trajectory.waypoints_mm.iter().enumerate() {
        while segment + 1 < trajectory.notch_indices.len()
            && i >= trajectory.notch_indices[segment + 1]
        {
            segment += 1;
        }
        let new_segment = u8::from(trajectory.notch_indices.contains(&i));
        csv.push_str(&format!("{i},{segment},{new_segment},{},{}\n", p.x, p.y));
    }

    let summary = format!(
        "waypoints,segments,pattern_notches,step_length_mm,scale_mm,closed\n{},{},{},{},{},{}\n",
        trajectory.waypoints_mm.len(),
        trajectory.segments_mm.len(),
        notches.len(),
        trajectory.step_length_mm,
        trajectory.scale_mm,
        u8::from(trajectory.pattern_closed),
    );
    Ok(vec![
        artifact("trajectory.csv", csv.into_bytes()),
        artifact("plan_summary.csv", summary.into_bytes()),
    ])
}

fn score_csv(trained: (f64, u32), baseline: (f64, u32)) -> Vec<u8> {
    format!(
        "run,sym_diff,reward_total\ntrained,{},{}\nbaseline,{},{}\n",
        trained.0, trained.1, baseline.0, baseline.1
    )
    .into_bytes()
}

/// `train`: CEM policy search for the fixed grasp vertex.
pub fn train_stage(scenario: &Scenario, threads: usize) -> Result<Vec<Artifact>> {
    let grasp_vertex = scenario.tension.grasp_vertex.ok_or_else(|| {
        anyhow!("`train` requires tension.grasp_vertex in the scenario")
    })?;
    let (cloth, trajectory) = cutting_setup(scenario, "train", threads)?;
    let env = sim_env(scenario, cloth, trajectory, grasp_vertex)?;
    let cem = scenario
        .tension
        .cem(seeds::stream_seed(scenario.seed, STREAM_TRAIN), threads);
    let (policy, log) = cem_train(&env, &cem).map_err(|e| anyhow!("training: {e}"))?;

    let trained = evaluate(&policy, &env);
    let baseline = evaluate(&TensionPolicy::no_tension(grasp_vertex, env.horizon()), &env);

    let mut policy_bytes = Vec::new();
    policy.write(&mut policy_bytes)?;
    let mut log_bytes = Vec::new();
    write_training_log(&log, &mut log_bytes)?;
    Ok(vec![
        artifact("policy.txt", policy_bytes),
        artifact("training_log.csv", log_bytes),
        artifact(
            "train_summary.csv",
            score_csv(
                (trained.sym_diff, trained.reward_total),
                (baseline.sym_diff, baseline.reward_total),
            ),
        ),
    ])
}

/// `grasp`: candidate search; winner's policy becomes `policy.txt`.
pub fn grasp_stage(scenario: &Scenario, threads: usize) -> Result<Vec<Artifact>> {
    let (cloth, trajectory) = cutting_setup(scenario, "grasp", threads)?;
    let candidates = match &scenario.grasp.candidates {
        Some(list) if !list.is_empty() => list.clone(),
        Some(_) => bail!("grasp.candidates must be non-empty when present"),
        None => {
            let margin = scenario
                .grasp
                .margin_mm
                .unwrap_or(2.0 * scenario.cloth.spacing_mm);
            let mut rng = seeds::stream_rng(scenario.seed, STREAM_GRASP_CANDIDATES);
            sample_candidates(
                &cloth,
                &trajectory.pattern_polyline_mm,
                scenario.grasp.k,
                margin,
                &mut rng,
            )
            .map_err(|e| anyhow!("candidate sampling: {e}"))?
        }
    };
    let cem = scenario.tension.cem(0, 1); // seed/threads assigned per candidate
    let (winner, reports) = select_grasp(
        &cloth,
        &trajectory,
        &candidates,
        &cem,
        &scenario.episode.config(),
        scenario.scoring.resolution,
        scenario.tension.d_max_mm,
        seeds::stream_seed(scenario.seed, STREAM_GRASP),
        threads,
    )
    .map_err(|e| anyhow!("grasp selection: {e}"))?;

    let mut reports_bytes = Vec::new();
    write_reports_csv(&reports, &mut reports_bytes)?;
    let mut winner_bytes = Vec::new();
    write_reports_csv(std::slice::from_ref(&winner), &mut winner_bytes)?;
    let policy = winner
        .policy
        .as_ref()
        .ok_or_else(|| anyhow!("winner report carries no policy"))?;
    let mut policy_bytes = Vec::new();
    policy.write(&mut policy_bytes)?;
    Ok(vec![
        artifact("grasp_reports.csv", reports_bytes),
        artifact("grasp_winner.csv", winner_bytes),
        artifact("policy.txt", policy_bytes),
    ])
}

/// `execute`: run the episode under a previously trained policy (bytes of
/// `policy.txt`), with a fresh no-tension baseline alongside.
pub fn execute_stage(
    scenario: &Scenario,
    threads: usize,
    policy_bytes: &[u8],
) -> Result<Vec<Artifact>> {
    let text = std::str::from_utf8(policy_bytes).context("policy.txt is not UTF-8")?;
    let policy = TensionPolicy::parse(text).map_err(|e| anyhow!("policy.txt: {e}"))?;
    let (cloth, trajectory) = cutting_setup(scenario, "execute", threads)?;
    let env = sim_env(scenario, cloth, trajectory, policy.grasp_vertex)?;
    let result = env.run_episode(&policy).map_err(|e| anyhow!("episode: {e}"))?;

    let achieved_mm: Vec<Option<nalgebra::Vector2<f64>>> =
        result.events.iter().map(|e| e.material_point_mm).collect();
    let achieved = env.normalize_achieved(&achieved_mm);
    let trained_score = score_cut(
        env.pattern_normalized(),
        env.trajectory().pattern_closed,
        &achieved,
        scenario.scoring.resolution,
    )
    .map_err(|e| anyhow!("scoring: {e}"))?;
    let baseline = evaluate(
        &TensionPolicy::no_tension(policy.grasp_vertex, env.horizon()),
        &env,
    );

    let mut episode_bytes = Vec::new();
    result.write_csv(&mut episode_bytes)?;
    Ok(vec![
        artifact("episode.csv", episode_bytes),
        artifact(
            "score.csv",
            score_csv(
                (trained_score.normalized, result.reward_total()),
                (baseline.sym_diff, baseline.reward_total),
            ),
        ),
    ])
}

/// `pipeline`: plan → grasp (policy search per candidate) → execute, all
/// composed from the staged artifacts.
pub fn pipeline_stage(scenario: &Scenario, threads: usize) -> Result<Vec<Artifact>> {
    let mut artifacts = plan_stage(scenario, threads)?;
    let grasp_artifacts = grasp_stage(scenario, threads)?;
    let policy_bytes = grasp_artifacts
        .iter()
        .find(|(name, _)| name == "policy.txt")
        .map(|(_, bytes)| bytes.clone())
        .expect("grasp stage produced policy.txt");
    artifacts.extend(grasp_artifacts);
    artifacts.extend(execute_stage(scenario, threads, &policy_bytes)?);
    Ok(artifacts)
}

/// `bench` result: deterministic part + timing part (separate artifacts).
pub struct BenchReport {
    pub episodes: usize,
    pub total_steps: u64,
    pub score: f64,
    pub reward_total: u32,
    pub scores_identical: bool,
    pub wall_s: f64,
    pub episodes_per_s: f64,
    pub steps_per_s: f64,
}

/// Repeated full cut episodes (no-tension policy) for throughput
/// measurement. Episodes are identical by construction; the report records
/// whether their scores actually came out identical as a determinism smoke
/// test. When the scenario has no pattern block, the default is applied: a
/// 64-point circle of 25 mm radius centred on the default 25x25 sheet.
pub fn bench_stage(
    scenario: Option<&Scenario>,
    episodes: usize,
    threads: usize,
) -> Result<(Vec<Artifact>, BenchReport)> {
    if episodes == 0 {
        bail!("bench requires --episodes >= 1");
    }
    let (cloth, trajectory, episode_cfg, resolution, grasp_vertex, d_max) = match scenario {
        Some(s) => {
            let (cloth, trajectory) = cutting_setup(s, "bench", threads)?;
            let grasp_vertex = s.tension.grasp_vertex.unwrap_or(0);
            (
                cloth,
                trajectory,
                s.episode.config(),
                s.scoring.resolution,
                grasp_vertex,
                s.tension.d_max_mm,
            )
        }
        None => {
            let cloth = crate::scenario::ClothBlock::default().build()?;
            let pattern = gauzecut::planner::circle_pattern(
                0.5,
                0.5,
                25.0 / crate::scenario::ClothBlock::default().extent_mm(),
                64,
            )
            .map_err(|e| anyhow!("default pattern: {e}"))?;
            let extent = crate::scenario::ClothBlock::default().extent_mm();
            let trajectory = plan_greedy(&pattern, 60.0, 2.0, extent)
                .map_err(|e| anyhow!("default plan: {e}"))?;
            (
                cloth,
                trajectory,
                EpisodeConfig::default(),
                gauzecut::scoring::DEFAULT_RESOLUTION,
                0,
                gauzecut::tension::DEFAULT_D_MAX_MM,
            )
        }
    };
    let env = SimEnv::new(cloth, trajectory, episode_cfg, grasp_vertex, d_max, resolution)
        .map_err(|e| anyhow!("episode setup: {e}"))?;
    let policy = TensionPolicy::no_tension(grasp_vertex, env.horizon());
    let steps_per_episode = {
        let result = env.run_episode(&policy).map_err(|e| anyhow!("episode: {e}"))?;
        result.steps_run
    };

    let indices: Vec<usize> = (0..episodes).collect();
    let start = std::time::Instant::now();
    let outcomes = map_indexed(&indices, threads.max(1), |_, _| env.rollout(&policy));
    let wall_s = start.elapsed().as_secs_f64();

    let first = &outcomes[0];
    let scores_identical = outcomes
        .iter()
        .all(|o| o.sym_diff == first.sym_diff && o.reward_total == first.reward_total);
    let total_steps = steps_per_episode * episodes as u64;
    let report = BenchReport {
        episodes,
        total_steps,
        score: first.sym_diff,
        reward_total: first.reward_total,
        scores_identical,
        wall_s,
        episodes_per_s: episodes as f64 / wall_s,
        steps_per_s: total_steps as f64 / wall_s,
    };
    let deterministic = format!(
        "episodes,total_engine_steps,score,reward_total,scores_identical\n{},{},{},{},{}\n",
        report.episodes,
        report.total_steps,
        report.score,
        report.reward_total,
        u8::from(report.scores_identical),
    );
    let timing = format!(
        "episodes,threads,wall_s,episodes_per_s,steps_per_s\n{},{},{},{},{}\n",
        report.episodes, threads, report.wall_s, report.episodes_per_s, report.steps_per_s,
    );
    Ok((
        vec![
            artifact("bench.csv", deterministic.into_bytes()),
            artifact("bench_timing.csv", timing.into_bytes()),
        ],
        report,
    ))
}

/// `stewart ik`: six angles + per-leg residual for one pose.
pub fn stewart_ik_stage(pose: &PlatformPose, dims: &PlatformDims) -> Result<Vec<Artifact>> {
    let solution = inverse_kinematics(pose, dims).map_err(|e| anyhow!("ik: {e}"))?;
    let residuals =
        leg_residuals_cm(&solution.angles, pose, dims).map_err(|e| anyhow!("residuals: {e}"))?;
    let range = match solution.range {
        RangeClass::InRange => "in_range",
        RangeClass::OutOfSoftRange => "out_of_soft_range",
    };
    let mut csv = String::from("leg,alpha_deg,residual_cm,range\n");
    for leg in 0..6 {
        csv.push_str(&format!(
            "{leg},{},{},{range}\n",
            solution.angles.alpha_deg[leg], residuals[leg]
        ));
    }
    Ok(vec![artifact("ik.csv", csv.into_bytes())])
}

/// `stewart fk`: pose recovered from six horn angles.
pub fn stewart_fk_stage(
    angles_deg: &[f64; 6],
    dims: &PlatformDims,
    guess: Option<PlatformPose>,
) -> Result<Vec<Artifact>> {
    let angles = gauzecut::stewart::ServoAngles { alpha_deg: *angles_deg };
    let pose = forward_kinematics(&angles, dims, guess).map_err(|e| anyhow!("fk: {e}"))?;
    let residuals =
        leg_residuals_cm(&angles, &pose, dims).map_err(|e| anyhow!("residuals: {e}"))?;
    let norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    let csv = format!(
        "x_cm,y_cm,z_cm,roll_deg,pitch_deg,yaw_deg,residual_norm_cm\n{},{},{},{},{},{},{}\n",
        pose.x_cm, pose.y_cm, pose.z_cm, pose.roll_deg, pose.pitch_deg, pose.yaw_deg, norm
    );
    Ok(vec![artifact("fk.csv", csv.into_bytes())])
}

/// `stewart mode`: sampled displacement profile on the servo clock.
pub fn stewart_mode_stage(
    mode: &MotionMode,
    duration_s: f64,
    rate_hz: f64,
) -> Result<Vec<Artifact>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        bail!("--duration-s must be positive");
    }
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        bail!("--rate-hz must be positive");
    }
    let samples = (duration_s * rate_hz).round() as usize;
    let mut csv = String::from("t_s,displacement\n");
    for k in 0..=samples {
        let t = k as f64 / rate_hz;
        csv.push_str(&format!("{t},{}\n", mode.displacement(t)));
    }
    Ok(vec![artifact("mode.csv", csv.into_bytes())])
}

/// `sync run`: one perfect-estimate controller execution (the estimate
/// equals the true wave; latency is the deterministic mean).
pub fn sync_run_stage(scenario: &Scenario) -> Result<Vec<Artifact>> {
    let controller = scenario.sync.controller()?;
    let truth = scenario.sync.wave();
    let trace = sync_execute(
        &controller,
        &scenario.sync.execute_config(),
        &truth,
        &truth,
        scenario.sync.latency_mean_s,
    )
    .map_err(|e| anyhow!("sync run: {e}"))?;
    let mut trace_bytes = Vec::new();
    trace.write_csv(&mut trace_bytes)?;
    let completed = trace
        .completed_at_s
        .map_or("none".to_string(), |t| t.to_string());
    let summary = format!(
        "controller,max_error_mm,rms_error_mm,completed_at_s\n{},{},{},{completed}\n",
        controller.name(),
        trace.max_error_mm,
        trace.rms_error_mm,
    );
    Ok(vec![
        artifact("sync_trace.csv", trace_bytes),
        artifact("sync_run_summary.csv", summary.into_bytes()),
    ])
}

/// `sync budget`: Monte-Carlo noise study plus the analytic bounds.
pub fn sync_budget_stage(scenario: &Scenario, threads: usize) -> Result<Vec<Artifact>> {
    let controller = scenario.sync.controller()?;
    let report = error_budget(
        &scenario.sync.model(),
        &controller,
        scenario.sync.trials,
        seeds::stream_seed(scenario.seed, STREAM_SYNC_BUDGET),
        &scenario.sync.execute_config(),
        threads,
    )
    .map_err(|e| anyhow!("error budget: {e}"))?;
    let mut trials_bytes = Vec::new();
    report.write_csv(&mut trials_bytes)?;
    let a = &report.analytic;
    let summary = format!(
        "controller,trials,pooled_rms_mm,worst_mm,unit_slope_phase_mm,unit_slope_total_mm,physical_phase_mm,physical_total_mm\n{},{},{},{},{},{},{},{}\n",
        controller.name(),
        report.per_trial.len(),
        report.rms_mm,
        report.worst_mm,
        a.unit_slope_phase_mm,
        a.unit_slope_total_mm,
        a.physical_phase_mm,
        a.physical_total_mm,
    );
    Ok(vec![
        artifact("sync_budget.csv", trials_bytes),
        artifact("sync_budget_summary.csv", summary.into_bytes()),
    ])
}

/// `camera map`: pull the observed image transform back to a rigid world
/// motion and convert it to a platform pose command.
pub fn camera_map_stage(scenario: &Scenario) -> Result<Vec<Artifact>> {
    let block = scenario.camera_block("camera map")?;
    let matrix = load_camera_matrix(scenario.resolve(&block.matrix_path))
        .map_err(|e| anyhow!("camera matrix: {e}"))?;
    let points = load_points(scenario.resolve(&block.points_path))
        .map_err(|e| anyhow!("camera points: {e}"))?;
    let model = CameraModel::new(matrix, points).map_err(|e| anyhow!("camera model: {e}"))?;
    let fit = rigid_inverse_map(&model, &block.image_transform())
        .map_err(|e| anyhow!("rigid fit: {e}"))?;

    let mut rigid_bytes = Vec::new();
    fit.transform.write_row_csv(&mut rigid_bytes)?;
    let mut residuals = String::from("sample,residual_mm\n");
    for (k, r) in fit.residuals_mm.iter().enumerate() {
        residuals.push_str(&format!("{k},{r}\n"));
    }
    let (outcome, pose) = match pose_for_camera_motion(&fit.transform) {
        PoseOutcome::InRange(pose) => ("in_range", pose),
        PoseOutcome::OutOfRange { clamped, .. } => ("clamped", clamped),
    };
    let pose_csv = format!(
        "outcome,x_cm,y_cm,z_cm,roll_deg,pitch_deg,yaw_deg,max_residual_mm\n{outcome},{},{},{},{},{},{},{}\n",
        pose.x_cm,
        pose.y_cm,
        pose.z_cm,
        pose.roll_deg,
        pose.pitch_deg,
        pose.yaw_deg,
        fit.max_residual_mm(),
    );
    Ok(vec![
        artifact("camera_rigid.csv", rigid_bytes),
        artifact("camera_residuals.csv", residuals.into_bytes()),
        artifact("camera_pose.csv", pose_csv.into_bytes()),
    ])
}
