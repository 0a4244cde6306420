//! Grasp-point selection: sample candidate grasp vertices away from the cut
//! path, train a tensioning policy per candidate against the simulator, and
//! keep the candidate with the best (lowest) symmetric-difference score.
//!
//! Also home to [`SimEnv`], the simulator-backed [`PolicyEnv`] used by the
//! trainer, the evaluator, and the harness.

use std::fmt;
use std::io::{self, Write};

use nalgebra::Vector2;
use rand::Rng;

use crate::cloth::ClothState;
use crate::cutting::{run_cut_episode, validate_episode, CutError, EpisodeConfig};
use crate::geom;
use crate::parallel::map_indexed;
use crate::planner::CutTrajectory;
use crate::scoring::{achieved_mask, intended_mask, symmetric_difference, RegionMask, ScoreError};
use crate::seeds;
use crate::tension::{
    cem_train, evaluate, CemConfig, CemLogRow, PolicyEnv, RolloutOutcome, TensionError,
    TensionPolicy,
};

/// Default candidate count ("many random grasping points").
pub const DEFAULT_CANDIDATES: usize = 20;

/// Default exclusion margin around the pattern, mm: keeps the gripper off
/// the cut path.
pub const DEFAULT_MARGIN_MM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GraspError {
    NotEnoughEligible { eligible: usize, requested: usize },
    NoCandidates,
    AllCandidatesFailed,
    Cut(CutError),
    Score(ScoreError),
    Tension(TensionError),
}

impl fmt::Display for GraspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraspError::NotEnoughEligible { eligible, requested } => write!(
                f,
                "requested {requested} grasp candidates but only {eligible} vertices are eligible"
            ),
            GraspError::NoCandidates => write!(f, "candidate list is empty"),
            GraspError::AllCandidatesFailed => write!(f, "every grasp candidate failed"),
            GraspError::Cut(e) => write!(f, "episode error: {e}"),
            GraspError::Score(e) => write!(f, "scoring error: {e}"),
            GraspError::Tension(e) => write!(f, "training error: {e}"),
        }
    }
}

impl std::error::Error for GraspError {}

impl From<CutError> for GraspError {
    fn from(e: CutError) -> Self {
        GraspError::Cut(e)
    }
}

impl From<ScoreError> for GraspError {
    fn from(e: ScoreError) -> Self {
        GraspError::Score(e)
    }
}

impl From<TensionError> for GraspError {
    fn from(e: TensionError) -> Self {
        GraspError::Tension(e)
    }
}

/// A deterministic simulator-backed episode environment: rolling a policy
/// through it runs one full cut episode from the same initial state and
/// scores the achieved cut against the intended pattern.
pub struct SimEnv {
    state0: ClothState,
    trajectory: CutTrajectory,
    episode: EpisodeConfig,
    grasp_vertex: usize,
    d_max_mm: f64,
    resolution: usize,
    intended: RegionMask,
    pattern_norm: Vec<Vector2<f64>>,
}

impl SimEnv {
    pub fn new(
        state0: ClothState,
        trajectory: CutTrajectory,
        episode: EpisodeConfig,
        grasp_vertex: usize,
        d_max_mm: f64,
        resolution: usize,
    ) -> Result<SimEnv, GraspError> {
        validate_episode(&state0, &trajectory, grasp_vertex, &episode)?;
        let pattern_norm: Vec<Vector2<f64>> = trajectory
            .pattern_polyline_mm
            .iter()
            .map(|p| p / trajectory.scale_mm)
            .collect();
        let intended = intended_mask(&pattern_norm, trajectory.pattern_closed, resolution)?;
        Ok(SimEnv {
            state0,
            trajectory,
            episode,
            grasp_vertex,
            d_max_mm,
            resolution,
            intended,
            pattern_norm,
        })
    }

    pub fn trajectory(&self) -> &CutTrajectory {
        &self.trajectory
    }

    pub fn intended_mask(&self) -> &RegionMask {
        &self.intended
    }

    pub fn pattern_normalized(&self) -> &[Vector2<f64>] {
        &self.pattern_norm
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn initial_state(&self) -> &ClothState {
        &self.state0
    }

    /// Run the episode a rollout performs, returning the full result (for
    /// artifact export).
    pub fn run_episode(&self, policy: &TensionPolicy) -> Result<crate::cutting::EpisodeResult, CutError> {
        run_cut_episode(&self.state0, &self.trajectory, policy, &self.episode)
    }

    /// Normalize achieved material points onto the unit square.
    pub fn normalize_achieved(
        &self,
        achieved_mm: &[Option<Vector2<f64>>],
    ) -> Vec<Option<Vector2<f64>>> {
        achieved_mm
            .iter()
            .map(|opt| {
                opt.map(|p| {
                    Vector2::new(
                        (p.x / self.trajectory.scale_mm).clamp(0.0, 1.0),
                        (p.y / self.trajectory.scale_mm).clamp(0.0, 1.0),
                    )
                })
            })
            .collect()
    }
}

impl PolicyEnv for SimEnv {
    fn horizon(&self) -> usize {
        self.trajectory.waypoints_mm.len()
    }

    fn grasp_vertex(&self) -> usize {
        self.grasp_vertex
    }

    fn d_max_mm(&self) -> f64 {
        self.d_max_mm
    }

    fn rollout(&self, policy: &TensionPolicy) -> RolloutOutcome {
        // Inputs were validated at construction; an episode failure here is
        // a programming error, not an environment condition.
        let result = run_cut_episode(&self.state0, &self.trajectory, policy, &self.episode)
            .expect("validated episode");
        let achieved = self.normalize_achieved(&result.achieved_points());
        let mask = achieved_mask(&achieved, self.resolution).expect("mask resolution valid");
        let score = symmetric_difference(&self.intended, &mask).expect("equal resolutions");
        RolloutOutcome { reward_total: result.reward_total(), sym_diff: score.normalized }
    }
}

/// Sample `k` distinct grasp candidates uniformly without replacement from
/// the eligible vertices: unpinned (a clamped vertex cannot be regrasped)
/// and farther than `margin_mm` from the pattern polyline in material
/// coordinates.
pub fn sample_candidates<R: Rng>(
    state: &ClothState,
    pattern_polyline_mm: &[Vector2<f64>],
    k: usize,
    margin_mm: f64,
    rng: &mut R,
) -> Result<Vec<usize>, GraspError> {
    let mut eligible: Vec<usize> = (0..state.vertex_count())
        .filter(|&v| {
            !state.is_pinned(v)
                && geom::dist_point_polyline(&state.material(v), pattern_polyline_mm) > margin_mm
        })
        .collect();
    if k == 0 {
        return Err(GraspError::NoCandidates);
    }
    if k > eligible.len() {
        return Err(GraspError::NotEnoughEligible { eligible: eligible.len(), requested: k });
    }
    // Partial Fisher–Yates: the first k slots become the sample.
    for i in 0..k {
        let j = rng.gen_range(i..eligible.len());
        eligible.swap(i, j);
    }
    eligible.truncate(k);
    Ok(eligible)
}

/// Outcome of one candidate's train-and-evaluate run.
#[derive(Debug, Clone, PartialEq)]
pub enum GraspStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct GraspReport {
    pub vertex: usize,
    pub material_mm: Vector2<f64>,
    /// Normalized symmetric-difference score of the trained policy (lower
    /// is better); infinity for failed candidates.
    pub score: f64,
    pub reward_total: u32,
    pub status: GraspStatus,
    pub policy: Option<TensionPolicy>,
    pub training_log: Vec<CemLogRow>,
}

/// Write candidate reports as CSV: vertex,mat_x_mm,mat_y_mm,score,reward_total,status.
pub fn write_reports_csv<W: Write>(reports: &[GraspReport], w: &mut W) -> io::Result<()> {
    writeln!(w, "vertex,mat_x_mm,mat_y_mm,score,reward_total,status")?;
    for r in reports {
        let status = match &r.status {
            GraspStatus::Ok => "ok".to_string(),
            GraspStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.vertex, r.material_mm.x, r.material_mm.y, r.score, r.reward_total, status
        )?;
    }
    Ok(())
}

/// Train and evaluate a policy for every candidate, then pick the winner by
/// lowest score (ties → lowest vertex id). Individual candidate failures are
/// recorded in their report and skipped, as long as at least one candidate
/// succeeds. The per-candidate RNG stream is derived from `master_seed` and
/// the vertex id, so adding or removing candidates never perturbs the
/// others. Candidates run concurrently across `threads` workers; results do
/// not depend on the worker count.
pub fn select_grasp(
    state0: &ClothState,
    trajectory: &CutTrajectory,
    candidates: &[usize],
    cem: &CemConfig,
    episode: &EpisodeConfig,
    resolution: usize,
    d_max_mm: f64,
    master_seed: u64,
    threads: usize,
) -> Result<(GraspReport, Vec<GraspReport>), GraspError> {
    if candidates.is_empty() {
        return Err(GraspError::NoCandidates);
    }
    let mut reports = map_indexed(candidates, threads.max(1), |_, &vertex| {
        let material_mm = if vertex < state0.vertex_count() {
            state0.material(vertex)
        } else {
            Vector2::new(f64::NAN, f64::NAN)
        };
        let fail = |msg: String| GraspReport {
            vertex,
            material_mm,
            score: f64::INFINITY,
            reward_total: 0,
            status: GraspStatus::Failed(msg),
            policy: None,
            training_log: Vec::new(),
        };
        let env = match SimEnv::new(
            state0.clone(),
            trajectory.clone(),
            episode.clone(),
            vertex,
            d_max_mm,
            resolution,
        ) {
            Ok(env) => env,
            Err(e) => return fail(e.to_string()),
        };
        let cfg = CemConfig {
            seed: seeds::stream_seed(master_seed, &format!("grasp-candidate-{vertex}")),
            threads: 1,
            ..cem.clone()
        };
        let (policy, log) = match cem_train(&env, &cfg) {
            Ok(x) => x,
            Err(e) => return fail(e.to_string()),
        };
        let outcome = evaluate(&policy, &env);
        GraspReport {
            vertex,
            material_mm,
            score: outcome.sym_diff,
            reward_total: outcome.reward_total,
            status: GraspStatus::Ok,
            policy: Some(policy),
            training_log: log,
        }
    });
    reports.sort_by_key(|r| r.vertex);

    let mut winner: Option<&GraspReport> = None;
    for r in &reports {
        if r.status != GraspStatus::Ok {
            continue;
        }
        let better = match winner {
            None => true,
            Some(w) => r.score < w.score || (r.score == w.score && r.vertex < w.vertex),
        };
        if better {
            winner = Some(r);
        }
    }
    match winner {
        Some(w) => Ok((w.clone(), reports)),
        None => Err(GraspError::AllCandidatesFailed),
    }
}
