//! Tensioning policies and the cross-entropy policy search.
//!
//! The tensioning problem is a finite-horizon MDP: at each trajectory index
//! the gripper holding the gauze may move 1 mm in a cardinal direction or
//! stay, with accumulated displacement clamped to ±D_max per component. The
//! simulator is deterministic, so a time-indexed open-loop action sequence
//! realizes any state policy exactly; the trainer searches that sequence
//! space with the cross-entropy method over per-step categorical action
//! distributions.

use std::fmt;
use std::io::{self, Write};

use nalgebra::Vector2;
use rand::Rng;

use crate::cutting::CutEvent;
use crate::geom;
use crate::parallel::map_indexed;
use crate::planner::CutTrajectory;
use crate::seeds;

/// Default per-component displacement bound, mm (safe gauze stretch at the
/// 4-inch sheet scale).
pub const DEFAULT_D_MAX_MM: f64 = 15.0;

/// Default per-action gripper step, mm.
pub const DEFAULT_STEP_MM: f64 = 1.0;

/// Additive smoothing applied when refitting action distributions.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// The five tensioning actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensionAction {
    Stay,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

pub const ACTIONS: [TensionAction; 5] = [
    TensionAction::Stay,
    TensionAction::PlusX,
    TensionAction::MinusX,
    TensionAction::PlusY,
    TensionAction::MinusY,
];

impl TensionAction {
    pub fn delta_mm(self, step_mm: f64) -> Vector2<f64> {
        match self {
            TensionAction::Stay => Vector2::new(0.0, 0.0),
            TensionAction::PlusX => Vector2::new(step_mm, 0.0),
            TensionAction::MinusX => Vector2::new(-step_mm, 0.0),
            TensionAction::PlusY => Vector2::new(0.0, step_mm),
            TensionAction::MinusY => Vector2::new(0.0, -step_mm),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            TensionAction::Stay => "stay",
            TensionAction::PlusX => "+x",
            TensionAction::MinusX => "-x",
            TensionAction::PlusY => "+y",
            TensionAction::MinusY => "-y",
        }
    }

    pub fn from_token(tok: &str) -> Option<TensionAction> {
        match tok {
            "stay" => Some(TensionAction::Stay),
            "+x" => Some(TensionAction::PlusX),
            "-x" => Some(TensionAction::MinusX),
            "+y" => Some(TensionAction::PlusY),
            "-y" => Some(TensionAction::MinusY),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            TensionAction::Stay => 0,
            TensionAction::PlusX => 1,
            TensionAction::MinusX => 2,
            TensionAction::PlusY => 3,
            TensionAction::MinusY => 4,
        }
    }
}

/// Time-indexed open-loop tensioning policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionPolicy {
    pub actions: Vec<TensionAction>,
    pub grasp_vertex: usize,
    pub step_mm: f64,
    pub d_max_mm: f64,
}

impl TensionPolicy {
    /// The stay-everywhere baseline.
    pub fn no_tension(grasp_vertex: usize, horizon: usize) -> TensionPolicy {
        TensionPolicy {
            actions: vec![TensionAction::Stay; horizon],
            grasp_vertex,
            step_mm: DEFAULT_STEP_MM,
            d_max_mm: DEFAULT_D_MAX_MM,
        }
    }

    /// Displacement trace induced by the action sequence under the
    /// component-wise D_max clamp (excess moves become stay) — mirrors the
    /// episode executor.
    pub fn displacement_trace(&self) -> Vec<Vector2<f64>> {
        let mut d = Vector2::new(0.0, 0.0);
        let mut out = Vec::with_capacity(self.actions.len());
        for a in &self.actions {
            let next = d + a.delta_mm(self.step_mm);
            if next.x.abs() <= self.d_max_mm + 1e-12 && next.y.abs() <= self.d_max_mm + 1e-12 {
                d = next;
            }
            out.push(d);
        }
        out
    }

    /// Plain-text policy file: `key=value` header lines, then one action
    /// token per line.
    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "grasp_vertex={}", self.grasp_vertex)?;
        writeln!(w, "step_mm={}", self.step_mm)?;
        writeln!(w, "d_max_mm={}", self.d_max_mm)?;
        for a in &self.actions {
            writeln!(w, "{}", a.token())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<TensionPolicy, TensionError> {
        let mut grasp_vertex: Option<usize> = None;
        let mut step_mm = DEFAULT_STEP_MM;
        let mut d_max_mm = DEFAULT_D_MAX_MM;
        let mut actions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                let bad = || TensionError::PolicyParse {
                    line: idx + 1,
                    content: raw.to_string(),
                };
                match key {
                    "grasp_vertex" => {
                        grasp_vertex = Some(value.parse().map_err(|_| bad())?)
                    }
                    "step_mm" => step_mm = value.parse().map_err(|_| bad())?,
                    "d_max_mm" => d_max_mm = value.parse().map_err(|_| bad())?,
                    _ => {
                        return Err(TensionError::PolicyParse {
                            line: idx + 1,
                            content: raw.to_string(),
                        })
                    }
                }
            } else {
                let action = TensionAction::from_token(line).ok_or(
                    TensionError::PolicyParse { line: idx + 1, content: raw.to_string() },
                )?;
                actions.push(action);
            }
        }
        let grasp_vertex = grasp_vertex.ok_or(TensionError::PolicyParse {
            line: 0,
            content: "missing grasp_vertex header".to_string(),
        })?;
        Ok(TensionPolicy { actions, grasp_vertex, step_mm, d_max_mm })
    }
}

/// Fixed-orthogonal baseline: at every step, chase a displacement target
/// `magnitude_mm` along the left normal of the local trajectory tangent,
/// moving 1 mm along the cardinal axis with the largest remaining gap
/// (staying when both gaps are below half a step). The magnitude is capped
/// at `d_max_mm`.
pub fn orthogonal_tension(
    trajectory: &CutTrajectory,
    grasp_vertex: usize,
    magnitude_mm: f64,
    d_max_mm: f64,
) -> TensionPolicy {
    let magnitude = magnitude_mm.min(d_max_mm);
    let step = DEFAULT_STEP_MM;
    let wps = &trajectory.waypoints_mm;
    let mut actions = Vec::with_capacity(wps.len());
    let mut d = Vector2::new(0.0, 0.0);
    for i in 0..wps.len() {
        let tangent = if i + 1 < wps.len() {
            wps[i + 1] - wps[i]
        } else if i > 0 {
            wps[i] - wps[i - 1]
        } else {
            Vector2::new(1.0, 0.0)
        };
        let norm = tangent.norm();
        let target = if norm > 1e-12 {
            Vector2::new(-tangent.y, tangent.x) / norm * magnitude
        } else {
            d
        };
        let gap = target - d;
        let action = if gap.x.abs() < step / 2.0 && gap.y.abs() < step / 2.0 {
            TensionAction::Stay
        } else if gap.x.abs() >= gap.y.abs() {
            if gap.x > 0.0 {
                TensionAction::PlusX
            } else {
                TensionAction::MinusX
            }
        } else if gap.y > 0.0 {
            TensionAction::PlusY
        } else {
            TensionAction::MinusY
        };
        let next = d + action.delta_mm(step);
        if next.x.abs() <= d_max_mm + 1e-12 && next.y.abs() <= d_max_mm + 1e-12 {
            d = next;
        }
        actions.push(action);
    }
    TensionPolicy { actions, grasp_vertex, step_mm: step, d_max_mm }
}

/// Per-cut indicator reward: 1 iff the recorded material point lies within
/// `tolerance_mm` of the intended pattern polyline (half the 2 mm marking
/// width by default); missed cuts score 0.
pub fn reward(event: &CutEvent, pattern_polyline_mm: &[Vector2<f64>], tolerance_mm: f64) -> u8 {
    match event.material_point_mm {
        Some(m) => u8::from(geom::dist_point_polyline(&m, pattern_polyline_mm) <= tolerance_mm),
        None => 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensionError {
    InvalidHyperparameter { name: &'static str, value: f64 },
    PolicyParse { line: usize, content: String },
}

impl fmt::Display for TensionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensionError::InvalidHyperparameter { name, value } => {
                write!(f, "invalid hyperparameter {name} = {value}")
            }
            TensionError::PolicyParse { line, content } => {
                write!(f, "policy file line {line}: cannot parse {content:?}")
            }
        }
    }
}

impl std::error::Error for TensionError {}

/// Outcome of one episode rollout under a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOutcome {
    pub reward_total: u32,
    /// Normalized symmetric-difference score (lower is better).
    pub sym_diff: f64,
}

impl RolloutOutcome {
    /// Fitness maximized by the trainer: Σ rewards − λ · score.
    pub fn fitness(&self, lambda: f64) -> f64 {
        f64::from(self.reward_total) - lambda * self.sym_diff
    }
}

/// A deterministic episode environment the trainer can roll policies
/// through. Implementations must be side-effect free: rollouts of the same
/// policy return identical outcomes.
pub trait PolicyEnv: Sync {
    fn horizon(&self) -> usize;
    fn grasp_vertex(&self) -> usize;
    fn d_max_mm(&self) -> f64;
    fn step_mm(&self) -> f64 {
        DEFAULT_STEP_MM
    }
    fn rollout(&self, policy: &TensionPolicy) -> RolloutOutcome;
}

/// Cross-entropy trainer configuration.
#[derive(Debug, Clone)]
pub struct CemConfig {
    pub iterations: usize,
    pub population: usize,
    pub elite_fraction: f64,
    pub smoothing: f64,
    /// Score weight in the fitness; None = 10 · horizon, making the
    /// symmetric-difference term dominate the per-step rewards.
    pub lambda: Option<f64>,
    pub seed: u64,
    /// Worker threads for population evaluation (never affects results).
    pub threads: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            iterations: 30,
            population: 64,
            elite_fraction: 0.125,
            smoothing: DEFAULT_SMOOTHING,
            lambda: None,
            seed: 0,
            threads: 1,
        }
    }
}

/// One training-log row. `best_fitness`/`best_score` track the best-ever
/// policy (non-decreasing fitness); `mean_fitness` is this iteration's
/// population mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CemLogRow {
    pub iteration: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_score: f64,
}

/// Write the training log CSV: iteration,best_fitness,mean_fitness,best_score.
pub fn write_training_log<W: Write>(rows: &[CemLogRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "iteration,best_fitness,mean_fitness,best_score")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.iteration, r.best_fitness, r.mean_fitness, r.best_score)?;
    }
    Ok(())
}

/// Cross-entropy policy search over time-indexed action sequences.
///
/// Per-step categorical distributions start uniform; each iteration samples
/// `population` sequences (the no-tension sequence replaces member 0 of
/// iteration 1, so the trained policy never underperforms that baseline on
/// its training environment), evaluates them concurrently, and refits the
/// distributions to the elite set with additive smoothing. Returns the
/// best-ever policy and the per-iteration log.
pub fn cem_train(
    env: &dyn PolicyEnv,
    cfg: &CemConfig,
) -> Result<(TensionPolicy, Vec<CemLogRow>), TensionError> {
    if cfg.iterations == 0 {
        return Err(TensionError::InvalidHyperparameter {
            name: "iterations",
            value: cfg.iterations as f64,
        });
    }
    if !(cfg.elite_fraction > 0.0 && cfg.elite_fraction <= 1.0) {
        return Err(TensionError::InvalidHyperparameter {
            name: "elite_fraction",
            value: cfg.elite_fraction,
        });
    }
    if cfg.population < 2 && cfg.elite_fraction < 1.0 {
        return Err(TensionError::InvalidHyperparameter {
            name: "population",
            value: cfg.population as f64,
        });
    }
    if cfg.population == 0 {
        return Err(TensionError::InvalidHyperparameter { name: "population", value: 0.0 });
    }
    if !(cfg.smoothing >= 0.0) {
        return Err(TensionError::InvalidHyperparameter {
            name: "smoothing",
            value: cfg.smoothing,
        });
    }

    let horizon = env.horizon();
    let lambda = cfg.lambda.unwrap_or(10.0 * horizon as f64);
    let elite_count =
        ((cfg.population as f64 * cfg.elite_fraction).ceil() as usize).clamp(1, cfg.population);
    let mut rng = seeds::stream_rng(cfg.seed, "cem-train");
    let mut dist = vec![[1.0 / ACTIONS.len() as f64; 5]; horizon];

    let make_policy = |actions: Vec<TensionAction>| TensionPolicy {
        actions,
        grasp_vertex: env.grasp_vertex(),
        step_mm: env.step_mm(),
        d_max_mm: env.d_max_mm(),
    };

    let mut best_policy: Option<TensionPolicy> = None;
    let mut best_fitness = f64::NEG_INFINITY;
    let mut best_score = f64::INFINITY;
    let mut log = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let mut population: Vec<Vec<TensionAction>> = Vec::with_capacity(cfg.population);
        for member in 0..cfg.population {
            if iteration == 0 && member == 0 {
                population.push(vec![TensionAction::Stay; horizon]);
                continue;
            }
            let mut seq = Vec::with_capacity(horizon);
            for step_dist in &dist {
                let draw: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = ACTIONS[ACTIONS.len() - 1];
                for (a, p) in ACTIONS.iter().zip(step_dist.iter()) {
                    acc += p;
                    if draw < acc {
                        chosen = *a;
                        break;
                    }
                }
                seq.push(chosen);
            }
            population.push(seq);
        }

        let outcomes = map_indexed(&population, cfg.threads.max(1), |_, seq| {
            env.rollout(&make_policy(seq.clone()))
        });

        let fitnesses: Vec<f64> = outcomes.iter().map(|o| o.fitness(lambda)).collect();
        let mean_fitness = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
        for (i, &f) in fitnesses.iter().enumerate() {
            if f > best_fitness {
                best_fitness = f;
                best_score = outcomes[i].sym_diff;
                best_policy = Some(make_policy(population[i].clone()));
            }
        }

        // Elite refit: order by fitness descending, stable on ties (keeps
        // lower member index), then count actions per step.
        let mut order: Vec<usize> = (0..cfg.population).collect();
        order.sort_by(|&a, &b| fitnesses[b].partial_cmp(&fitnesses[a]).unwrap());
        for (step, step_dist) in dist.iter_mut().enumerate() {
            let mut counts = [cfg.smoothing; 5];
            for &m in order.iter().take(elite_count) {
                counts[population[m][step].index()] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            for (d, c) in step_dist.iter_mut().zip(counts.iter()) {
                *d = c / total;
            }
        }

        log.push(CemLogRow {
            iteration: iteration + 1,
            best_fitness,
            mean_fitness,
            best_score,
        });
    }

    Ok((best_policy.expect("at least one member evaluated"), log))
}

/// Run one episode of `policy` through `env` (deterministic).
pub fn evaluate(policy: &TensionPolicy, env: &dyn PolicyEnv) -> RolloutOutcome {
    env.rollout(policy)
}
