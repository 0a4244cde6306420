//! Scenario files: the TOML schema, loading/validation, and conversion into
//! the library's domain objects.
//!
//! Every block is optional except the master `seed`; each block's defaults
//! mirror the library defaults, so an empty block means "stock behaviour".
//! Unknown keys anywhere are rejected, and every file referenced by a
//! scenario must exist at load time. All randomness downstream derives from
//! the single master seed through named streams, so no stage ever consults
//! the wall clock.

use std::fmt;
use std::path::{Path, PathBuf};

use gauzecut::cloth::{ClothParams, ClothState, PinLayout};
use gauzecut::cutting::EpisodeConfig;
use gauzecut::planner::{
    self, apply_ordering, build_trajectory, find_notches, order_segments, split_segments,
    CutTrajectory, OrderingMode, Pattern,
};
use gauzecut::scoring::DEFAULT_RESOLUTION;
use gauzecut::stewart::{MotionKind, PlatformDims};
use gauzecut::sync::{ControllerKind, DisturbanceModel, ExecuteConfig, Wave};
use gauzecut::tension::{CemConfig, DEFAULT_D_MAX_MM, DEFAULT_SMOOTHING};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ScenarioError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, message: String },
    MissingFile { path: PathBuf },
    MissingBlock { block: &'static str, needed_for: &'static str },
    Invalid { message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io { path, source } => {
                write!(f, "cannot read {}: {source}", path.display())
            }
            ScenarioError::Parse { path, message } => {
                write!(f, "invalid scenario {}: {message}", path.display())
            }
            ScenarioError::MissingFile { path } => {
                write!(f, "referenced file does not exist: {}", path.display())
            }
            ScenarioError::MissingBlock { block, needed_for } => {
                write!(f, "scenario block [{block}] is required for `{needed_for}`")
            }
            ScenarioError::Invalid { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// Root scenario document. `seed` is mandatory and explicit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub cloth: ClothBlock,
    #[serde(default)]
    pub pattern: Option<PatternBlock>,
    #[serde(default)]
    pub planner: PlannerBlock,
    #[serde(default)]
    pub episode: EpisodeBlock,
    #[serde(default)]
    pub tension: TensionBlock,
    #[serde(default)]
    pub grasp: GraspBlock,
    #[serde(default)]
    pub scoring: ScoringBlock,
    #[serde(default)]
    pub platform: PlatformBlock,
    #[serde(default)]
    pub sync: SyncBlock,
    #[serde(default)]
    pub camera: Option<CameraBlock>,
    /// Directory of the scenario file; file references resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClothBlock {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    /// "none" | "corners" | "border" | "all" | "vertices"
    pub pins: String,
    #[serde(default)]
    pub pin_vertices: Vec<usize>,
    pub alpha: f64,
    pub delta: f64,
    pub tau: f64,
    pub gravity_mm: [f64; 3],
    pub dt: f64,
    pub constraint_iterations: usize,
    pub shear_diagonals: bool,
}

impl Default for ClothBlock {
    fn default() -> Self {
        let p = ClothParams::default();
        ClothBlock {
            rows: 25,
            cols: 25,
            spacing_mm: gauzecut::cloth::DEFAULT_SPACING_MM,
            pins: "corners".to_string(),
            pin_vertices: Vec::new(),
            alpha: p.alpha,
            delta: p.delta,
            tau: p.tau,
            gravity_mm: [p.gravity_mm.x, p.gravity_mm.y, p.gravity_mm.z],
            dt: p.dt,
            constraint_iterations: p.constraint_iterations,
            shear_diagonals: p.shear_diagonals,
        }
    }
}

impl ClothBlock {
    pub fn params(&self) -> ClothParams {
        ClothParams {
            alpha: self.alpha,
            delta: self.delta,
            tau: self.tau,
            gravity_mm: Vector3::new(self.gravity_mm[0], self.gravity_mm[1], self.gravity_mm[2]),
            dt: self.dt,
            constraint_iterations: self.constraint_iterations,
            shear_diagonals: self.shear_diagonals,
        }
    }

    pub fn pin_layout(&self) -> Result<PinLayout, ScenarioError> {
        match self.pins.as_str() {
            "none" => Ok(PinLayout::None),
            "corners" => Ok(PinLayout::Corners),
            "border" => Ok(PinLayout::Border),
            "all" => Ok(PinLayout::All),
            "vertices" => {
                if self.pin_vertices.is_empty() {
                    return Err(ScenarioError::Invalid {
                        message: "pins = \"vertices\" requires a non-empty pin_vertices list"
                            .to_string(),
                    });
                }
                Ok(PinLayout::Vertices(self.pin_vertices.clone()))
            }
            other => Err(ScenarioError::Invalid {
                message: format!(
                    "unknown pins mode {other:?} (expected none|corners|border|all|vertices)"
                ),
            }),
        }
    }

    pub fn build(&self) -> Result<ClothState, ScenarioError> {
        let layout = self.pin_layout()?;
        ClothState::new_mesh(self.rows, self.cols, self.spacing_mm, &layout, self.params())
            .map_err(|e| ScenarioError::Invalid { message: format!("cloth: {e}") })
    }

    /// Sheet edge length, mm (the pattern scale default).
    pub fn extent_mm(&self) -> f64 {
        self.spacing_mm * (self.cols.max(self.rows).saturating_sub(1)) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternBlock {
    /// Pattern file (normalized `x,y` per line), relative to the scenario.
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerBlock {
    pub theta_max_deg: f64,
    pub step_length_mm: f64,
    /// "greedy" | "exhaustive" (exhaustive maximizes -travel, <= 6 segments).
    pub ordering: String,
    /// Pattern scale in mm; defaults to the cloth sheet edge.
    #[serde(default)]
    pub scale_mm: Option<f64>,
}

impl Default for PlannerBlock {
    fn default() -> Self {
        PlannerBlock {
            theta_max_deg: planner::DEFAULT_THETA_MAX_DEG,
            step_length_mm: 2.0,
            ordering: "greedy".to_string(),
            scale_mm: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeBlock {
    pub settle_steps: usize,
    #[serde(default)]
    pub cut_radius_mm: Option<f64>,
    pub reward_tolerance_mm: f64,
}

impl Default for EpisodeBlock {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        EpisodeBlock {
            settle_steps: e.settle_steps,
            cut_radius_mm: e.cut_radius_mm,
            reward_tolerance_mm: e.reward_tolerance_mm,
        }
    }
}

impl EpisodeBlock {
    pub fn config(&self) -> EpisodeConfig {
        EpisodeConfig {
            settle_steps: self.settle_steps,
            cut_radius_mm: self.cut_radius_mm,
            reward_tolerance_mm: self.reward_tolerance_mm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensionBlock {
    pub iterations: usize,
    pub population: usize,
    pub elite_fraction: f64,
    pub smoothing: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub d_max_mm: f64,
    /// Grasp vertex for `train`/standalone `execute` (grasp search picks its
    /// own winner).
    #[serde(default)]
    pub grasp_vertex: Option<usize>,
}

impl Default for TensionBlock {
    fn default() -> Self {
        let c = CemConfig::default();
        TensionBlock {
            iterations: c.iterations,
            population: c.population,
            elite_fraction: c.elite_fraction,
            smoothing: DEFAULT_SMOOTHING,
            lambda: None,
            d_max_mm: DEFAULT_D_MAX_MM,
            grasp_vertex: None,
        }
    }
}

impl TensionBlock {
    /// CEM config with the given stream seed and worker count.
    pub fn cem(&self, seed: u64, threads: usize) -> CemConfig {
        CemConfig {
            iterations: self.iterations,
            population: self.population,
            elite_fraction: self.elite_fraction,
            smoothing: self.smoothing,
            lambda: self.lambda,
            seed,
            threads,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspBlock {
    /// Candidates sampled when no explicit list is given.
    pub k: usize,
    /// Minimum material distance from the pattern polyline; defaults to
    /// twice the mesh spacing.
    #[serde(default)]
    pub margin_mm: Option<f64>,
    #[serde(default)]
    pub candidates: Option<Vec<usize>>,
}

impl Default for GraspBlock {
    fn default() -> Self {
        GraspBlock { k: 5, margin_mm: None, candidates: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringBlock {
    pub resolution: usize,
}

impl Default for ScoringBlock {
    fn default() -> Self {
        ScoringBlock { resolution: DEFAULT_RESOLUTION }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformBlock {
    pub l1_cm: f64,
    pub l2_cm: f64,
    pub z_home_cm: f64,
    pub l_ob_cm: f64,
    pub l_op_cm: f64,
    pub theta_b_deg: f64,
    pub theta_p_deg: f64,
    #[serde(default)]
    pub servo_quantum_deg: Option<f64>,
    pub servo_limit_deg: f64,
}

impl Default for PlatformBlock {
    fn default() -> Self {
        let d = PlatformDims::default();
        PlatformBlock {
            l1_cm: d.l1_cm,
            l2_cm: d.l2_cm,
            z_home_cm: d.z_home_cm,
            l_ob_cm: d.l_ob_cm,
            l_op_cm: d.l_op_cm,
            theta_b_deg: d.theta_b_deg,
            theta_p_deg: d.theta_p_deg,
            servo_quantum_deg: d.servo_quantum_deg,
            servo_limit_deg: d.servo_limit_deg,
        }
    }
}

impl PlatformBlock {
    pub fn dims(&self) -> PlatformDims {
        PlatformDims {
            l1_cm: self.l1_cm,
            l2_cm: self.l2_cm,
            z_home_cm: self.z_home_cm,
            l_ob_cm: self.l_ob_cm,
            l_op_cm: self.l_op_cm,
            theta_b_deg: self.theta_b_deg,
            theta_p_deg: self.theta_p_deg,
            servo_quantum_deg: self.servo_quantum_deg,
            servo_limit_deg: self.servo_limit_deg,
        }
    }
}

pub fn parse_motion_kind(s: &str) -> Result<MotionKind, ScenarioError> {
    match s {
        "sinusoid" => Ok(MotionKind::Sinusoid),
        "breathing" => Ok(MotionKind::Breathing),
        other => Err(ScenarioError::Invalid {
            message: format!("unknown motion kind {other:?} (expected sinusoid|breathing)"),
        }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncBlock {
    pub amplitude_mm: f64,
    pub freq_hz: f64,
    pub phase_s: f64,
    pub sigma_freq_rel: f64,
    pub sigma_phase_s: f64,
    pub latency_mean_s: f64,
    pub latency_jitter_s: f64,
    /// "open_loop" | "full_sync" | "intermittent"
    pub controller: String,
    /// Window width, seconds; required for the intermittent controller.
    #[serde(default)]
    pub window_s: Option<f64>,
    pub trials: usize,
    pub duration_s: f64,
    pub dt_s: f64,
    pub progress_len_mm: f64,
    pub speed_mm_s: f64,
}

impl Default for SyncBlock {
    fn default() -> Self {
        let m = DisturbanceModel::default();
        let e = ExecuteConfig::default();
        SyncBlock {
            amplitude_mm: m.wave.amplitude_mm,
            freq_hz: m.wave.freq_hz,
            phase_s: m.wave.phase_s,
            sigma_freq_rel: m.sigma_freq_rel,
            sigma_phase_s: m.sigma_phase_s,
            latency_mean_s: m.latency_mean_s,
            latency_jitter_s: m.latency_jitter_s,
            controller: "full_sync".to_string(),
            window_s: None,
            trials: 20,
            duration_s: e.duration_s,
            dt_s: e.dt_s,
            progress_len_mm: e.progress_len_mm,
            speed_mm_s: e.speed_mm_s,
        }
    }
}

impl SyncBlock {
    pub fn wave(&self) -> Wave {
        Wave { amplitude_mm: self.amplitude_mm, freq_hz: self.freq_hz, phase_s: self.phase_s }
    }

    pub fn model(&self) -> DisturbanceModel {
        DisturbanceModel {
            wave: self.wave(),
            sigma_freq_rel: self.sigma_freq_rel,
            sigma_phase_s: self.sigma_phase_s,
            latency_mean_s: self.latency_mean_s,
            latency_jitter_s: self.latency_jitter_s,
        }
    }

    pub fn controller(&self) -> Result<ControllerKind, ScenarioError> {
        match self.controller.as_str() {
            "open_loop" => Ok(ControllerKind::OpenLoop),
            "full_sync" => Ok(ControllerKind::FullSync),
            "intermittent" => {
                let window_s = self.window_s.ok_or_else(|| ScenarioError::Invalid {
                    message: "intermittent controller requires sync.window_s".to_string(),
                })?;
                Ok(ControllerKind::Intermittent { window_s })
            }
            other => Err(ScenarioError::Invalid {
                message: format!(
                    "unknown controller {other:?} (expected open_loop|full_sync|intermittent)"
                ),
            }),
        }
    }

    pub fn execute_config(&self) -> ExecuteConfig {
        ExecuteConfig {
            duration_s: self.duration_s,
            dt_s: self.dt_s,
            progress_len_mm: self.progress_len_mm,
            speed_mm_s: self.speed_mm_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraBlock {
    /// 3x4 camera matrix file (12 whitespace-separated numbers).
    pub matrix_path: String,
    /// Workspace sample cloud file (x y z per line).
    pub points_path: String,
    /// Observed image-space transform, row-major 3x3.
    pub transform: [f64; 9],
}

impl CameraBlock {
    pub fn image_transform(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.transform)
    }
}

impl Scenario {
    /// Load and validate a scenario file. Referenced files are checked for
    /// existence here, so later stages can assume them present.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.to_path_buf(), source: e })?;
        let mut scenario: Scenario = toml::from_str(&text)
            .map_err(|e| ScenarioError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        scenario.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        for file in scenario.referenced_files() {
            if !file.exists() {
                return Err(ScenarioError::MissingFile { path: file });
            }
        }
        Ok(scenario)
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        if let Some(p) = &self.pattern {
            files.push(self.resolve(&p.path));
        }
        if let Some(c) = &self.camera {
            files.push(self.resolve(&c.matrix_path));
            files.push(self.resolve(&c.points_path));
        }
        files
    }

    /// Canonical serialization of the effective config (after flag
    /// overrides); hashed into the manifest.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn pattern_block(&self, needed_for: &'static str) -> Result<&PatternBlock, ScenarioError> {
        self.pattern
            .as_ref()
            .ok_or(ScenarioError::MissingBlock { block: "pattern", needed_for })
    }

    pub fn camera_block(&self, needed_for: &'static str) -> Result<&CameraBlock, ScenarioError> {
        self.camera
            .as_ref()
            .ok_or(ScenarioError::MissingBlock { block: "camera", needed_for })
    }

    pub fn load_pattern(&self, needed_for: &'static str) -> Result<Pattern, ScenarioError> {
        let block = self.pattern_block(needed_for)?;
        let path = self.resolve(&block.path);
        planner::load_pattern(&path)
            .map_err(|e| ScenarioError::Invalid { message: format!("pattern: {e}") })
    }

    /// Pattern scale in mm: explicit planner.scale_mm or the sheet edge.
    pub fn scale_mm(&self) -> f64 {
        self.planner.scale_mm.unwrap_or_else(|| self.cloth.extent_mm())
    }

    /// Full planning pass under the scenario's planner block.
    pub fn plan(&self, pattern: &Pattern, threads: usize) -> Result<CutTrajectory, ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid { message };
        let notches = find_notches(pattern, self.planner.theta_max_deg);
        let segments = split_segments(pattern, &notches);
        let mode = match self.planner.ordering.as_str() {
            "greedy" => OrderingMode::Greedy,
            "exhaustive" => OrderingMode::Exhaustive,
            other => {
                return Err(invalid(format!(
                    "unknown ordering {other:?} (expected greedy|exhaustive)"
                )))
            }
        };
        // Exhaustive mode maximizes the negated pen-up travel between
        // consecutive directed segments.
        let travel_score = |ordering: &[(usize, bool)]| -> f64 {
            let endpoint = |(idx, rev): (usize, bool)| {
                let pts = &segments[idx].points;
                if rev {
                    (pts[pts.len() - 1], pts[0])
                } else {
                    (pts[0], pts[pts.len() - 1])
                }
            };
            let mut travel = 0.0;
            for pair in ordering.windows(2) {
                let (_, prev_end) = endpoint(pair[0]);
                let (next_start, _) = endpoint(pair[1]);
                travel += (next_start - prev_end).norm();
            }
            -travel
        };
        let ordering = order_segments(&segments, mode, travel_score, threads)
            .map_err(|e| invalid(format!("planner: {e}")))?;
        let directed = apply_ordering(&segments, &ordering);
        build_trajectory(pattern, &directed, self.planner.step_length_mm, self.scale_mm())
            .map_err(|e| invalid(format!("planner: {e}")))
    }
}

/// Count of pattern-level notches for reporting (recomputed from the block).
pub fn pattern_notches(scenario: &Scenario, pattern: &Pattern) -> Vec<usize> {
    find_notches(pattern, scenario.planner.theta_max_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_scenario(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("scenario.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_scenario_gets_library_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), "seed = 7\n");
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.cloth.rows, 25);
        assert_eq!(s.cloth.pins, "corners");
        assert_eq!(s.tension.population, CemConfig::default().population);
        assert_eq!(s.scoring.resolution, DEFAULT_RESOLUTION);
        assert!((s.scale_mm() - s.cloth.extent_mm()).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), "seed = 7\nturbo = true\n");
        let err = Scenario::load(&path).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }), "{err}");
        let nested = write_scenario(dir.path(), "seed = 7\n[cloth]\nrowz = 3\n");
        assert!(Scenario::load(&nested).is_err());
    }

    #[test]
    fn missing_seed_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), "[cloth]\n");
        assert!(Scenario::load(&path).is_err());
    }

    #[test]
    fn missing_pattern_file_is_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), "seed = 1\n[pattern]\npath = \"nope.pattern\"\n");
        let err = Scenario::load(&path).unwrap_err();
        assert!(matches!(err, ScenarioError::MissingFile { .. }), "{err}");
    }

    #[test]
    fn canonical_form_is_stable_and_override_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), "seed = 7\n");
        let a = Scenario::load(&path).unwrap();
        let b = Scenario::load(&path).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let mut c = Scenario::load(&path).unwrap();
        c.seed = 8;
        assert_ne!(a.canonical(), c.canonical());
    }

    #[test]
    fn controller_parsing_covers_all_modes() {
        let mut block = SyncBlock::default();
        assert_eq!(block.controller().unwrap(), ControllerKind::FullSync);
        block.controller = "open_loop".to_string();
        assert_eq!(block.controller().unwrap(), ControllerKind::OpenLoop);
        block.controller = "intermittent".to_string();
        assert!(block.controller().is_err(), "window_s must be required");
        block.window_s = Some(0.25);
        assert_eq!(
            block.controller().unwrap(),
            ControllerKind::Intermittent { window_s: 0.25 }
        );
    }
}
