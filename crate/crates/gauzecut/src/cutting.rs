//! Cutting: severing cloth constraints with simulated scissors and running
//! full cut episodes against a tension policy.
//!
//! The cutting arm is position-controlled to the *intended* curve in the
//! fixed world frame — the robot follows its plan while the cloth deforms
//! underneath, which is exactly why tensioning matters. A sever marks every
//! constraint incident to any vertex within the scissor radius as cut; the
//! event records the *material* coordinate of the nearest such vertex, i.e.
//! which piece of gauze actually got cut, however the mesh was deformed.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Vector2, Vector3};

use crate::cloth::{ClothError, ClothState};
use crate::geom;
use crate::planner::CutTrajectory;
use crate::tension::{reward, TensionPolicy};

#[derive(Debug, Clone, PartialEq)]
pub enum CutError {
    /// Scissor radius must be positive and finite.
    InvalidRadius { radius_mm: f64 },
    /// The trajectory has no waypoints.
    EmptyTrajectory,
    /// The policy's action sequence does not cover the trajectory.
    PolicyHorizonMismatch { policy: usize, trajectory: usize },
    /// The grasp vertex sits on the intended curve and would be cut off.
    GraspOnTrajectory { vertex: usize, distance_mm: f64 },
    /// Propagated cloth-state error.
    Cloth(ClothError),
}

impl fmt::Display for CutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutError::InvalidRadius { radius_mm } => {
                write!(f, "scissor radius must be positive, got {radius_mm}")
            }
            CutError::EmptyTrajectory => write!(f, "trajectory has no waypoints"),
            CutError::PolicyHorizonMismatch { policy, trajectory } => write!(
                f,
                "policy covers {policy} steps but trajectory has {trajectory} waypoints"
            ),
            CutError::GraspOnTrajectory { vertex, distance_mm } => write!(
                f,
                "grasp vertex {vertex} lies on the cut path ({distance_mm} mm away)"
            ),
            CutError::Cloth(e) => write!(f, "cloth error: {e}"),
        }
    }
}

impl std::error::Error for CutError {}

impl From<ClothError> for CutError {
    fn from(e: ClothError) -> Self {
        CutError::Cloth(e)
    }
}

/// One scissor closure.
#[derive(Debug, Clone, PartialEq)]
pub struct CutEvent {
    /// Engine step count when the sever was applied.
    pub step_index: u64,
    /// Scissor tip in world coordinates, mm.
    pub scissor_world_mm: Vector3<f64>,
    /// Vertices whose constraints were newly severed (they had at least one
    /// uncut incident constraint before this event), ascending by id.
    pub severed_vertices: Vec<usize>,
    /// Material coordinate of the nearest vertex within the radius, or None
    /// when the scissors closed on air.
    pub material_point_mm: Option<Vector2<f64>>,
}

/// Sever all constraints incident to vertices within `radius_mm` of
/// `world_mm`. Misses leave the state untouched and record no material
/// point.
pub fn sever_at(
    state: &mut ClothState,
    world_mm: &Vector3<f64>,
    radius_mm: f64,
) -> Result<CutEvent, CutError> {
    if !(radius_mm > 0.0) || !radius_mm.is_finite() {
        return Err(CutError::InvalidRadius { radius_mm });
    }
    let hits = state.vertices_within(world_mm, radius_mm);
    let mut severed = Vec::new();
    let mut nearest: Option<(f64, usize)> = None;
    for &v in &hits {
        let d = (state.position(v) - world_mm).norm();
        if nearest.map_or(true, |(best, _)| d < best) {
            nearest = Some((d, v));
        }
        if state.has_uncut_constraint(v) {
            severed.push(v);
        }
    }
    for &v in &severed {
        state.sever_vertex(v);
    }
    Ok(CutEvent {
        step_index: state.step_count(),
        scissor_world_mm: *world_mm,
        severed_vertices: severed,
        material_point_mm: nearest.map(|(_, v)| state.material(v)),
    })
}

/// Episode parameters. `cut_radius_mm = None` derives spacing/2 from the
/// state.
#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    /// Engine steps between tension action and sever, per waypoint.
    pub settle_steps: usize,
    /// Scissor radius; None = half the mesh spacing.
    pub cut_radius_mm: Option<f64>,
    /// Reward tolerance: a cut scores 1 when its material point lies within
    /// this distance of the pattern polyline.
    pub reward_tolerance_mm: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { settle_steps: 20, cut_radius_mm: None, reward_tolerance_mm: 1.0 }
    }
}

/// Everything a finished episode produced.
#[derive(Clone)]
pub struct EpisodeResult {
    pub events: Vec<CutEvent>,
    /// Per-waypoint 0/1 rewards.
    pub rewards: Vec<u8>,
    /// Intended waypoints, mm (copy of the trajectory flat list).
    pub intended_mm: Vec<Vector2<f64>>,
    /// Total engine steps run.
    pub steps_run: u64,
    /// Final cloth state (for snapshots/renders).
    pub final_state: ClothState,
}

impl EpisodeResult {
    pub fn reward_total(&self) -> u32 {
        self.rewards.iter().map(|&r| u32::from(r)).sum()
    }

    /// Achieved material points in trajectory order (None = missed cut).
    pub fn achieved_points(&self) -> Vec<Option<Vector2<f64>>> {
        self.events.iter().map(|e| e.material_point_mm).collect()
    }

    /// Write the episode CSV:
    /// `step,intended_x_mm,intended_y_mm,achieved_x_mm,achieved_y_mm,reward`;
    /// achieved columns are empty for missed cuts.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "step,intended_x_mm,intended_y_mm,achieved_x_mm,achieved_y_mm,reward")?;
        for (i, intended) in self.intended_mm.iter().enumerate() {
            let (ax, ay) = match self.events[i].material_point_mm {
                Some(m) => (m.x.to_string(), m.y.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i, intended.x, intended.y, ax, ay, self.rewards[i]
            )?;
        }
        Ok(())
    }
}

/// Scissor world position for an intended waypoint: the intended (x, y) in
/// the fixed world frame, at the height of the cloth surface there (depth is
/// position-controlled to the nearest material under the tool).
fn scissor_world(state: &ClothState, waypoint_mm: &Vector2<f64>) -> Vector3<f64> {
    let v = state.nearest_vertex_xy(waypoint_mm.x, waypoint_mm.y);
    Vector3::new(waypoint_mm.x, waypoint_mm.y, state.position(v).z)
}

/// Check episode inputs without running anything; returns the resolved
/// scissor radius. Environments wrapping episodes validate once up front so
/// every later rollout is infallible.
pub fn validate_episode(
    state0: &ClothState,
    trajectory: &CutTrajectory,
    grasp_vertex: usize,
    cfg: &EpisodeConfig,
) -> Result<f64, CutError> {
    if trajectory.waypoints_mm.is_empty() {
        return Err(CutError::EmptyTrajectory);
    }
    let radius = match cfg.cut_radius_mm {
        Some(r) => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(CutError::InvalidRadius { radius_mm: r });
            }
            r
        }
        None => state0.spacing_mm() / 2.0,
    };
    if grasp_vertex >= state0.vertex_count() {
        return Err(CutError::Cloth(ClothError::VertexOutOfRange {
            vertex: grasp_vertex,
            count: state0.vertex_count(),
        }));
    }
    let grasp_dist = geom::dist_point_polyline(
        &state0.material(grasp_vertex),
        &trajectory.pattern_polyline_mm,
    );
    if grasp_dist <= radius {
        return Err(CutError::GraspOnTrajectory { vertex: grasp_vertex, distance_mm: grasp_dist });
    }
    Ok(radius)
}

/// Run a full cut episode: for each waypoint, apply the policy's tension
/// action (a 1 mm grasp-pin move, clamped so the accumulated displacement
/// never exceeds the policy's `d_max_mm` — excess moves become stay), settle,
/// then sever at the intended waypoint.
///
/// The grasp vertex is pinned at its current position when the episode
/// starts; `state0` itself is never mutated.
pub fn run_cut_episode(
    state0: &ClothState,
    trajectory: &CutTrajectory,
    policy: &TensionPolicy,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult, CutError> {
    let n = trajectory.waypoints_mm.len();
    let radius = validate_episode(state0, trajectory, policy.grasp_vertex, cfg)?;
    if policy.actions.len() < n {
        return Err(CutError::PolicyHorizonMismatch {
            policy: policy.actions.len(),
            trajectory: n,
        });
    }
    let grasp = policy.grasp_vertex;

    let mut state = state0.clone();
    let start_step = state.step_count();
    let at = state.position(grasp);
    state.set_pin(grasp, at)?;

    let mut displacement = Vector2::new(0.0, 0.0);
    let mut events = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);

    for (i, waypoint) in trajectory.waypoints_mm.iter().enumerate() {
        let delta = policy.actions[i].delta_mm(policy.step_mm);
        let next = displacement + delta;
        // Clamp: excess displacement turns the move into stay.
        if next.x.abs() <= policy.d_max_mm + 1e-12 && next.y.abs() <= policy.d_max_mm + 1e-12 {
            if delta != Vector2::zeros() {
                state.move_pin(grasp, Vector3::new(delta.x, delta.y, 0.0))?;
                displacement = next;
            }
        }

        state.run(cfg.settle_steps);

        let tip = scissor_world(&state, waypoint);
        let event = sever_at(&mut state, &tip, radius)?;
        rewards.push(reward(&event, &trajectory.pattern_polyline_mm, cfg.reward_tolerance_mm));
        events.push(event);
    }

    Ok(EpisodeResult {
        events,
        rewards,
        intended_mm: trajectory.waypoints_mm.clone(),
        steps_run: state.step_count() - start_step,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::{ClothParams, PinLayout};
    use crate::planner::CutTrajectory;
    use crate::tension::TensionPolicy;
    use approx::assert_relative_eq;

    fn flat_cloth(rows: usize, cols: usize, pins: &PinLayout) -> ClothState {
        let params = ClothParams { gravity_mm: Vector3::zeros(), ..ClothParams::default() };
        ClothState::new_mesh(rows, cols, 1.0, pins, params).unwrap()
    }

    fn line_trajectory(points: Vec<Vector2<f64>>) -> CutTrajectory {
        CutTrajectory {
            segments_mm: vec![points.clone()],
            pattern_polyline_mm: points.clone(),
            pattern_closed: false,
            waypoints_mm: points,
            notch_indices: vec![0],
            step_length_mm: 1.0,
            scale_mm: 1.0,
        }
    }

    #[test]
    fn sever_requires_positive_radius() {
        let mut cloth = flat_cloth(3, 3, &PinLayout::None);
        let err = sever_at(&mut cloth, &Vector3::zeros(), 0.0);
        assert!(matches!(err, Err(CutError::InvalidRadius { .. })));
    }

    #[test]
    fn sever_miss_leaves_state_unchanged() {
        let mut cloth = flat_cloth(3, 3, &PinLayout::None);
        let before = cloth.active_constraint_count();
        let ev = sever_at(&mut cloth, &Vector3::new(10.0, 10.0, 0.0), 0.4).unwrap();
        assert!(ev.severed_vertices.is_empty());
        assert!(ev.material_point_mm.is_none());
        assert_eq!(cloth.active_constraint_count(), before);
    }

    #[test]
    fn sever_cuts_all_incident_constraints_and_reports_material() {
        let mut cloth = flat_cloth(3, 3, &PinLayout::None);
        // Vertex 4 is the center with 4 incident constraints.
        let ev = sever_at(&mut cloth, &Vector3::new(1.1, 0.9, 0.0), 0.4).unwrap();
        assert_eq!(ev.severed_vertices, vec![4]);
        let m = ev.material_point_mm.unwrap();
        assert_relative_eq!(m.x, 1.0);
        assert_relative_eq!(m.y, 1.0);
        assert_eq!(cloth.cut_degree(4), 4);
        assert_eq!(cloth.active_constraint_count(), 8);
    }

    #[test]
    fn severed_vertices_exclude_already_cut() {
        let mut cloth = flat_cloth(3, 3, &PinLayout::None);
        sever_at(&mut cloth, &Vector3::new(1.0, 1.0, 0.0), 0.4).unwrap();
        // Cutting the same spot again: the vertex has no uncut constraints,
        // so nothing is "newly severed", but the material point still reports.
        let ev = sever_at(&mut cloth, &Vector3::new(1.0, 1.0, 0.0), 0.4).unwrap();
        assert!(ev.severed_vertices.is_empty());
        assert!(ev.material_point_mm.is_some());
    }

    #[test]
    fn deformed_mesh_cut_reports_material_not_world() {
        // Tension the cloth +2 mm in x via a pinned column, then cut at the
        // world position now occupied by a known material point.
        let mut cloth = flat_cloth(3, 3, &PinLayout::Vertices(vec![0, 3, 6]));
        for v in [2usize, 5, 8] {
            let at = cloth.position(v);
            cloth.set_pin(v, at + Vector3::new(2.0, 0.0, 0.0)).unwrap();
        }
        cloth.run(200);
        // Material point of vertex 5 is (2, 1); its world x is now ~4.
        let world = cloth.position(5);
        assert!(world.x > 3.5);
        let ev = sever_at(&mut cloth, &world, 0.4).unwrap();
        let m = ev.material_point_mm.unwrap();
        assert_relative_eq!(m.x, 2.0);
        assert_relative_eq!(m.y, 1.0);
    }

    #[test]
    fn episode_rejects_empty_trajectory() {
        let cloth = flat_cloth(3, 3, &PinLayout::Corners);
        let traj = line_trajectory(vec![]);
        let policy = TensionPolicy::no_tension(4, 0);
        let err = run_cut_episode(&cloth, &traj, &policy, &EpisodeConfig::default());
        assert!(matches!(err, Err(CutError::EmptyTrajectory)));
    }

    #[test]
    fn episode_rejects_grasp_on_trajectory() {
        let cloth = flat_cloth(5, 5, &PinLayout::Corners);
        let traj = line_trajectory(vec![Vector2::new(0.0, 2.0), Vector2::new(4.0, 2.0)]);
        // Vertex 12 = (row 2, col 2) sits exactly on the line.
        let policy = TensionPolicy::no_tension(12, 2);
        let err = run_cut_episode(&cloth, &traj, &policy, &EpisodeConfig::default());
        assert!(matches!(err, Err(CutError::GraspOnTrajectory { vertex: 12, .. })));
    }

    #[test]
    fn episode_rejects_short_policy() {
        let cloth = flat_cloth(5, 5, &PinLayout::Corners);
        let traj = line_trajectory(vec![
            Vector2::new(0.0, 2.0),
            Vector2::new(2.0, 2.0),
            Vector2::new(4.0, 2.0),
        ]);
        let policy = TensionPolicy::no_tension(0, 1);
        let err = run_cut_episode(&cloth, &traj, &policy, &EpisodeConfig::default());
        assert!(matches!(err, Err(CutError::PolicyHorizonMismatch { .. })));
    }

    #[test]
    fn static_zero_g_episode_cuts_on_the_line() {
        // Border-pinned, zero gravity, straight line along a mesh row:
        // every cut lands on the intended material point, all rewards 1.
        let cloth = flat_cloth(7, 7, &PinLayout::Border);
        let pts: Vec<Vector2<f64>> =
            (0..7).map(|c| Vector2::new(c as f64, 3.0)).collect();
        let traj = line_trajectory(pts);
        let policy = TensionPolicy::no_tension(8, traj.waypoints_mm.len());
        let cfg = EpisodeConfig { settle_steps: 5, ..EpisodeConfig::default() };
        let result = run_cut_episode(&cloth, &traj, &policy, &cfg).unwrap();
        assert_eq!(result.reward_total(), 7);
        for (i, ev) in result.events.iter().enumerate() {
            let m = ev.material_point_mm.unwrap();
            assert_relative_eq!(m.x, i as f64, epsilon = 1e-9);
            assert_relative_eq!(m.y, 3.0, epsilon = 1e-9);
        }
        assert_eq!(result.steps_run, 7 * 5);
    }

    #[test]
    fn tension_displacement_clamps_at_d_max() {
        let cloth = flat_cloth(5, 5, &PinLayout::Corners);
        let pts: Vec<Vector2<f64>> =
            (0..5).map(|c| Vector2::new(c as f64, 3.0)).collect();
        let traj = line_trajectory(pts);
        // Policy pushes +x every step with a 2 mm clamp: moves 2, then stays.
        let mut policy = TensionPolicy::no_tension(1, 5);
        policy.d_max_mm = 2.0;
        for a in policy.actions.iter_mut() {
            *a = crate::tension::TensionAction::PlusX;
        }
        let cfg = EpisodeConfig { settle_steps: 1, ..EpisodeConfig::default() };
        let result = run_cut_episode(&cloth, &traj, &policy, &cfg).unwrap();
        let grasp_x = result.final_state.position(1).x;
        assert_relative_eq!(grasp_x, 1.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn episode_csv_shape() {
        let cloth = flat_cloth(5, 5, &PinLayout::Border);
        let pts: Vec<Vector2<f64>> =
            (0..5).map(|c| Vector2::new(c as f64, 2.0)).collect();
        let traj = line_trajectory(pts);
        let policy = TensionPolicy::no_tension(6, 5);
        let cfg = EpisodeConfig { settle_steps: 2, ..EpisodeConfig::default() };
        let result = run_cut_episode(&cloth, &traj, &policy, &cfg).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(
            lines[0],
            "step,intended_x_mm,intended_y_mm,achieved_x_mm,achieved_y_mm,reward"
        );
    }
}
