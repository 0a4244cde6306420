//! Rotary-servo Stewart platform: attachment geometry, closed-form inverse
//! kinematics, Gauss-Newton forward kinematics, soft range limits, and the
//! sinusoid/breathing motion modes.
//!
//! Geometry convention (the published dimensions underdetermine it, so it is
//! fixed here): three attachment pairs with centres at 0°, 120°, 240°;
//! base-pair members split symmetrically by θ_b about the centre, platform
//! anchors offset ±60° from the pair centre and pulled back toward it by
//! θ_p/2, so each platform anchor sits between two adjacent base pairs; the
//! horn plane at each base point is tangent to the base circle, mirrored
//! within a pair. Poses are home-relative: translation (0,0,0) with zero
//! rotation is the home pose, with the plate Z_home above the servo-axis
//! plane and all linkages at 90° to the horns.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Servo update period: actuator positions are recomputed every 5 µs, so
/// motion-mode samplers quantize time to this grid.
pub const SERVO_TICK_S: f64 = 5e-6;

/// Soft translation range, cm (each component).
pub const SOFT_RANGE_TRANSLATION_CM: f64 = 1.27;

/// Soft rotation range, degrees (each axis).
pub const SOFT_RANGE_ROTATION_DEG: f64 = 15.0;

/// Platform geometry (lengths in cm, angles in degrees).
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformDims {
    /// Servo horn length.
    pub l1_cm: f64,
    /// Platform linkage (rod) length.
    pub l2_cm: f64,
    /// Plate height above the servo axis plane at home (linkages at 90°).
    pub z_home_cm: f64,
    /// Base attachment radius.
    pub l_ob_cm: f64,
    /// Platform attachment radius.
    pub l_op_cm: f64,
    /// Base pair separation angle.
    pub theta_b_deg: f64,
    /// Platform pair separation angle.
    pub theta_p_deg: f64,
    /// Optional servo resolution, degrees per encoder step (0.29 for the
    /// physical servos); None = continuous.
    pub servo_quantum_deg: Option<f64>,
    /// Servo horn travel limit, degrees each side of horizontal.
    pub servo_limit_deg: f64,
}

impl Default for PlatformDims {
    fn default() -> Self {
        PlatformDims {
            l1_cm: 2.0,
            l2_cm: 6.0,
            z_home_cm: 5.1,
            l_ob_cm: 8.1,
            l_op_cm: 8.1,
            theta_b_deg: 31.0,
            theta_p_deg: 23.5,
            servo_quantum_deg: None,
            servo_limit_deg: 90.0,
        }
    }
}

/// Home-relative platform pose: translation in cm, intrinsic roll/pitch/yaw
/// in degrees (applied as R_z(yaw)·R_y(pitch)·R_x(roll)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformPose {
    pub x_cm: f64,
    pub y_cm: f64,
    pub z_cm: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

impl PlatformPose {
    pub const HOME: PlatformPose = PlatformPose {
        x_cm: 0.0,
        y_cm: 0.0,
        z_cm: 0.0,
        roll_deg: 0.0,
        pitch_deg: 0.0,
        yaw_deg: 0.0,
    };

    pub fn translation(x_cm: f64, y_cm: f64, z_cm: f64) -> PlatformPose {
        PlatformPose { x_cm, y_cm, z_cm, ..PlatformPose::HOME }
    }

    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(
            self.roll_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.yaw_deg.to_radians(),
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.x_cm, self.y_cm, self.z_cm, self.roll_deg, self.pitch_deg, self.yaw_deg]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x_cm, self.y_cm, self.z_cm, self.roll_deg, self.pitch_deg, self.yaw_deg]
    }

    pub fn from_array(a: [f64; 6]) -> PlatformPose {
        PlatformPose {
            x_cm: a[0],
            y_cm: a[1],
            z_cm: a[2],
            roll_deg: a[3],
            pitch_deg: a[4],
            yaw_deg: a[5],
        }
    }
}

/// Six servo horn angles, degrees, zero at horn-horizontal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoAngles {
    pub alpha_deg: [f64; 6],
}

/// Attachment geometry: base points (world frame, z = 0 at the servo axis
/// plane), platform anchors (plate frame, z = 0), and horn azimuths β.
#[derive(Debug, Clone)]
pub struct AttachmentLayout {
    pub base_cm: [Vector3<f64>; 6],
    pub platform_cm: [Vector3<f64>; 6],
    pub beta_rad: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub enum StewartError {
    InvalidDims { name: &'static str, value: f64 },
    NonFinitePose,
    Unreachable { leg: usize },
    ServoLimit { leg: usize, alpha_deg: f64 },
    NonConvergence { residual_cm: f64, iterations: usize },
    InvalidMotion { name: &'static str, value: f64 },
}

impl fmt::Display for StewartError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StewartError::InvalidDims { name, value } => {
                write!(f, "invalid platform dimension {name} = {value}")
            }
            StewartError::NonFinitePose => write!(f, "pose has non-finite components"),
            StewartError::Unreachable { leg } => {
                write!(f, "pose unreachable: leg {leg} cannot close its linkage loop")
            }
            StewartError::ServoLimit { leg, alpha_deg } => {
                write!(f, "leg {leg} needs horn angle {alpha_deg}°, beyond the ±90° servo limit")
            }
            StewartError::NonConvergence { residual_cm, iterations } => write!(
                f,
                "forward kinematics failed to converge: residual {residual_cm} cm after {iterations} iterations"
            ),
            StewartError::InvalidMotion { name, value } => {
                write!(f, "invalid motion parameter {name} = {value}")
            }
        }
    }
}

impl std::error::Error for StewartError {}

fn validate_dims(dims: &PlatformDims) -> Result<(), StewartError> {
    let checks = [
        ("l1_cm", dims.l1_cm),
        ("l2_cm", dims.l2_cm),
        ("z_home_cm", dims.z_home_cm),
        ("l_ob_cm", dims.l_ob_cm),
        ("l_op_cm", dims.l_op_cm),
    ];
    for (name, value) in checks {
        if !(value > 0.0) || !value.is_finite() {
            return Err(StewartError::InvalidDims { name, value });
        }
    }
    for (name, value) in [("theta_b_deg", dims.theta_b_deg), ("theta_p_deg", dims.theta_p_deg)] {
        if !(value > 0.0 && value < 120.0) {
            return Err(StewartError::InvalidDims { name, value });
        }
    }
    if !(dims.servo_limit_deg > 0.0) || !dims.servo_limit_deg.is_finite() {
        return Err(StewartError::InvalidDims {
            name: "servo_limit_deg",
            value: dims.servo_limit_deg,
        });
    }
    Ok(())
}

/// Build the attachment points and horn azimuths for the given dimensions.
pub fn attachment_layout(dims: &PlatformDims) -> Result<AttachmentLayout, StewartError> {
    validate_dims(dims)?;
    let mut base = [Vector3::zeros(); 6];
    let mut platform = [Vector3::zeros(); 6];
    let mut beta = [0.0f64; 6];
    let half_b = dims.theta_b_deg.to_radians() / 2.0;
    let half_p = dims.theta_p_deg.to_radians() / 2.0;
    for pair in 0..3 {
        let centre = 2.0 * PI * (pair as f64) / 3.0;
        for member in 0..2 {
            let leg = 2 * pair + member;
            // Base members straddle the pair centre by ±θ_b/2.
            let sign = if member == 0 { -1.0 } else { 1.0 };
            let b_angle = centre + sign * half_b;
            base[leg] =
                Vector3::new(dims.l_ob_cm * b_angle.cos(), dims.l_ob_cm * b_angle.sin(), 0.0);
            // Platform anchors sit ±60° from the pair centre, pulled back
            // toward it by θ_p/2 (the plate is yawed 60° relative to base
            // pairs, anchors alternating between adjacent base pairs).
            let p_angle = centre + sign * (PI / 3.0 - half_p);
            platform[leg] =
                Vector3::new(dims.l_op_cm * p_angle.cos(), dims.l_op_cm * p_angle.sin(), 0.0);
            // Horn plane tangent to the base circle, mirrored within the
            // pair, each horn pointing toward its own anchor's side so the
            // principal IK branch is the frontal (small-angle) assembly.
            beta[leg] = b_angle + sign * PI / 2.0;
        }
    }
    Ok(AttachmentLayout { base_cm: base, platform_cm: platform, beta_rad: beta })
}

/// Reachability classification for a pose/angle solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeClass {
    InRange,
    OutOfSoftRange,
}

/// True iff every translation component is within ±1.27 cm and every
/// rotation within ±15° (inclusive).
pub fn range_check(pose: &PlatformPose) -> bool {
    pose.x_cm.abs() <= SOFT_RANGE_TRANSLATION_CM
        && pose.y_cm.abs() <= SOFT_RANGE_TRANSLATION_CM
        && pose.z_cm.abs() <= SOFT_RANGE_TRANSLATION_CM
        && pose.roll_deg.abs() <= SOFT_RANGE_ROTATION_DEG
        && pose.pitch_deg.abs() <= SOFT_RANGE_ROTATION_DEG
        && pose.yaw_deg.abs() <= SOFT_RANGE_ROTATION_DEG
}

/// IK solution: the six horn angles plus the soft-range classification of
/// the input pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub angles: ServoAngles,
    pub range: RangeClass,
}

fn normalize_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Closed-form rotary inverse kinematics. For each leg the virtual leg
/// vector is q = R·P + t − B with t = (x, y, Z_home + z); the horn angle
/// solves e·sin α + f·cos α = g with e = 2·L1·q_z,
/// f = 2·L1·(cos β·q_x + sin β·q_y), g = ‖q‖² − (L2² − L1²), i.e.
/// α = asin(g/√(e²+f²)) − atan2(f, e).
pub fn inverse_kinematics(
    pose: &PlatformPose,
    dims: &PlatformDims,
) -> Result<IkSolution, StewartError> {
    if !pose.is_finite() {
        return Err(StewartError::NonFinitePose);
    }
    let layout = attachment_layout(dims)?;
    let rot = pose.rotation_matrix();
    let t = Vector3::new(pose.x_cm, pose.y_cm, dims.z_home_cm + pose.z_cm);
    let mut alpha = [0.0f64; 6];
    for leg in 0..6 {
        let q = rot * layout.platform_cm[leg] + t - layout.base_cm[leg];
        let e = 2.0 * dims.l1_cm * q.z;
        let f = 2.0 * dims.l1_cm * (layout.beta_rad[leg].cos() * q.x
            + layout.beta_rad[leg].sin() * q.y);
        let g = q.norm_squared() - (dims.l2_cm * dims.l2_cm - dims.l1_cm * dims.l1_cm);
        let denom = (e * e + f * f).sqrt();
        let arg = g / denom;
        if !arg.is_finite() || arg.abs() > 1.0 {
            return Err(StewartError::Unreachable { leg });
        }
        let a = normalize_deg((arg.asin() - f.atan2(e)).to_degrees());
        if a.abs() > dims.servo_limit_deg {
            return Err(StewartError::ServoLimit { leg, alpha_deg: a });
        }
        alpha[leg] = match dims.servo_quantum_deg {
            Some(q) if q > 0.0 => (a / q).round() * q,
            _ => a,
        };
    }
    let range = if range_check(pose) { RangeClass::InRange } else { RangeClass::OutOfSoftRange };
    Ok(IkSolution { angles: ServoAngles { alpha_deg: alpha }, range })
}

/// Horn tip position of one leg for a given horn angle.
fn horn_tip(layout: &AttachmentLayout, dims: &PlatformDims, leg: usize, alpha_rad: f64) -> Vector3<f64> {
    let beta = layout.beta_rad[leg];
    layout.base_cm[leg]
        + Vector3::new(
            dims.l1_cm * alpha_rad.cos() * beta.cos(),
            dims.l1_cm * alpha_rad.cos() * beta.sin(),
            dims.l1_cm * alpha_rad.sin(),
        )
}

/// Six residuals: horn-tip-to-anchor distance minus L2 for each leg.
pub fn leg_residuals_cm(
    angles: &ServoAngles,
    pose: &PlatformPose,
    dims: &PlatformDims,
) -> Result<[f64; 6], StewartError> {
    let layout = attachment_layout(dims)?;
    let rot = pose.rotation_matrix();
    let t = Vector3::new(pose.x_cm, pose.y_cm, dims.z_home_cm + pose.z_cm);
    let mut res = [0.0f64; 6];
    for leg in 0..6 {
        let tip = horn_tip(&layout, dims, leg, angles.alpha_deg[leg].to_radians());
        let anchor = rot * layout.platform_cm[leg] + t;
        res[leg] = (anchor - tip).norm() - dims.l2_cm;
    }
    Ok(res)
}

/// Gauss-Newton forward kinematics on the six leg residuals with a numeric
/// Jacobian and step halving; converges to residual norm < 1e−10 cm for
/// consistent angle sets, reports `NonConvergence` (with the final residual)
/// otherwise.
pub fn forward_kinematics(
    angles: &ServoAngles,
    dims: &PlatformDims,
    initial_guess: Option<PlatformPose>,
) -> Result<PlatformPose, StewartError> {
    if angles.alpha_deg.iter().any(|a| !a.is_finite()) {
        return Err(StewartError::NonFinitePose);
    }
    validate_dims(dims)?;
    let mut pose = initial_guess.unwrap_or(PlatformPose::HOME).as_array();
    let residual_norm = |p: &[f64; 6]| -> Result<(f64, [f64; 6]), StewartError> {
        let r = leg_residuals_cm(angles, &PlatformPose::from_array(*p), dims)?;
        Ok((r.iter().map(|v| v * v).sum::<f64>().sqrt(), r))
    };
    let (mut norm, mut res) = residual_norm(&pose)?;
    let max_iterations = 100;
    for iteration in 0..max_iterations {
        if norm < 1e-10 {
            return Ok(PlatformPose::from_array(pose));
        }
        // Numeric Jacobian, central differences.
        let mut jac = [[0.0f64; 6]; 6];
        for col in 0..6 {
            let h = 1e-6;
            let mut plus = pose;
            plus[col] += h;
            let mut minus = pose;
            minus[col] -= h;
            let rp = leg_residuals_cm(angles, &PlatformPose::from_array(plus), dims)?;
            let rm = leg_residuals_cm(angles, &PlatformPose::from_array(minus), dims)?;
            for row in 0..6 {
                jac[row][col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let j = nalgebra::SMatrix::<f64, 6, 6>::from_fn(|r, c| jac[r][c]);
        let r = nalgebra::SVector::<f64, 6>::from_fn(|i, _| res[i]);
        let Some(step) = j.lu().solve(&r) else {
            return Err(StewartError::NonConvergence { residual_cm: norm, iterations: iteration });
        };
        // Step halving: accept the first damped step that shrinks the
        // residual.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = pose;
            for i in 0..6 {
                trial[i] -= scale * step[i];
            }
            if let Ok((trial_norm, trial_res)) = residual_norm(&trial) {
                if trial_norm < norm {
                    pose = trial;
                    norm = trial_norm;
                    res = trial_res;
                    accepted = true;
                    break;
                }
            }
            scale /= 2.0;
        }
        if !accepted {
            return Err(StewartError::NonConvergence { residual_cm: norm, iterations: iteration });
        }
    }
    if norm < 1e-10 {
        return Ok(PlatformPose::from_array(pose));
    }
    Err(StewartError::NonConvergence { residual_cm: norm, iterations: max_iterations })
}

/// Axis a motion mode displaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionAxis {
    X,
    Y,
    Z,
    Roll,
    Pitch,
    Yaw,
}

impl MotionAxis {
    pub fn parse(s: &str) -> Option<MotionAxis> {
        match s {
            "x" => Some(MotionAxis::X),
            "y" => Some(MotionAxis::Y),
            "z" => Some(MotionAxis::Z),
            "roll" => Some(MotionAxis::Roll),
            "pitch" => Some(MotionAxis::Pitch),
            "yaw" => Some(MotionAxis::Yaw),
            _ => None,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, MotionAxis::Roll | MotionAxis::Pitch | MotionAxis::Yaw)
    }

    pub fn token(self) -> &'static str {
        match self {
            MotionAxis::X => "x",
            MotionAxis::Y => "y",
            MotionAxis::Z => "z",
            MotionAxis::Roll => "roll",
            MotionAxis::Pitch => "pitch",
            MotionAxis::Yaw => "yaw",
        }
    }
}

/// Displacement profile shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    /// y(t) = A·sin(2πft).
    Sinusoid,
    /// y(t) = (exp(sin 2πft) − 1/e) · 2A/(e − 1/e): range [0, 2A], dwelling
    /// longer near the minimum than the maximum. Rotational axes subtract A
    /// to centre the swing.
    Breathing,
}

/// A single-axis motion mode: samples home-relative poses on the 5 µs servo
/// clock.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionMode {
    pub axis: MotionAxis,
    pub kind: MotionKind,
    pub amplitude: f64,
    pub freq_hz: f64,
}

impl MotionMode {
    pub fn new(
        axis: MotionAxis,
        kind: MotionKind,
        amplitude: f64,
        freq_hz: f64,
    ) -> Result<MotionMode, StewartError> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(StewartError::InvalidMotion { name: "amplitude", value: amplitude });
        }
        if !(freq_hz > 0.0) || !freq_hz.is_finite() {
            return Err(StewartError::InvalidMotion { name: "freq_hz", value: freq_hz });
        }
        Ok(MotionMode { axis, kind, amplitude, freq_hz })
    }

    /// Quantize t to the servo clock (floor to the 5 µs grid, robust to
    /// floating-point dust at exact multiples).
    pub fn quantize(t_s: f64) -> f64 {
        ((t_s + SERVO_TICK_S * 1e-3) / SERVO_TICK_S).floor() * SERVO_TICK_S
    }

    /// Scalar displacement at time t (cm for translation axes, degrees for
    /// rotation axes).
    pub fn displacement(&self, t_s: f64) -> f64 {
        let t = Self::quantize(t_s);
        let theta = 2.0 * PI * self.freq_hz * t;
        match self.kind {
            MotionKind::Sinusoid => self.amplitude * theta.sin(),
            MotionKind::Breathing => {
                let e = std::f64::consts::E;
                let y = (theta.sin().exp() - 1.0 / e) * 2.0 * self.amplitude / (e - 1.0 / e);
                if self.axis.is_rotation() {
                    y - self.amplitude
                } else {
                    y
                }
            }
        }
    }

    /// Home-relative pose at time t.
    pub fn pose_at(&self, t_s: f64) -> PlatformPose {
        let d = self.displacement(t_s);
        let mut pose = PlatformPose::HOME;
        match self.axis {
            MotionAxis::X => pose.x_cm = d,
            MotionAxis::Y => pose.y_cm = d,
            MotionAxis::Z => pose.z_cm = d,
            MotionAxis::Roll => pose.roll_deg = d,
            MotionAxis::Pitch => pose.pitch_deg = d,
            MotionAxis::Yaw => pose.yaw_deg = d,
        }
        pose
    }
}

/// Rotation matrix → intrinsic roll/pitch/yaw degrees (the convention
/// `PlatformPose` uses).
pub fn euler_from_rotation(rot: &Matrix3<f64>) -> (f64, f64, f64) {
    let r = Rotation3::from_matrix_unchecked(*rot);
    let (roll, pitch, yaw) = r.euler_angles();
    (roll.to_degrees(), pitch.to_degrees(), yaw.to_degrees())
}
