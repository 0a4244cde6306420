//! Movable-camera math: pinhole projection, the rigid approximation of an
//! image-space transform pulled back to the world frame, and conversion of
//! that rigid transform into a platform pose.
//!
//! World coordinates are millimetres (the cloth frame). The pull-back
//! x' = (CᵀC)†·Cᵀ·T·C·x uses the Moore–Penrose pseudo-inverse, i.e. the
//! minimum-norm homogeneous preimage of the transformed image point: x' lies
//! on the same viewing ray as T's image of x, but is generally a different
//! point along that ray (the lift reproduces x only when the homogeneous
//! lift of x lies in C's row space). The Kabsch/Procrustes fit then extracts
//! the nearest rigid motion over the workspace samples and surfaces the
//! per-sample residuals as the cost of the rigid approximation. T is
//! accepted as any invertible homogeneous 3×3 image transform; rigidity of T
//! is the caller's modeling choice, and a non-rigid T simply shows up in the
//! residuals.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3, Vector4};

use crate::stewart::{
    euler_from_rotation, range_check, PlatformPose, SOFT_RANGE_ROTATION_DEG,
    SOFT_RANGE_TRANSLATION_CM,
};

/// |w| below this after a perspective divide is treated as degenerate.
pub const DEPTH_EPS: f64 = 1e-12;

#[derive(Debug)]
pub enum CameraError {
    RankDeficientCamera,
    TooFewSamples { count: usize },
    CoplanarSamples,
    DegenerateDepth,
    /// The minimum-norm lift of a transformed sample has no finite
    /// dehomogenization (w ≈ 0).
    DegenerateLift { sample: usize },
    SingularImageTransform,
    Parse { line: usize, content: String },
    Io(std::io::Error),
}

impl fmt::Display for CameraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CameraError::RankDeficientCamera => {
                write!(f, "camera matrix must have rank 3")
            }
            CameraError::TooFewSamples { count } => {
                write!(f, "need at least 4 workspace samples, got {count}")
            }
            CameraError::CoplanarSamples => {
                write!(f, "workspace samples are coplanar; rigid fitting is ambiguous")
            }
            CameraError::DegenerateDepth => {
                write!(f, "point projects to w ≈ 0 (principal plane)")
            }
            CameraError::DegenerateLift { sample } => {
                write!(f, "sample {sample}: lifted preimage has w ≈ 0")
            }
            CameraError::SingularImageTransform => {
                write!(f, "image transform is singular")
            }
            CameraError::Parse { line, content } => {
                write!(f, "parse error on line {line}: {content:?}")
            }
            CameraError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CameraError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CameraError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for CameraError {
    fn from(e: std::io::Error) -> Self {
        CameraError::Io(e)
    }
}

/// Pinhole camera plus the workspace sample cloud used for rigid fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    c: Matrix3x4<f64>,
    samples: Vec<Vector3<f64>>,
}

impl CameraModel {
    /// Validates rank 3 and ≥ 4 non-coplanar samples.
    pub fn new(c: Matrix3x4<f64>, samples: Vec<Vector3<f64>>) -> Result<Self, CameraError> {
        let sv = c.svd(false, false).singular_values;
        let max_sv = sv.iter().fold(0.0f64, |a, &s| a.max(s));
        if sv.iter().any(|&s| s <= 1e-10 * max_sv.max(1.0)) {
            return Err(CameraError::RankDeficientCamera);
        }
        if samples.len() < 4 {
            return Err(CameraError::TooFewSamples { count: samples.len() });
        }
        let centroid =
            samples.iter().sum::<Vector3<f64>>() / samples.len() as f64;
        let mut cov = Matrix3::<f64>::zeros();
        for s in &samples {
            let d = s - centroid;
            cov += d * d.transpose();
        }
        let csv = cov.svd(false, false).singular_values;
        let scale = csv.iter().fold(0.0f64, |a, &s| a.max(s));
        if csv.iter().any(|&s| s <= 1e-12 * scale.max(1.0)) {
            return Err(CameraError::CoplanarSamples);
        }
        Ok(CameraModel { c, samples })
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.c
    }

    pub fn samples(&self) -> &[Vector3<f64>] {
        &self.samples
    }

    /// Homogeneous projection with perspective divide: y = C·(x;1).
    pub fn project(&self, x: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
        project(&self.c, x)
    }
}

/// y = C·(x;1) with perspective divide; errors on w ≈ 0.
pub fn project(c: &Matrix3x4<f64>, x: &Vector3<f64>) -> Result<Vector2<f64>, CameraError> {
    let y = c * Vector4::new(x.x, x.y, x.z, 1.0);
    if y.z.abs() < DEPTH_EPS {
        return Err(CameraError::DegenerateDepth);
    }
    Ok(Vector2::new(y.x / y.z, y.y / y.z))
}

/// A rigid world-frame motion x ↦ R·x + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// self ∘ other: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// (R|t) as a row-major 12-number row: r11,r12,r13,tx,r21,…,tz.
    pub fn to_row(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn write_row_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "r11,r12,r13,tx,r21,r22,r23,ty,r31,r32,r33,tz")?;
        let row = self.to_row();
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))
    }
}

/// Rigid fit of an image-space transform pulled back into the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidFit {
    pub transform: RigidTransform,
    /// |f_rigid(x_k) − x'_k| per workspace sample: the approximation cost.
    pub residuals_mm: Vec<f64>,
    /// The pulled-back points x'_k the fit targets.
    pub mapped_mm: Vec<Vector3<f64>>,
}

impl RigidFit {
    pub fn max_residual_mm(&self) -> f64 {
        self.residuals_mm.iter().fold(0.0, |a, &r| a.max(r))
    }
}

/// Nearest rigid transform mapping `from` onto `to` (Kabsch, det-corrected),
/// plus per-point residuals.
pub fn fit_rigid(
    from: &[Vector3<f64>],
    to: &[Vector3<f64>],
) -> (RigidTransform, Vec<f64>) {
    assert_eq!(from.len(), to.len(), "point sets must pair up");
    let n = from.len() as f64;
    let from_bar = from.iter().sum::<Vector3<f64>>() / n;
    let to_bar = to.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::<f64>::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (a - from_bar) * (b - to_bar).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v = svd.v_t.expect("svd with v_t").transpose();
    let d = (v * u.transpose()).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum()));
    let rotation = v * correction * u.transpose();
    let translation = to_bar - rotation * from_bar;
    let rigid = RigidTransform { rotation, translation };
    let residuals = from.iter().zip(to).map(|(a, b)| (rigid.apply(a) - b).norm()).collect();
    (rigid, residuals)
}

/// Pull the homogeneous image transform `t_image` back to the world frame:
/// x'_k = dehom((CᵀC)†·Cᵀ·T·C·(x_k;1)) over the workspace samples, then fit
/// the nearest rigid motion x_k → x'_k.
pub fn rigid_inverse_map(
    model: &CameraModel,
    t_image: &Matrix3<f64>,
) -> Result<RigidFit, CameraError> {
    if t_image.determinant().abs() < 1e-15 {
        return Err(CameraError::SingularImageTransform);
    }
    let pinv = model
        .c
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .map_err(|_| CameraError::RankDeficientCamera)?;
    let back = pinv * t_image * model.c; // 4×4 acting on homogeneous world points
    let mut mapped = Vec::with_capacity(model.samples.len());
    for (k, s) in model.samples.iter().enumerate() {
        let xh = back * Vector4::new(s.x, s.y, s.z, 1.0);
        if xh.w.abs() < DEPTH_EPS {
            return Err(CameraError::DegenerateLift { sample: k });
        }
        mapped.push(Vector3::new(xh.x / xh.w, xh.y / xh.w, xh.z / xh.w));
    }
    let (transform, residuals_mm) = fit_rigid(&model.samples, &mapped);
    Ok(RigidFit { transform, residuals_mm, mapped_mm: mapped })
}

/// Outcome of converting a rigid camera-motion transform to a platform pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoseOutcome {
    InRange(PlatformPose),
    /// The requested pose exceeds the soft operating range; `clamped` is the
    /// nearest componentwise in-range pose.
    OutOfRange { requested: PlatformPose, clamped: PlatformPose },
}

impl PoseOutcome {
    pub fn pose(&self) -> &PlatformPose {
        match self {
            PoseOutcome::InRange(p) => p,
            PoseOutcome::OutOfRange { clamped, .. } => clamped,
        }
    }
}

/// Convert f_rigid (translation in mm, rotation matrix) into a platform pose
/// (cm, degrees). Out-of-range requests are clamped componentwise and
/// reported, never failed.
pub fn pose_for_camera_motion(f_rigid: &RigidTransform) -> PoseOutcome {
    let (roll, pitch, yaw) = euler_from_rotation(&f_rigid.rotation);
    let requested = PlatformPose {
        x_cm: f_rigid.translation.x / 10.0,
        y_cm: f_rigid.translation.y / 10.0,
        z_cm: f_rigid.translation.z / 10.0,
        roll_deg: roll,
        pitch_deg: pitch,
        yaw_deg: yaw,
    };
    if range_check(&requested) {
        PoseOutcome::InRange(requested)
    } else {
        let t = SOFT_RANGE_TRANSLATION_CM;
        let r = SOFT_RANGE_ROTATION_DEG;
        let clamped = PlatformPose {
            x_cm: requested.x_cm.clamp(-t, t),
            y_cm: requested.y_cm.clamp(-t, t),
            z_cm: requested.z_cm.clamp(-t, t),
            roll_deg: requested.roll_deg.clamp(-r, r),
            pitch_deg: requested.pitch_deg.clamp(-r, r),
            yaw_deg: requested.yaw_deg.clamp(-r, r),
        };
        PoseOutcome::OutOfRange { requested, clamped }
    }
}

/// Parse a 3×4 camera matrix from CSV text (three rows of four numbers;
/// `#` comments and blank lines ignored).
pub fn parse_camera_matrix(text: &str) -> Result<Matrix3x4<f64>, CameraError> {
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 || rows.len() == 3 {
            return Err(CameraError::Parse { line: idx + 1, content: raw.to_string() });
        }
        let mut row = [0.0f64; 4];
        for (j, cell) in cells.iter().enumerate() {
            row[j] = cell.parse().map_err(|_| CameraError::Parse {
                line: idx + 1,
                content: raw.to_string(),
            })?;
        }
        rows.push(row);
    }
    if rows.len() != 3 {
        return Err(CameraError::Parse { line: 0, content: "expected 3 rows".to_string() });
    }
    Ok(Matrix3x4::from_fn(|i, j| rows[i][j]))
}

/// Parse an x,y,z point cloud from CSV text (`#` comments, blank lines, and
/// an optional `x,y,z` header ignored).
pub fn parse_points(text: &str) -> Result<Vec<Vector3<f64>>, CameraError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // Header allowed anywhere before the first data row.
        if out.is_empty() && line.eq_ignore_ascii_case("x,y,z") {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(CameraError::Parse { line: idx + 1, content: raw.to_string() });
        }
        let mut p = [0.0f64; 3];
        for (j, cell) in cells.iter().enumerate() {
            p[j] = cell.parse().map_err(|_| CameraError::Parse {
                line: idx + 1,
                content: raw.to_string(),
            })?;
        }
        out.push(Vector3::new(p[0], p[1], p[2]));
    }
    Ok(out)
}

pub fn load_camera_matrix<P: AsRef<Path>>(path: P) -> Result<Matrix3x4<f64>, CameraError> {
    parse_camera_matrix(&std::fs::read_to_string(path)?)
}

pub fn load_points<P: AsRef<Path>>(path: P) -> Result<Vec<Vector3<f64>>, CameraError> {
    parse_points(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    use crate::seeds;

    /// Orthographic-like camera: image (x, y) regardless of depth.
    fn ortho() -> Matrix3x4<f64> {
        Matrix3x4::from_rows(&[
            [1.0, 0.0, 0.0, 0.0].into(),
            [0.0, 1.0, 0.0, 0.0].into(),
            [0.0, 0.0, 0.0, 1.0].into(),
        ])
    }

    /// Zero-mean, xy-isotropic, z-uncorrelated cloud (non-coplanar).
    fn symmetric_cloud(a: f64, b: f64) -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(a, 0.0, b),
            Vector3::new(-a, 0.0, b),
            Vector3::new(0.0, a, -b),
            Vector3::new(0.0, -a, -b),
        ]
    }

    fn generic_cloud(seed: u64, n: usize) -> Vec<Vector3<f64>> {
        let mut rng = seeds::stream_rng(seed, "camera-cloud");
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-40.0..40.0),
                    rng.gen_range(-40.0..40.0),
                    rng.gen_range(-60.0..60.0),
                )
            })
            .collect()
    }

    fn perspective() -> Matrix3x4<f64> {
        // K·[I | t] with focal 500, principal point (320, 240), camera
        // 600 mm behind the workspace origin: depths stay safely positive
        // and the translation column keeps the pseudo-inverse lift
        // non-degenerate.
        Matrix3x4::from_rows(&[
            [500.0, 0.0, 320.0, 192_000.0].into(),
            [0.0, 500.0, 240.0, 144_000.0].into(),
            [0.0, 0.0, 1.0, 600.0].into(),
        ])
    }

    fn image_rotation(theta_rad: f64) -> Matrix3<f64> {
        let (s, c) = theta_rad.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    fn image_translation(dx: f64, dy: f64) -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0)
    }

    #[test]
    fn canonical_projection() {
        let canonical = Matrix3x4::from_rows(&[
            [1.0, 0.0, 0.0, 0.0].into(),
            [0.0, 1.0, 0.0, 0.0].into(),
            [0.0, 0.0, 1.0, 0.0].into(),
        ]);
        let y = project(&canonical, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(y.x, 0.0);
        assert_relative_eq!(y.y, 0.0);
        let y = project(&canonical, &Vector3::new(1.0, 2.0, 2.0)).unwrap();
        assert_relative_eq!(y.x, 0.5);
        assert_relative_eq!(y.y, 1.0);
        assert!(matches!(
            project(&canonical, &Vector3::new(1.0, 2.0, 0.0)),
            Err(CameraError::DegenerateDepth)
        ));
    }

    #[test]
    fn model_validation() {
        let cloud = symmetric_cloud(10.0, 5.0);
        // Duplicate row → rank 2.
        let degenerate = Matrix3x4::from_rows(&[
            [1.0, 0.0, 0.0, 0.0].into(),
            [1.0, 0.0, 0.0, 0.0].into(),
            [0.0, 0.0, 0.0, 1.0].into(),
        ]);
        assert!(matches!(
            CameraModel::new(degenerate, cloud.clone()),
            Err(CameraError::RankDeficientCamera)
        ));
        assert!(matches!(
            CameraModel::new(ortho(), cloud[..3].to_vec()),
            Err(CameraError::TooFewSamples { count: 3 })
        ));
        let flat: Vec<Vector3<f64>> = (0..5)
            .map(|i| Vector3::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        assert!(matches!(
            CameraModel::new(ortho(), flat),
            Err(CameraError::CoplanarSamples)
        ));
        assert!(CameraModel::new(ortho(), cloud).is_ok());
    }

    #[test]
    fn identity_transform_fits_identity_with_lift_residuals() {
        // The lift flattens z to the minimum-norm preimage (z = 0 for the
        // orthographic camera), so the fitted transform is the identity while
        // each residual is exactly |z_k|.
        let cloud = symmetric_cloud(10.0, 4.0);
        let model = CameraModel::new(ortho(), cloud.clone()).unwrap();
        let fit = rigid_inverse_map(&model, &Matrix3::identity()).unwrap();
        assert!((fit.transform.rotation - Matrix3::identity()).norm() < 1e-9);
        assert!(fit.transform.translation.norm() < 1e-9);
        for (k, r) in fit.residuals_mm.iter().enumerate() {
            assert_relative_eq!(*r, cloud[k].z.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn orthographic_translation_recovery() {
        // A pure world translation (3, −2, 0) induces an image translation
        // under the orthographic camera; the pull-back recovers it.
        let model = CameraModel::new(ortho(), symmetric_cloud(12.0, 6.0)).unwrap();
        let fit = rigid_inverse_map(&model, &image_translation(3.0, -2.0)).unwrap();
        assert!((fit.transform.rotation - Matrix3::identity()).norm() < 1e-9);
        assert_relative_eq!(fit.transform.translation.x, 3.0, epsilon = 1e-6);
        assert_relative_eq!(fit.transform.translation.y, -2.0, epsilon = 1e-6);
        assert!(fit.transform.translation.z.abs() < 1e-6);
    }

    #[test]
    fn procrustes_rotation_always_orthogonal() {
        let mut rng = seeds::stream_rng(17, "camera-procrustes");
        for trial in 0..50 {
            let cloud = generic_cloud(1000 + trial, 8);
            let model = CameraModel::new(perspective(), cloud).unwrap();
            let t = image_rotation(rng.gen_range(-0.3..0.3))
                * image_translation(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let fit = rigid_inverse_map(&model, &t).unwrap();
            let r = &fit.transform.rotation;
            assert!(
                (r.transpose() * r - Matrix3::identity()).norm() < 1e-9,
                "trial {trial}: RᵀR deviates"
            );
            assert!((r.determinant() - 1.0).abs() < 1e-9, "trial {trial}: det");
            assert!(fit.residuals_mm.iter().all(|&x| x.is_finite() && x >= 0.0));
        }
    }

    #[test]
    fn composition_consistency_exact_on_symmetric_cloud() {
        // Image rotations about the origin pull back to world z-rotations
        // exactly on the symmetric cloud, so composition is exact.
        let model = CameraModel::new(ortho(), symmetric_cloud(9.0, 3.0)).unwrap();
        let t1 = image_rotation(0.2);
        let t2 = image_rotation(-0.35);
        let f1 = rigid_inverse_map(&model, &t1).unwrap().transform;
        let f2 = rigid_inverse_map(&model, &t2).unwrap().transform;
        let f12 = rigid_inverse_map(&model, &(t1 * t2)).unwrap().transform;
        let composed = f1.compose(&f2);
        assert!((composed.rotation - f12.rotation).norm() < 1e-9);
        assert!((composed.translation - f12.translation).norm() < 1e-9);
    }

    #[test]
    fn composition_consistency_within_residual_tolerance() {
        let model = CameraModel::new(perspective(), generic_cloud(7, 10)).unwrap();
        let t1 = image_rotation(0.1) * image_translation(4.0, -3.0);
        let t2 = image_rotation(-0.15) * image_translation(-2.0, 5.0);
        let fit1 = rigid_inverse_map(&model, &t1).unwrap();
        let fit2 = rigid_inverse_map(&model, &t2).unwrap();
        let fit12 = rigid_inverse_map(&model, &(t1 * t2)).unwrap();
        let composed = fit1.transform.compose(&fit2.transform);
        let tol = (fit1.max_residual_mm() + fit2.max_residual_mm() + fit12.max_residual_mm())
            .max(1e-9)
            * 4.0;
        for s in model.samples() {
            let gap = (composed.apply(s) - fit12.transform.apply(s)).norm();
            assert!(gap <= tol, "gap {gap} vs tolerance {tol}");
        }
    }

    #[test]
    fn pose_conversion_examples() {
        match pose_for_camera_motion(&RigidTransform::identity()) {
            PoseOutcome::InRange(p) => {
                for v in p.as_array() {
                    assert!(v.abs() < 1e-12);
                }
            }
            other => panic!("identity should be in range, got {other:?}"),
        }
        // 5 mm x-translation → 0.5 cm pose.
        let shift = RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::new(5.0, 0.0, 0.0),
        };
        match pose_for_camera_motion(&shift) {
            PoseOutcome::InRange(p) => {
                assert_relative_eq!(p.x_cm, 0.5, epsilon = 1e-12);
                assert_relative_eq!(p.yaw_deg, 0.0, epsilon = 1e-12);
            }
            other => panic!("0.5 cm is in range, got {other:?}"),
        }
        // 30° yaw → out of range, clamped to 15°.
        let yaw30 = RigidTransform {
            rotation: *nalgebra::Rotation3::from_euler_angles(
                0.0,
                0.0,
                30.0f64.to_radians(),
            )
            .matrix(),
            translation: Vector3::zeros(),
        };
        match pose_for_camera_motion(&yaw30) {
            PoseOutcome::OutOfRange { requested, clamped } => {
                assert_relative_eq!(requested.yaw_deg, 30.0, epsilon = 1e-9);
                assert_relative_eq!(clamped.yaw_deg, 15.0, epsilon = 1e-12);
                assert_relative_eq!(clamped.x_cm, 0.0, epsilon = 1e-12);
            }
            other => panic!("30° yaw must be out of range, got {other:?}"),
        }
    }

    #[test]
    fn row_export_layout() {
        let f = RigidTransform {
            rotation: Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0),
            translation: Vector3::new(10.0, 11.0, 12.0),
        };
        let row = f.to_row();
        assert_eq!(row[..4], [1.0, 2.0, 3.0, 10.0]);
        assert_eq!(row[4..8], [4.0, 5.0, 6.0, 11.0]);
        assert_eq!(row[8..], [7.0, 8.0, 9.0, 12.0]);
        let mut buf = Vec::new();
        f.write_row_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r11,"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn csv_parsing() {
        let cam = parse_camera_matrix(
            "# camera\n1,0,0,0\n0,1,0,0\n0,0,0,1\n",
        )
        .unwrap();
        assert_eq!(cam, ortho());
        assert!(matches!(
            parse_camera_matrix("1,0,0\n"),
            Err(CameraError::Parse { line: 1, .. })
        ));
        let pts = parse_points("x,y,z\n1,2,3\n# c\n4,5,6\n").unwrap();
        assert_eq!(pts.len(), 2);
        assert_relative_eq!(pts[1].z, 6.0);
        // The header may follow comments; after data it is just a bad row.
        let pts = parse_points("# cloud\nX,Y,Z\n1,2,3\n").unwrap();
        assert_eq!(pts.len(), 1);
        assert!(parse_points("1,2,3\nx,y,z\n").is_err());
        assert!(matches!(
            parse_points("1,2\n"),
            Err(CameraError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn degenerate_lift_is_reported() {
        // The canonical camera's pseudo-inverse lifts every image point to
        // w = 0; the error names the offending sample.
        let canonical = Matrix3x4::from_rows(&[
            [1.0, 0.0, 0.0, 0.0].into(),
            [0.0, 1.0, 0.0, 0.0].into(),
            [0.0, 0.0, 1.0, 0.0].into(),
        ]);
        let model = CameraModel::new(canonical, symmetric_cloud(5.0, 2.0)).unwrap();
        assert!(matches!(
            rigid_inverse_map(&model, &Matrix3::identity()),
            Err(CameraError::DegenerateLift { sample: 0 })
        ));
    }
}
