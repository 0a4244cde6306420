//! Kinematics oracles: inverse-kinematics loop closure re-derived from raw
//! attachment geometry, forward-kinematics round trips, and the motion-mode
//! closed forms.

use gauzecut::seeds;
use gauzecut::stewart::{
    attachment_layout, forward_kinematics, inverse_kinematics, MotionAxis, MotionKind,
    MotionMode, PlatformDims, PlatformPose, SOFT_RANGE_ROTATION_DEG, SOFT_RANGE_TRANSLATION_CM,
};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn sample_pose(rng: &mut ChaCha8Rng) -> PlatformPose {
    let t = SOFT_RANGE_TRANSLATION_CM;
    let r = SOFT_RANGE_ROTATION_DEG;
    PlatformPose {
        x_cm: rng.gen_range(-t..=t),
        y_cm: rng.gen_range(-t..=t),
        z_cm: rng.gen_range(-t..=t),
        roll_deg: rng.gen_range(-r..=r),
        pitch_deg: rng.gen_range(-r..=r),
        yaw_deg: rng.gen_range(-r..=r),
    }
}

#[test]
fn ik_satisfies_loop_closure_from_raw_geometry() {
    // For every solved pose, rebuild each horn tip from (alpha, beta, L1)
    // with plain vector arithmetic and check the tip-to-anchor distance is
    // L2: the linkage loop closes. This re-derives the residual from the
    // geometry instead of calling the library's residual helper.
    let dims = PlatformDims::default();
    let layout = attachment_layout(&dims).unwrap();
    let mut rng = seeds::stream_rng(7, "ik-closure");
    let mut solved = 0usize;
    let mut tried = 0usize;
    while solved < 300 && tried < 60_000 {
        tried += 1;
        let pose = sample_pose(&mut rng);
        let Ok(sol) = inverse_kinematics(&pose, &dims) else {
            continue;
        };
        solved += 1;
        let rot = pose.rotation_matrix();
        let t = Vector3::new(pose.x_cm, pose.y_cm, dims.z_home_cm + pose.z_cm);
        for leg in 0..6 {
            let alpha = sol.angles.alpha_deg[leg].to_radians();
            let beta = layout.beta_rad[leg];
            let tip = layout.base_cm[leg]
                + dims.l1_cm
                    * Vector3::new(
                        alpha.cos() * beta.cos(),
                        alpha.cos() * beta.sin(),
                        alpha.sin(),
                    );
            let anchor = rot * layout.platform_cm[leg] + t;
            let residual = (anchor - tip).norm() - dims.l2_cm;
            assert!(
                residual.abs() < 1e-9,
                "pose {pose:?} leg {leg} residual {residual}"
            );
        }
    }
    assert_eq!(solved, 300, "only {solved} solvable poses in {tried} draws");
}

#[test]
fn forward_kinematics_inverts_ik_on_sampled_poses() {
    let dims = PlatformDims::default();
    let mut rng = seeds::stream_rng(8, "fk-roundtrip");
    let mut solved = 0usize;
    let mut tried = 0usize;
    while solved < 200 && tried < 60_000 {
        tried += 1;
        let pose = sample_pose(&mut rng);
        let Ok(sol) = inverse_kinematics(&pose, &dims) else {
            continue;
        };
        solved += 1;
        let recovered = forward_kinematics(&sol.angles, &dims, None).unwrap();
        let a = pose.as_array();
        let b = recovered.as_array();
        for i in 0..6 {
            assert!(
                (a[i] - b[i]).abs() < 1e-6,
                "pose {pose:?} component {i}: {} vs {}",
                a[i],
                b[i]
            );
        }
    }
    assert_eq!(solved, 200, "only {solved} solvable poses in {tried} draws");
}

#[test]
fn sinusoid_mode_matches_closed_form() {
    let amp = 1.27;
    let freq = 0.2;
    let mode = MotionMode::new(MotionAxis::Z, MotionKind::Sinusoid, amp, freq).unwrap();
    for k in 0..5000 {
        let t = 7.7e-4 * k as f64;
        let tq = MotionMode::quantize(t);
        let expect = amp * (2.0 * std::f64::consts::PI * freq * tq).sin();
        let got = mode.displacement(t);
        assert!((got - expect).abs() < 1e-12, "t = {t}: {got} vs {expect}");
    }
}

#[test]
fn breathing_mode_range_and_initial_value() {
    let amp = 2.0;
    let freq = 0.25;
    let mode = MotionMode::new(MotionAxis::Z, MotionKind::Breathing, amp, freq).unwrap();
    let e = std::f64::consts::E;
    // y(0) = 2A/(e+1), range exactly [0, 2A] at the sine extrema.
    assert!((mode.displacement(0.0) - 2.0 * amp / (e + 1.0)).abs() < 1e-12);
    let period = 1.0 / freq;
    let at_max = mode.displacement(period / 4.0);
    let at_min = mode.displacement(3.0 * period / 4.0);
    assert!((at_max - 2.0 * amp).abs() < 1e-9);
    assert!(at_min.abs() < 1e-9);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..=4000 {
        let y = mode.displacement(period * k as f64 / 4000.0);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    assert!(lo >= 0.0 - 1e-12 && hi <= 2.0 * amp + 1e-12);
}

#[test]
fn breathing_dwells_longer_near_minimum_than_maximum() {
    let amp = 1.0;
    let freq = 0.5;
    let mode = MotionMode::new(MotionAxis::Z, MotionKind::Breathing, amp, freq).unwrap();
    let period = 1.0 / freq;
    let samples = 200_000;
    let band = 0.05 * 2.0 * amp;
    let mut near_min = 0usize;
    let mut near_max = 0usize;
    for k in 0..samples {
        let y = mode.displacement(period * k as f64 / samples as f64);
        if y <= band {
            near_min += 1;
        }
        if y >= 2.0 * amp - band {
            near_max += 1;
        }
    }
    assert!(
        near_min > near_max,
        "min-dwell {near_min} vs max-dwell {near_max}"
    );
}
