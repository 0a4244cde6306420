//! Scoring oracles: the symmetric-difference count against a brute-force
//! cell walk, and rasterized disc area against the closed form.

use gauzecut::scoring::{rasterize, symmetric_difference, RegionMask};
use gauzecut::seeds;
use nalgebra::Vector2;
use rand::Rng;

#[test]
fn xor_count_matches_brute_force_on_1000_random_pairs() {
    let mut rng = seeds::stream_rng(2024, "xor-oracle");
    for trial in 0..1000 {
        let mut a = RegionMask::empty(10).unwrap();
        let mut b = RegionMask::empty(10).unwrap();
        for i in 0..100 {
            a.inside[i] = rng.gen_bool(0.5);
            b.inside[i] = rng.gen_bool(0.5);
        }
        let mut expect = 0usize;
        for i in 0..100 {
            if a.inside[i] != b.inside[i] {
                expect += 1;
            }
        }
        let score = symmetric_difference(&a, &b).unwrap();
        assert_eq!(score.xor_count, expect, "trial {trial}");
        assert!((score.normalized - expect as f64 / 100.0).abs() < 1e-15);
    }
}

#[test]
fn xor_is_symmetric_and_zero_on_self() {
    let mut rng = seeds::stream_rng(2024, "xor-props");
    for _ in 0..50 {
        let mut a = RegionMask::empty(10).unwrap();
        let mut b = RegionMask::empty(10).unwrap();
        for i in 0..100 {
            a.inside[i] = rng.gen_bool(0.3);
            b.inside[i] = rng.gen_bool(0.7);
        }
        assert_eq!(symmetric_difference(&a, &a).unwrap().xor_count, 0);
        assert_eq!(
            symmetric_difference(&a, &b).unwrap().xor_count,
            symmetric_difference(&b, &a).unwrap().xor_count
        );
    }
}

#[test]
fn disc_area_converges_within_one_percent_at_res_200() {
    // A fine polygon approximation of the disc r = 0.3 at (0.5, 0.5); the
    // rasterized cell fraction must match pi r^2 within 1%.
    let n = 2048;
    let r = 0.3;
    let polygon: Vec<Vector2<f64>> = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            Vector2::new(0.5 + r * a.cos(), 0.5 + r * a.sin())
        })
        .collect();
    let mask = rasterize(&polygon, 200).unwrap();
    let measured = mask.inside_count() as f64 / (200.0 * 200.0);
    let exact = std::f64::consts::PI * r * r;
    let rel = ((measured - exact) / exact).abs();
    assert!(rel < 0.01, "disc area {measured} vs {exact} (rel err {rel})");
}

#[test]
fn disc_area_error_shrinks_with_resolution() {
    let n = 2048;
    let r = 0.3;
    let polygon: Vec<Vector2<f64>> = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            Vector2::new(0.5 + r * a.cos(), 0.5 + r * a.sin())
        })
        .collect();
    let exact = std::f64::consts::PI * r * r;
    let err_at = |res: usize| {
        let mask = rasterize(&polygon, res).unwrap();
        let measured = mask.inside_count() as f64 / (res as f64 * res as f64);
        ((measured - exact) / exact).abs()
    };
    // Coarse-to-fine refinement: x4 resolution should not make things worse.
    assert!(err_at(200) <= err_at(50));
}
