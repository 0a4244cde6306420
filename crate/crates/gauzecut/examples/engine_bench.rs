//! Quick throughput probe for the cloth engine: steps/second on the default
//! 25x25 corner-pinned mesh, and an episode-shaped workload (settle + sever).

use std::time::Instant;

use gauzecut::cloth::{ClothParams, ClothState, PinLayout, DEFAULT_SPACING_MM};

fn main() {
    let mut cloth = ClothState::new_mesh(
        25,
        25,
        DEFAULT_SPACING_MM,
        &PinLayout::Corners,
        ClothParams::default(),
    )
    .unwrap();

    // Warm up and settle a bit.
    cloth.run(1000);

    let steps = 100_000;
    let t0 = Instant::now();
    cloth.run(steps);
    let dt = t0.elapsed();
    println!(
        "plain steps: {steps} in {:?} ({:.1} us/step, {:.0} steps/s)",
        dt,
        dt.as_secs_f64() * 1e6 / steps as f64,
        steps as f64 / dt.as_secs_f64()
    );

    // Episode-shaped: 80 waypoints x 20 settle steps, severing as we go.
    let base = ClothState::new_mesh(
        25,
        25,
        DEFAULT_SPACING_MM,
        &PinLayout::Corners,
        ClothParams::default(),
    )
    .unwrap();
    let episodes = 50;
    let t0 = Instant::now();
    let mut sink = 0.0f64;
    for _ in 0..episodes {
        let mut c = base.clone();
        for w in 0..80 {
            c.run(20);
            // Sever a vertex along a circle-ish path.
            let v = (w * 7) % c.vertex_count();
            c.sever_vertex(v);
        }
        sink += c.kinetic_energy();
    }
    let dt = t0.elapsed();
    println!(
        "episodes: {episodes} in {:?} ({:.1} ms/episode) sink={sink:e}",
        dt,
        dt.as_secs_f64() * 1e3 / episodes as f64
    );
}
