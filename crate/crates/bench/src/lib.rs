//! Deterministic inputs for the criterion benchmarks.

use camalign_core::correction::CorrectionInput;
use camalign_core::metrics::Trajectory;
use camalign_core::{frame_from_rotation, rpy_to_rotation, FrameTriad, RpyAngles, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random camera frames against the identity teleoperation frame.
pub fn correction_inputs(n: usize, seed: u64) -> Vec<CorrectionInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rpy = RpyAngles::from_degrees(
                rng.gen_range(0.0..360.0),
                rng.gen_range(0.0..360.0),
                rng.gen_range(0.0..360.0),
            )
            .expect("finite angles");
            CorrectionInput::new(
                FrameTriad::IDENTITY,
                frame_from_rotation(&rpy_to_rotation(&rpy)),
            )
        })
        .collect()
}

/// A smooth random walk of `n` samples at the log rate.
pub fn random_walk(n: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Vec3::new(30.0, 30.0, -180.0);
    let mut v = Vec3::ZERO;
    let points: Vec<Vec3> = (0..n)
        .map(|_| {
            let kick = Vec3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            );
            v = v * 0.9 + kick;
            p += v;
            p
        })
        .collect();
    Trajectory::from_points(points).expect("evenly spaced")
}
