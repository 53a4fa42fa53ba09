//! Closed-form roll correction of a misaligned camera view.
//!
//! The corrected frame `{C}` is the actual camera frame `{A}` spun about its own
//! Z axis by `θ`. The angle maximizes the summed cosine similarity between the
//! X and Y axes of `{C}` and the teleoperation frame `{T}`:
//!
//! ```text
//! X_C = X_A cos θ + Y_A sin θ
//! Y_C = Y_A cos θ − X_A sin θ
//! θ*  = atan2(X_T·Y_A − Y_T·X_A, X_T·X_A + Y_T·Y_A)
//! ```

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameTriad, UnitVec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionInput {
    /// Frame of the teleoperation input device, `{T}`.
    pub teleop_frame: FrameTriad,
    /// Frame of the physical camera, `{A}`.
    pub actual_frame: FrameTriad,
}

impl CorrectionInput {
    pub fn new(teleop_frame: FrameTriad, actual_frame: FrameTriad) -> Self {
        CorrectionInput {
            teleop_frame,
            actual_frame,
        }
    }

    /// `(sin coefficient, cos coefficient)` of the objective as a function of θ.
    fn coefficients(&self) -> (f64, f64) {
        let (xt, yt) = (self.teleop_frame.x.get(), self.teleop_frame.y.get());
        let (xa, ya) = (self.actual_frame.x.get(), self.actual_frame.y.get());
        (xt.dot(ya) - yt.dot(xa), xt.dot(xa) + yt.dot(ya))
    }
}

/// `X_T·X_C + Y_T·Y_C` for the frame `{A}` rolled by `theta`; lies in `[-2, 2]`.
pub fn alignment_objective(input: &CorrectionInput, theta: f64) -> f64 {
    let corrected = apply_roll_correction(&input.actual_frame, theta);
    input.teleop_frame.x.get().dot(corrected.x.get())
        + input.teleop_frame.y.get().dot(corrected.y.get())
}

/// Roll angle in `(-π, π]` that best aligns the camera's X/Y axes with the
/// operator's.
///
/// Fails with [`Error::DegenerateAlignment`] when both atan2 arguments are
/// exactly zero, in which case the objective does not depend on θ.
pub fn correction_angle(input: &CorrectionInput) -> Result<f64> {
    let (s, c) = input.coefficients();
    if s == 0.0 && c == 0.0 {
        return Err(Error::DegenerateAlignment);
    }
    let theta = s.atan2(c);
    // atan2 returns -π for (-0.0, negative); fold it onto +π
    Ok(if theta <= -PI { PI } else { theta })
}

/// Rotates `frame` about its own Z axis by `theta`. Z is carried over untouched.
pub fn apply_roll_correction(frame: &FrameTriad, theta: f64) -> FrameTriad {
    let (s, c) = theta.sin_cos();
    let (xa, ya) = (frame.x.get(), frame.y.get());
    FrameTriad {
        x: UnitVec3::new_unchecked(xa * c + ya * s),
        y: UnitVec3::new_unchecked(ya * c - xa * s),
        z: frame.z,
    }
}

/// Exhaustive search over `grid_size` evenly spaced angles in `(-π, π]`.
/// Ties keep the smallest angle.
pub fn brute_force_correction(input: &CorrectionInput, grid_size: usize) -> Result<f64> {
    if grid_size < 16 {
        return Err(Error::invalid(format!("grid size {grid_size} is below 16")));
    }
    let step = TAU / grid_size as f64;
    let mut best = (f64::NEG_INFINITY, PI);
    for k in 0..grid_size {
        let theta = if k + 1 == grid_size {
            PI
        } else {
            -PI + (k + 1) as f64 * step
        };
        let value = alignment_objective(input, theta);
        if value > best.0 {
            best = (value, theta);
        }
    }
    Ok(best.1)
}

/// Shortest signed difference between two angles, in `[-π, π]`.
pub fn wrap_angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frame_from_rotation, rpy_to_rotation, RotationMatrix, RpyAngles, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng) -> FrameTriad {
        let rpy = RpyAngles::new(
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
        )
        .unwrap();
        frame_from_rotation(&rpy_to_rotation(&rpy))
    }

    fn rolled(frame: &FrameTriad, phi: f64) -> FrameTriad {
        frame_from_rotation(&frame.to_rotation().mul(&RotationMatrix::rot_z(phi)))
    }

    #[test]
    fn objective_extremes() {
        let same = CorrectionInput::new(FrameTriad::IDENTITY, FrameTriad::IDENTITY);
        assert!((alignment_objective(&same, 0.0) - 2.0).abs() < 1e-15);
        assert!((alignment_objective(&same, PI) + 2.0).abs() < 1e-15);

        let phi = 0.83;
        let a = rolled(&FrameTriad::IDENTITY, phi);
        let input = CorrectionInput::new(FrameTriad::IDENTITY, a);
        assert!((alignment_objective(&input, -phi) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn antipodal_axes_give_half_turn() {
        let t = FrameTriad::IDENTITY;
        let a = FrameTriad::new(-Vec3::X, -Vec3::Y, Vec3::Z).unwrap();
        let theta = correction_angle(&CorrectionInput::new(t, a)).unwrap();
        assert_eq!(theta, PI);
    }

    #[test]
    fn shared_x_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let alpha: f64 = rng.gen_range(-3.0..3.0);
            let a = frame_from_rotation(&RotationMatrix::rot_x(alpha));
            let theta = correction_angle(&CorrectionInput::new(FrameTriad::IDENTITY, a)).unwrap();
            assert!(theta.abs() < 1e-12);
        }
    }

    #[test]
    fn roll_about_shared_z_is_undone() {
        let phi = 37f64.to_radians();
        let a = rolled(&FrameTriad::IDENTITY, phi);
        let input = CorrectionInput::new(FrameTriad::IDENTITY, a);
        let theta = correction_angle(&input).unwrap();
        assert!((theta + phi).abs() < 1e-12);
        let oracle = brute_force_correction(&input, 4096).unwrap();
        assert!(wrap_angle_diff(theta, oracle).abs() <= TAU / 4096.0);
    }

    #[test]
    fn degenerate_half_turn_about_x() {
        let a = FrameTriad::new(Vec3::X, -Vec3::Y, -Vec3::Z).unwrap();
        let err = correction_angle(&CorrectionInput::new(FrameTriad::IDENTITY, a));
        assert!(matches!(err, Err(Error::DegenerateAlignment)));
    }

    #[test]
    fn apply_roll_cases() {
        let f = FrameTriad::IDENTITY;
        assert_eq!(apply_roll_correction(&f, 0.0), f);
        let q = apply_roll_correction(&f, std::f64::consts::FRAC_PI_2);
        assert!(q.x.get().max_abs_diff(Vec3::Y) < 1e-15);
        assert!(q.y.get().max_abs_diff(-Vec3::X) < 1e-15);
        assert_eq!(q.z, f.z);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let f = random_frame(&mut rng);
            let th: f64 = rng.gen_range(-4.0..4.0);
            let c = apply_roll_correction(&f, th);
            FrameTriad::new(c.x.get(), c.y.get(), c.z.get()).unwrap();
            let back = apply_roll_correction(&c, -th);
            assert!(back.max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let same = CorrectionInput::new(FrameTriad::IDENTITY, FrameTriad::IDENTITY);
        assert!(brute_force_correction(&same, 4096).unwrap().abs() <= TAU / 4096.0);
        let anti = CorrectionInput::new(
            FrameTriad::IDENTITY,
            FrameTriad::new(-Vec3::X, -Vec3::Y, Vec3::Z).unwrap(),
        );
        let th = brute_force_correction(&anti, 4096).unwrap();
        assert!(wrap_angle_diff(th, PI).abs() <= TAU / 4096.0);
        assert!(brute_force_correction(&same, 8).is_err());
    }

    #[test]
    fn optimality_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let input = CorrectionInput::new(random_frame(&mut rng), random_frame(&mut rng));
            let theta = correction_angle(&input).unwrap();
            assert!(theta > -PI && theta <= PI);
            let best = alignment_objective(&input, theta);
            for k in 0..256 {
                let g = -PI + k as f64 * TAU / 256.0;
                assert!(best >= alignment_objective(&input, g) - 1e-9);
            }
            let corrected = apply_roll_correction(&input.actual_frame, theta);
            let again =
                correction_angle(&CorrectionInput::new(input.teleop_frame, corrected)).unwrap();
            assert!(again.abs() < 1e-9);
        }
    }

    #[test]
    fn shared_z_reaches_full_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t = random_frame(&mut rng);
            let a = rolled(&t, rng.gen_range(-PI..PI));
            let theta = correction_angle(&CorrectionInput::new(t, a)).unwrap();
            assert!(apply_roll_correction(&a, theta).max_abs_diff(&t) < 1e-9);
        }
    }

    #[test]
    fn wrap_diff() {
        assert!((wrap_angle_diff(PI, -PI + 0.001) + 0.001).abs() < 1e-12);
        assert!((wrap_angle_diff(0.1, -0.1) - 0.2).abs() < 1e-15);
    }
}
