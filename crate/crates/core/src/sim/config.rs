use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RpyAngles, Vec3};

/// Trial logs are written at this rate.
pub const LOG_RATE_HZ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length, px.
    pub focal_length: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// Radii of the two concentric success circles, px.
    pub annulus_inner: f64,
    pub annulus_outer: f64,
    /// Points at or closer than this depth (mm) are not rendered.
    pub near_clip: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            focal_length: 400.0,
            image_width: 480.0,
            image_height: 480.0,
            annulus_inner: 30.0,
            annulus_outer: 60.0,
            near_clip: 1.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * self.image_width, 0.5 * self.image_height)
    }

    /// Sphere radius in px that sits midway between the two circles.
    pub fn target_radius_px(&self) -> f64 {
        0.5 * (self.annulus_inner + self.annulus_outer)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.focal_length,
            self.image_width,
            self.image_height,
            self.annulus_inner,
            self.annulus_outer,
            self.near_clip,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("camera intrinsics must be finite"));
        }
        if self.focal_length <= 0.0 || self.near_clip <= 0.0 {
            return Err(Error::invalid(
                "focal length and near clip must be positive",
            ));
        }
        let half = 0.5 * self.image_width.min(self.image_height);
        if !(0.0 < self.annulus_inner
            && self.annulus_inner < self.annulus_outer
            && self.annulus_outer < half)
        {
            return Err(Error::invalid(
                "annulus radii must satisfy 0 < inner < outer < min(width, height)/2",
            ));
        }
        Ok(())
    }
}

/// Geometry of the quadruplet: a sphere and three cubes at fixed offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub sphere_radius: f64,
    pub cube_edge: f64,
    /// Cube centers relative to the sphere center, mm.
    pub cube_offsets: [Vec3; 3],
    /// Start offset, rotated by the camera orientation.
    pub v_o: Vec3,
    /// Quadruplet position in the camera frame when the task is solved.
    pub p_q: Vec3,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            sphere_radius: 4.0,
            cube_edge: 3.0,
            cube_offsets: [
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(0.0, 14.0, 0.0),
                Vec3::new(0.0, 0.0, 8.0),
            ],
            v_o: Vec3::new(30.0, 30.0, 140.0),
            p_q: Vec3::new(0.0, 0.0, -40.0),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sphere_radius > 0.0 && self.cube_edge > 0.0) {
            return Err(Error::invalid(
                "sphere radius and cube edge must be positive",
            ));
        }
        let all = self.cube_offsets.iter().chain([&self.v_o, &self.p_q]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scene vectors must be finite"));
        }
        let [a, b, c] = self.cube_offsets;
        if a == b || b == c || a == c {
            return Err(Error::invalid("cube offsets must be distinct"));
        }
        // mirror-symmetric arrangements would hide the view's handedness
        let (na, nb, nc) = (a.norm(), b.norm(), c.norm());
        if a.cross(b).dot(c).abs() < 1e-9 || na == nb || nb == nc || na == nc {
            return Err(Error::invalid(
                "cube offsets must be non-coplanar with distinct lengths",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Pitch and yaw restricted to {0°, 45°}.
    Paper,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rpy: RpyAngles,
    /// With correction (WC) when true, without (WOC) when false.
    pub correction: bool,
    pub mode: SimMode,
    /// mm/s at full deflection of one axis.
    pub translation_speed: f64,
    /// Seconds per tick.
    pub dt: f64,
    /// Seconds before a trial times out.
    pub max_duration: f64,
    pub intrinsics: CameraIntrinsics,
    pub scene: SceneSpec,
    pub seed: u64,
}

impl SimConfig {
    pub fn paper(roll_deg: f64, pitch_deg: f64, yaw_deg: f64, correction: bool) -> Result<Self> {
        Self::with_mode(SimMode::Paper, roll_deg, pitch_deg, yaw_deg, correction)
    }

    pub fn free(roll_deg: f64, pitch_deg: f64, yaw_deg: f64, correction: bool) -> Result<Self> {
        Self::with_mode(SimMode::Free, roll_deg, pitch_deg, yaw_deg, correction)
    }

    fn with_mode(
        mode: SimMode,
        roll_deg: f64,
        pitch_deg: f64,
        yaw_deg: f64,
        correction: bool,
    ) -> Result<Self> {
        let cfg = SimConfig {
            rpy: RpyAngles::from_degrees(roll_deg, pitch_deg, yaw_deg)?,
            correction,
            mode,
            ..SimConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.translation_speed > 0.0 && self.max_duration > 0.0) {
            return Err(Error::invalid(
                "dt, translation_speed and max_duration must be positive",
            ));
        }
        if !(self.dt.is_finite()
            && self.translation_speed.is_finite()
            && self.max_duration.is_finite())
        {
            return Err(Error::invalid("timing parameters must be finite"));
        }
        self.intrinsics.validate()?;
        self.scene.validate()?;
        if self.mode == SimMode::Paper {
            let (_, pitch, yaw) = self.rpy.to_degrees();
            let allowed = |a: f64| a.abs() < 1e-9 || (a - 45.0).abs() < 1e-9;
            if !allowed(pitch) || !allowed(yaw) {
                return Err(Error::invalid(format!(
                    "paper mode restricts pitch and yaw to 0° or 45° (got {pitch}°, {yaw}°)"
                )));
            }
        }
        Ok(())
    }

    /// Ticks between consecutive log samples.
    pub fn log_interval(&self) -> Result<u64> {
        let ratio = 1.0 / (LOG_RATE_HZ * self.dt);
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "dt = {} s does not divide the {LOG_RATE_HZ} Hz log period",
                self.dt
            )));
        }
        Ok(rounded as u64)
    }

    /// Number of ticks allowed by `max_duration`.
    pub fn max_ticks(&self) -> u64 {
        (self.max_duration / self.dt).round() as u64
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rpy: RpyAngles::new(0.0, 0.0, 0.0).expect("zero angles"),
            correction: false,
            mode: SimMode::Paper,
            translation_speed: 40.0,
            dt: 1.0 / 60.0,
            max_duration: 120.0,
            intrinsics: CameraIntrinsics::default(),
            scene: SceneSpec::default(),
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
        assert_eq!(SimConfig::default().log_interval().unwrap(), 3);
    }

    #[test]
    fn paper_mode_restricts_pitch_yaw() {
        assert!(SimConfig::paper(90.0, 45.0, 0.0, true).is_ok());
        assert!(SimConfig::paper(90.0, 30.0, 0.0, true).is_err());
        assert!(SimConfig::free(90.0, 30.0, 0.0, true).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = SimConfig::default();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.intrinsics.annulus_inner = 70.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.scene.cube_offsets[1] = c.scene.cube_offsets[0];
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.scene.cube_offsets = [Vec3::X, Vec3::Y * 2.0, Vec3::new(1.0, 1.0, 0.0)];
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.dt = 0.1;
        assert!(c.log_interval().is_err());
    }
}
