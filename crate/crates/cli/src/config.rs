//! Optional TOML file overriding simulator, scene and operator defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use camalign_core::session::{ClockMode, ConditionGrid};
use camalign_core::sim::SimMode;
use camalign_core::{RpyAngles, SimConfig, Vec3};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub sim: SimSection,
    pub camera: CameraSection,
    pub scene: SceneSection,
    pub operator: OperatorSection,
    pub grid: GridSection,
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub mode: Option<SimMode>,
    pub translation_speed: Option<f64>,
    pub dt: Option<f64>,
    pub max_duration: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    pub focal_length: Option<f64>,
    pub image_width: Option<f64>,
    pub image_height: Option<f64>,
    pub annulus_inner: Option<f64>,
    pub annulus_outer: Option<f64>,
    pub near_clip: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub sphere_radius: Option<f64>,
    pub cube_edge: Option<f64>,
    pub cube_offsets: Option<[[f64; 3]; 3]>,
    pub v_o: Option<[f64; 3]>,
    pub p_q: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub kind: Option<String>,
    pub gain_xy: Option<f64>,
    pub gain_z: Option<f64>,
    pub window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub roll_levels: Option<Vec<f64>>,
    pub pitch_yaw_pairs: Option<Vec<[f64; 2]>>,
    pub correction_levels: Option<Vec<bool>>,
    pub repetitions: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub clock: Option<ClockMode>,
    pub display_hz: Option<f64>,
    pub log_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults with file overrides applied; angles and correction come from flags.
    pub fn sim_config(
        &self,
        mode: Option<SimMode>,
        roll: f64,
        pitch: f64,
        yaw: f64,
        correction: bool,
        seed: Option<u64>,
    ) -> camalign_core::Result<SimConfig> {
        let mut c = SimConfig {
            mode: mode.or(self.sim.mode).unwrap_or(SimMode::Paper),
            rpy: RpyAngles::from_degrees(roll, pitch, yaw)?,
            correction,
            ..SimConfig::default()
        };
        let s = &self.sim;
        set(&mut c.translation_speed, s.translation_speed);
        set(&mut c.dt, s.dt);
        set(&mut c.max_duration, s.max_duration);
        set(&mut c.seed, seed.or(s.seed));
        let k = &self.camera;
        let i = &mut c.intrinsics;
        set(&mut i.focal_length, k.focal_length);
        set(&mut i.image_width, k.image_width);
        set(&mut i.image_height, k.image_height);
        set(&mut i.annulus_inner, k.annulus_inner);
        set(&mut i.annulus_outer, k.annulus_outer);
        set(&mut i.near_clip, k.near_clip);
        let sc = &self.scene;
        set(&mut c.scene.sphere_radius, sc.sphere_radius);
        set(&mut c.scene.cube_edge, sc.cube_edge);
        set(
            &mut c.scene.cube_offsets,
            sc.cube_offsets.map(|o| o.map(Vec3::from_array)),
        );
        set(&mut c.scene.v_o, sc.v_o.map(Vec3::from_array));
        set(&mut c.scene.p_q, sc.p_q.map(Vec3::from_array));
        c.validate()?;
        c.log_interval()?;
        Ok(c)
    }

    pub fn grid(&self) -> ConditionGrid {
        let mut g = ConditionGrid::default();
        set(&mut g.roll_levels, self.grid.roll_levels.clone());
        set(
            &mut g.pitch_yaw_pairs,
            self.grid
                .pitch_yaw_pairs
                .as_ref()
                .map(|v| v.iter().map(|p| (p[0], p[1])).collect()),
        );
        set(
            &mut g.correction_levels,
            self.grid.correction_levels.clone(),
        );
        set(&mut g.repetitions, self.grid.repetitions);
        g
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
