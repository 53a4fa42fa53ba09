//! Fixed-step simulation of the misaligned eye-in-hand camera task.
//!
//! The state is the position of the target quadruplet (a sphere and three
//! cubes) relative to the camera, expressed in the teleoperation frame. Axis
//! commands translate the camera; the correction switch only changes the
//! orientation used to render the view, never the translation.

mod config;
mod projection;
mod trial;

use serde::{Deserialize, Serialize};

pub use config::{CameraIntrinsics, SceneSpec, SimConfig, SimMode, LOG_RATE_HZ};
pub use projection::{check_success, project, ViewFrame};
pub use trial::{
    run_scripted, ConditionKey, LogFooter, LogHeader, LogSample, Outcome, ScriptedRun, Trial,
    TrialLog, LOG_SCHEMA_VERSION,
};

use crate::correction::{correction_angle, CorrectionInput};
use crate::error::{Error, Result};
use crate::geometry::{frame_from_rotation, rpy_to_rotation, FrameTriad, RotationMatrix, Vec3};

/// Joystick deflection per teleoperation axis, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Axes(pub [f64; 3]);

impl Axes {
    pub const ZERO: Axes = Axes([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Axes([x, y, z])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn clamped(&self) -> Axes {
        Axes(self.0.map(|v| v.clamp(-1.0, 1.0)))
    }

    pub fn as_vec3(&self) -> Vec3 {
        Vec3::from_array(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Quadruplet position relative to the camera, teleoperation frame, mm.
    pub rel_pos: Vec3,
    pub tick: u64,
    /// Always `tick as f64 * dt`.
    pub elapsed: f64,
    pub moved: bool,
    pub done: bool,
    /// Correction angle currently applied to the view, radians.
    pub theta: f64,
}

/// `R v_o + p_q`: the paper-style initial offset for camera orientation `r`.
///
/// Its distance to `p_q` is `‖v_o‖` for every orientation. The simulator does
/// not start here (see [`start_relative_position`]).
pub fn initial_relative_position(r: &RotationMatrix, scene: &SceneSpec) -> Vec3 {
    r.mul_vec(scene.v_o) + scene.p_q
}

/// Where the quadruplet sits when the task is solved: `p_q` in the camera
/// frame, i.e. `R p_q` in the teleoperation frame.
pub fn goal_relative_position(r: &RotationMatrix, scene: &SceneSpec) -> Vec3 {
    r.mul_vec(scene.p_q)
}

/// Starting quadruplet position used by the simulator: the goal displaced by
/// `-R v_o`, so the target starts in front of the camera, `‖v_o‖` from the goal.
pub fn start_relative_position(r: &RotationMatrix, scene: &SceneSpec) -> Vec3 {
    goal_relative_position(r, scene) - r.mul_vec(scene.v_o)
}

/// Rotation used to render the view and the correction angle folded into it.
///
/// Without correction this is the camera orientation itself. With correction
/// the closed-form angle between the identity teleoperation frame and the
/// camera frame is added to the roll angle.
pub fn displayed_rotation(config: &SimConfig) -> Result<(RotationMatrix, f64)> {
    let actual = rpy_to_rotation(&config.rpy);
    if !config.correction {
        return Ok((actual, 0.0));
    }
    let input = CorrectionInput::new(FrameTriad::IDENTITY, frame_from_rotation(&actual));
    let theta = correction_angle(&input)?;
    let rpy = config.rpy.with_roll(config.rpy.roll() + theta)?;
    Ok((rpy_to_rotation(&rpy), theta))
}

/// One simulation bound to a config, with the displayed rotation cached.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    actual: RotationMatrix,
    view_rotation: RotationMatrix,
    theta: f64,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let (view_rotation, theta) = displayed_rotation(&config)?;
        Ok(Simulator {
            actual: rpy_to_rotation(&config.rpy),
            config,
            view_rotation,
            theta,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn view_rotation(&self) -> &RotationMatrix {
        &self.view_rotation
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Switches correction on or off and recomputes the displayed rotation.
    /// A degenerate correction keeps the previous angle.
    pub fn set_correction(&mut self, on: bool) -> Result<()> {
        self.config.correction = on;
        self.refresh()
    }

    /// Recomputes the correction from the current camera orientation.
    pub fn refresh(&mut self) -> Result<()> {
        match displayed_rotation(&self.config) {
            Ok((r, theta)) => {
                self.view_rotation = r;
                self.theta = theta;
                Ok(())
            }
            Err(Error::DegenerateAlignment) => {
                let rpy = self
                    .config
                    .rpy
                    .with_roll(self.config.rpy.roll() + self.theta)?;
                self.view_rotation = rpy_to_rotation(&rpy);
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    pub fn initial_state(&self) -> SimState {
        SimState {
            rel_pos: start_relative_position(&self.actual, &self.config.scene),
            tick: 0,
            elapsed: 0.0,
            moved: false,
            done: false,
            theta: self.theta,
        }
    }

    pub fn goal(&self) -> Vec3 {
        goal_relative_position(&self.actual, &self.config.scene)
    }

    pub fn project(&self, state: &SimState) -> ViewFrame {
        projection::project_with(state, &self.config, &self.view_rotation)
    }

    pub fn step(&self, state: &SimState, axes: Axes) -> Result<SimState> {
        if state.done {
            return Err(Error::InvalidState("cannot step a finished trial".into()));
        }
        if !axes.is_finite() {
            return Err(Error::invalid("axis command must be finite"));
        }
        let axes = axes.clamped();
        let scale = self.config.translation_speed * self.config.dt;
        let tick = state.tick + 1;
        let mut next = SimState {
            rel_pos: state.rel_pos - axes.as_vec3() * scale,
            tick,
            elapsed: tick as f64 * self.config.dt,
            moved: state.moved || !axes.is_zero(),
            done: false,
            theta: self.theta,
        };
        next.done = check_success(&self.project(&next), &self.config);
        Ok(next)
    }
}

/// Advances `state` by one tick under `config`.
pub fn step(state: &SimState, axes: Axes, config: &SimConfig) -> Result<SimState> {
    Simulator::new(config.clone())?.step(state, axes)
}
