//! Camera-view roll correction for eye-in-hand teleoperation, with a
//! deterministic simulator of the misaligned-camera task, scripted operators,
//! trajectory metrics and experiment orchestration.

pub mod correction;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod operators;
pub mod session;
pub mod sim;

pub use correction::{
    alignment_objective, apply_roll_correction, brute_force_correction, correction_angle,
    CorrectionInput,
};
pub use error::{Error, Result};
pub use geometry::{
    axis_angle_to_rotation, cosine_distance, frame_from_rotation, rotation_to_axis_angle,
    rpy_to_rotation, AxisAngle, FrameTriad, RotationMatrix, RpyAngles, UnitVec3, Vec3,
};
pub use operators::{Operator, OperatorPolicy};
pub use sim::{
    run_scripted, Axes, CameraIntrinsics, Outcome, SceneSpec, ScriptedRun, SimConfig, SimMode,
    SimState, Simulator, Trial, TrialLog, ViewFrame,
};
