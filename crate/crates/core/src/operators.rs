//! Scripted stand-ins for the human operator.
//!
//! Every policy looks only at the rendered [`ViewFrame`] and emits joystick
//! deflections. The naive policy trusts the display; the adaptive one learns
//! the in-image rotation between what it commanded and what it saw, then
//! pre-rotates its commands to cancel it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Axes, CameraIntrinsics, SimConfig, ViewFrame};

pub const DEFAULT_GAIN_XY: f64 = 0.8;
pub const DEFAULT_GAIN_Z: f64 = 1.0;
pub const DEFAULT_WINDOW: usize = 10;

/// Commanded motions smaller than this (in predicted px) are not used to
/// update the rotation estimate.
pub const MIN_PAIR_PX: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorPolicy {
    NaiveProportional {
        gain_xy: f64,
        gain_z: f64,
    },
    AdaptiveRotation {
        gain_xy: f64,
        gain_z: f64,
        window: usize,
    },
    Replay {
        script: Vec<Axes>,
    },
}

impl OperatorPolicy {
    pub fn naive() -> Self {
        OperatorPolicy::NaiveProportional {
            gain_xy: DEFAULT_GAIN_XY,
            gain_z: DEFAULT_GAIN_Z,
        }
    }

    pub fn adaptive() -> Self {
        OperatorPolicy::AdaptiveRotation {
            gain_xy: DEFAULT_GAIN_XY,
            gain_z: DEFAULT_GAIN_Z,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gains_ok = |a: f64, b: f64| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite();
        match self {
            OperatorPolicy::NaiveProportional { gain_xy, gain_z }
                if !gains_ok(*gain_xy, *gain_z) =>
            {
                Err(Error::invalid("operator gains must be positive"))
            }
            OperatorPolicy::AdaptiveRotation {
                gain_xy,
                gain_z,
                window,
            } => {
                if !gains_ok(*gain_xy, *gain_z) {
                    Err(Error::invalid("operator gains must be positive"))
                } else if *window < 2 {
                    Err(Error::invalid("adaptive window must be at least 2"))
                } else {
                    Ok(())
                }
            }
            OperatorPolicy::Replay { script } if script.is_empty() => {
                Err(Error::invalid("replay script is empty"))
            }
            OperatorPolicy::Replay { script } if script.iter().any(|a| !a.is_finite()) => {
                Err(Error::invalid("replay script has non-finite axes"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OperatorPolicy::NaiveProportional { .. } => "naive-p",
            OperatorPolicy::AdaptiveRotation { .. } => "adaptive",
            OperatorPolicy::Replay { .. } => "replay",
        }
    }
}

/// Naive command before clamping: lateral in teleoperation x/y, then z.
///
/// Lateral error is the centre offset in px divided by the sphere's apparent
/// radius in px, which makes the lateral gain independent of depth.
fn naive_raw(view: &ViewFrame, gain_xy: f64, gain_z: f64, k: &CameraIntrinsics) -> [f64; 3] {
    let (cx, cy) = k.center();
    let r = view.sphere_radius_px;
    let du = (view.sphere_center.0 - cx) / r;
    let dv = (view.sphere_center.1 - cy) / r;
    // too small means too far: move the camera toward -Z
    let z = -gain_z * (k.target_radius_px() / r).ln();
    [gain_xy * du, -gain_xy * dv, z]
}

/// Proportional command that would re-centre the sphere if the view were
/// aligned with the joystick. Invisible targets get a zero command.
pub fn naive_command(view: &ViewFrame, gain_xy: f64, gain_z: f64, k: &CameraIntrinsics) -> Axes {
    if !view.visible {
        return Axes::ZERO;
    }
    Axes(naive_raw(view, gain_xy, gain_z, k)).clamped()
}

/// Command at `tick` from a recorded script; zero past its end.
pub fn replay_command(tick: u64, script: &[Axes]) -> Axes {
    usize::try_from(tick)
        .ok()
        .and_then(|i| script.get(i))
        .copied()
        .unwrap_or(Axes::ZERO)
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    /// Lateral target position in sphere radii, x right / y up.
    observed: [f64; 2],
    command: [f64; 2],
    radius_px: f64,
}

/// Running estimate of the view roll from (commanded, observed) motion pairs.
#[derive(Debug, Clone)]
pub struct RotationEstimator {
    window: usize,
    pairs: VecDeque<([f64; 2], [f64; 2])>,
    estimate: f64,
    pending: Option<Pending>,
}

impl RotationEstimator {
    pub fn new(window: usize) -> Self {
        RotationEstimator {
            window,
            pairs: VecDeque::with_capacity(window),
            estimate: 0.0,
            pending: None,
        }
    }

    /// Current roll estimate, radians.
    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn pairs(&self) -> usize {
        self.pairs.len()
    }

    fn observe(&mut self, view: &ViewFrame, config: &SimConfig) -> Option<[f64; 2]> {
        if !view.visible {
            self.pending = None;
            return None;
        }
        let (cx, cy) = config.intrinsics.center();
        let r = view.sphere_radius_px;
        // px offset over px radius is depth-free: lateral mm over sphere radius
        let observed = [
            (view.sphere_center.0 - cx) / r,
            -(view.sphere_center.1 - cy) / r,
        ];
        if let Some(prev) = self.pending.take() {
            let [cx_, cy_] = prev.command;
            let px = cx_.hypot(cy_) * config.translation_speed * config.dt * prev.radius_px
                / config.scene.sphere_radius;
            if px > MIN_PAIR_PX {
                // moving the camera by +c moves the target by -c in an aligned view
                let predicted = [-cx_, -cy_];
                let seen = [
                    observed[0] - prev.observed[0],
                    observed[1] - prev.observed[1],
                ];
                if self.pairs.len() == self.window {
                    self.pairs.pop_front();
                }
                self.pairs.push_back((predicted, seen));
                self.refit();
            }
        }
        Some(observed)
    }

    fn refit(&mut self) {
        let (mut s, mut c) = (0.0, 0.0);
        for (p, o) in &self.pairs {
            s += o[0] * p[1] - o[1] * p[0];
            c += p[0] * o[0] + p[1] * o[1];
        }
        if s != 0.0 || c != 0.0 {
            self.estimate = s.atan2(c);
        }
    }

    fn commit(&mut self, observed: [f64; 2], axes: Axes, radius_px: f64) {
        self.pending = Some(Pending {
            observed,
            command: [axes.0[0], axes.0[1]],
            radius_px,
        });
    }
}

/// Naive command with its lateral part rotated by the current roll estimate.
pub fn adaptive_command(
    view: &ViewFrame,
    estimator: &mut RotationEstimator,
    gain_xy: f64,
    gain_z: f64,
    config: &SimConfig,
) -> Axes {
    let Some(observed) = estimator.observe(view, config) else {
        return Axes::ZERO;
    };
    let [x, y, z] = naive_raw(view, gain_xy, gain_z, &config.intrinsics);
    let (s, c) = estimator.estimate().sin_cos();
    let axes = Axes([c * x - s * y, s * x + c * y, z]).clamped();
    estimator.commit(observed, axes, view.sphere_radius_px);
    axes
}

/// A policy plus whatever state it carries across ticks.
#[derive(Debug, Clone)]
pub struct Operator {
    policy: OperatorPolicy,
    estimator: Option<RotationEstimator>,
}

impl Operator {
    pub fn new(policy: OperatorPolicy) -> Result<Self> {
        policy.validate()?;
        let estimator = match &policy {
            OperatorPolicy::AdaptiveRotation { window, .. } => {
                Some(RotationEstimator::new(*window))
            }
            _ => None,
        };
        Ok(Operator { policy, estimator })
    }

    pub fn policy(&self) -> &OperatorPolicy {
        &self.policy
    }

    pub fn estimator(&self) -> Option<&RotationEstimator> {
        self.estimator.as_ref()
    }

    pub fn command(&mut self, tick: u64, view: &ViewFrame, config: &SimConfig) -> Axes {
        match (&self.policy, self.estimator.as_mut()) {
            (OperatorPolicy::NaiveProportional { gain_xy, gain_z }, _) => {
                naive_command(view, *gain_xy, *gain_z, &config.intrinsics)
            }
            (
                OperatorPolicy::AdaptiveRotation {
                    gain_xy, gain_z, ..
                },
                Some(est),
            ) => adaptive_command(view, est, *gain_xy, *gain_z, config),
            (OperatorPolicy::Replay { script }, _) => replay_command(tick, script),
            (OperatorPolicy::AdaptiveRotation { .. }, None) => unreachable!("built in new"),
        }
    }
}
