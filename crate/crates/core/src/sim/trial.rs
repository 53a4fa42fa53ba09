use serde::{Deserialize, Serialize};

use super::{
    Axes, CameraIntrinsics, SceneSpec, SimConfig, SimMode, SimState, Simulator, ViewFrame,
};
use crate::error::{Error, Result};
use crate::geometry::{RpyAngles, Vec3};
use crate::operators::{Operator, OperatorPolicy};

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Rounds to 9 significant digits, the precision trial logs are stored at.
pub(crate) fn q9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn q9v(v: Vec3) -> [f64; 3] {
    v.to_array().map(q9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Timeout,
    Aborted,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::Aborted => "aborted",
        }
    }
}

/// Trial configuration as persisted: degrees, mm and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: u32,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub correction: bool,
    pub mode: SimMode,
    pub translation_speed: f64,
    pub dt: f64,
    pub max_duration: f64,
    pub intrinsics: CameraIntrinsics,
    pub scene: SceneSpec,
    pub seed: u64,
}

impl LogHeader {
    pub fn from_config(c: &SimConfig) -> Self {
        let (roll, pitch, yaw) = c.rpy.to_degrees();
        let k = c.intrinsics;
        let s = c.scene;
        let qv = |v: Vec3| Vec3::from_array(q9v(v));
        LogHeader {
            schema: LOG_SCHEMA_VERSION,
            roll_deg: q9(roll),
            pitch_deg: q9(pitch),
            yaw_deg: q9(yaw),
            correction: c.correction,
            mode: c.mode,
            translation_speed: q9(c.translation_speed),
            dt: q9(c.dt),
            max_duration: q9(c.max_duration),
            intrinsics: CameraIntrinsics {
                focal_length: q9(k.focal_length),
                image_width: q9(k.image_width),
                image_height: q9(k.image_height),
                annulus_inner: q9(k.annulus_inner),
                annulus_outer: q9(k.annulus_outer),
                near_clip: q9(k.near_clip),
            },
            scene: SceneSpec {
                sphere_radius: q9(s.sphere_radius),
                cube_edge: q9(s.cube_edge),
                cube_offsets: s.cube_offsets.map(qv),
                v_o: qv(s.v_o),
                p_q: qv(s.p_q),
            },
            seed: c.seed,
        }
    }

    /// Rebuilds a config at log precision.
    pub fn to_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            rpy: RpyAngles::from_degrees(self.roll_deg, self.pitch_deg, self.yaw_deg)?,
            correction: self.correction,
            mode: self.mode,
            translation_speed: self.translation_speed,
            dt: self.dt,
            max_duration: self.max_duration,
            intrinsics: self.intrinsics,
            scene: self.scene,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `(roll, pitch, yaw, correction)` with angles rounded to 1e-6 degree,
    /// suitable for grouping trials.
    pub fn condition_key(&self) -> ConditionKey {
        let r = |a: f64| (a * 1e6).round() as i64;
        ConditionKey {
            roll_udeg: r(self.roll_deg),
            pitch_udeg: r(self.pitch_deg),
            yaw_udeg: r(self.yaw_deg),
            correction: self.correction,
        }
    }
}

/// Hashable trial condition with angles in micro-degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionKey {
    pub roll_udeg: i64,
    pub pitch_udeg: i64,
    pub yaw_udeg: i64,
    pub correction: bool,
}

impl ConditionKey {
    pub fn label(&self) -> String {
        let d = |u: i64| u as f64 / 1e6;
        format!(
            "roll={}/pitch={}/yaw={}/{}",
            d(self.roll_udeg),
            d(self.pitch_udeg),
            d(self.yaw_udeg),
            if self.correction { "wc" } else { "woc" }
        )
    }
}

/// One 20 Hz sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub tick: u64,
    pub t: f64,
    /// Command applied on the step that produced this tick.
    pub axes: [f64; 3],
    pub rel_pos: [f64; 3],
    pub theta_deg: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    pub outcome: Outcome,
    pub completion_time_s: Option<f64>,
    pub n_samples: usize,
    pub ticks: u64,
    /// Start of the first step with a nonzero command.
    pub moved_s: Option<f64>,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: LogHeader,
    pub samples: Vec<LogSample>,
    pub footer: LogFooter,
}

impl TrialLog {
    /// Sampled positions as `(t, p)` pairs.
    pub fn positions(&self) -> Vec<(f64, Vec3)> {
        self.samples
            .iter()
            .map(|s| (s.t, Vec3::from_array(s.rel_pos)))
            .collect()
    }
}

/// A single trial driven one command at a time, recording as it goes.
#[derive(Debug, Clone)]
pub struct Trial {
    sim: Simulator,
    state: SimState,
    view: ViewFrame,
    budget: u64,
    log_interval: u64,
    samples: Vec<LogSample>,
    script: Vec<Axes>,
    moved_tick: Option<u64>,
    outcome: Option<Outcome>,
}

impl Trial {
    /// `max_steps` caps the trial in addition to `config.max_duration`.
    pub fn new(config: SimConfig, max_steps: Option<u64>) -> Result<Self> {
        let log_interval = config.log_interval()?;
        let budget = max_steps.map_or(config.max_ticks(), |m| m.min(config.max_ticks()));
        let sim = Simulator::new(config)?;
        let mut state = sim.initial_state();
        let view = sim.project(&state);
        state.done = super::check_success(&view, sim.config());
        let mut trial = Trial {
            sim,
            state,
            view,
            budget,
            log_interval,
            samples: Vec::new(),
            script: Vec::new(),
            moved_tick: None,
            outcome: None,
        };
        trial.record(Axes::ZERO);
        trial.settle();
        Ok(trial)
    }

    pub fn config(&self) -> &SimConfig {
        self.sim.config()
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn view(&self) -> &ViewFrame {
        &self.view
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn script(&self) -> &[Axes] {
        &self.script
    }

    pub fn set_correction(&mut self, on: bool) -> Result<()> {
        self.sim.set_correction(on)?;
        self.state.theta = self.sim.theta();
        self.view = self.sim.project(&self.state);
        Ok(())
    }

    /// Applies one command. Returns the outcome once the trial has ended.
    pub fn advance(&mut self, axes: Axes) -> Result<Option<Outcome>> {
        if self.outcome.is_some() {
            return Err(Error::InvalidState("trial already ended".into()));
        }
        let applied = axes.clamped();
        let next = self.sim.step(&self.state, applied)?;
        if self.moved_tick.is_none() && !applied.is_zero() {
            self.moved_tick = Some(self.state.tick);
        }
        self.state = next;
        self.view = self.sim.project(&self.state);
        self.script.push(applied);
        if self.state.tick.is_multiple_of(self.log_interval) {
            self.record(applied);
        }
        self.settle();
        Ok(self.outcome)
    }

    pub fn abort(&mut self) {
        if self.outcome.is_none() {
            self.outcome = Some(Outcome::Aborted);
        }
    }

    fn settle(&mut self) {
        if self.outcome.is_some() {
            return;
        }
        if self.state.done {
            self.outcome = Some(Outcome::Success);
        } else if self.state.tick >= self.budget {
            self.outcome = Some(Outcome::Timeout);
        }
    }

    fn record(&mut self, axes: Axes) {
        self.samples.push(LogSample {
            tick: self.state.tick,
            t: q9(self.state.elapsed),
            axes: axes.0.map(q9),
            rel_pos: q9v(self.state.rel_pos),
            theta_deg: q9(self.state.theta.to_degrees()),
            success: self.state.done,
        });
    }

    /// Snapshot of the log so far; an unfinished trial is reported as aborted.
    pub fn to_log(&self) -> TrialLog {
        let outcome = self.outcome.unwrap_or(Outcome::Aborted);
        let dt = self.sim.config().dt;
        let moved_s = self.moved_tick.map(|t| q9(t as f64 * dt));
        let end_s = q9(self.state.elapsed);
        let completion_time_s = match (outcome, self.moved_tick) {
            (Outcome::Success, Some(m)) => Some(q9((self.state.tick - m) as f64 * dt)),
            _ => None,
        };
        TrialLog {
            header: LogHeader::from_config(self.sim.config()),
            samples: self.samples.clone(),
            footer: LogFooter {
                outcome,
                completion_time_s,
                n_samples: self.samples.len(),
                ticks: self.state.tick,
                moved_s,
                end_s,
            },
        }
    }
}

/// Result of a headless run: the persisted log plus the exact command script.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedRun {
    pub log: TrialLog,
    /// Every applied command at full precision, one per tick.
    pub script: Vec<Axes>,
}

impl ScriptedRun {
    pub fn outcome(&self) -> Outcome {
        self.log.footer.outcome
    }

    pub fn steps(&self) -> u64 {
        self.log.footer.ticks
    }
}

/// Closes the loop project → operator → step until success or the step budget.
pub fn run_scripted(
    config: &SimConfig,
    policy: &OperatorPolicy,
    max_steps: u64,
) -> Result<ScriptedRun> {
    let mut trial = Trial::new(config.clone(), Some(max_steps))?;
    let mut operator = Operator::new(policy.clone())?;
    while trial.outcome().is_none() {
        let axes = operator.command(trial.state().tick, trial.view(), trial.config());
        trial.advance(axes)?;
    }
    Ok(ScriptedRun {
        log: trial.to_log(),
        script: trial.script().to_vec(),
    })
}
