use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::log_io::{log_file_name, write_trial_log};
use super::schedule::ScheduleEntry;
use super::wire::{ClientMessage, ServerMessage, TrialCondition, TrialStatus};
use crate::error::Result;
use crate::geometry::RpyAngles;
use crate::sim::{Axes, SimConfig, Trial, TrialLog};

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub base: SimConfig,
    /// Trials started without an explicit condition follow this list.
    pub schedule: Vec<ScheduleEntry>,
    pub log_dir: Option<PathBuf>,
    /// Tick once per accepted input instead of on clock events.
    pub lockstep: bool,
}

impl EngineConfig {
    pub fn new(base: SimConfig) -> Self {
        EngineConfig {
            base,
            schedule: Vec::new(),
            log_dir: None,
            lockstep: false,
        }
    }
}

/// Inputs to the engine, in arrival order. A recorded sequence of these
/// replays to identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Message { message: ClientMessage },
    Tick,
    Disconnect,
}

/// Single-session state machine behind the server. Owns the running trial.
#[derive(Debug)]
pub struct SessionEngine {
    config: EngineConfig,
    trial: Option<Trial>,
    held: Axes,
    last_seq: Option<u64>,
    next_entry: usize,
    completed: Vec<TrialLog>,
}

impl SessionEngine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.base.validate()?;
        config.base.log_interval()?;
        if let Some(dir) = &config.log_dir {
            std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        }
        Ok(SessionEngine {
            config,
            trial: None,
            held: Axes::ZERO,
            last_seq: None,
            next_entry: 0,
            completed: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn running(&self) -> bool {
        self.trial.is_some()
    }

    pub fn completed(&self) -> &[TrialLog] {
        &self.completed
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<Vec<ServerMessage>> {
        match event {
            SessionEvent::Message { message } => self.handle(message),
            SessionEvent::Tick => self.tick(),
            SessionEvent::Disconnect => self.disconnect(),
        }
    }

    pub fn handle(&mut self, msg: &ClientMessage) -> Result<Vec<ServerMessage>> {
        match msg {
            ClientMessage::Input { seq, axes } => {
                if self.last_seq.is_some_and(|last| *seq <= last) {
                    return Ok(vec![]);
                }
                if !axes.is_finite() {
                    return Ok(vec![ServerMessage::error(
                        "bad_input",
                        "axes must be finite",
                    )]);
                }
                self.last_seq = Some(*seq);
                self.held = axes.clamped();
                if self.config.lockstep && self.trial.is_some() {
                    return self.tick();
                }
                Ok(vec![])
            }
            ClientMessage::ToggleCorrection {} => match self.trial.as_mut() {
                Some(trial) => {
                    let on = !trial.config().correction;
                    trial.set_correction(on)?;
                    Ok(vec![self.frame()])
                }
                None => Ok(vec![ServerMessage::error(
                    "no_trial",
                    "no trial is running",
                )]),
            },
            ClientMessage::StartTrial { condition } => self.start(condition.as_ref()),
            ClientMessage::AbortTrial {} => match self.trial.as_mut() {
                Some(trial) => {
                    trial.abort();
                    self.finish()
                }
                None => Ok(vec![ServerMessage::error(
                    "no_trial",
                    "no trial is running",
                )]),
            },
        }
    }

    /// Advances the running trial by one step with the held command.
    pub fn tick(&mut self) -> Result<Vec<ServerMessage>> {
        let Some(trial) = self.trial.as_mut() else {
            return Ok(vec![]);
        };
        let ended = trial.advance(self.held)?.is_some();
        let mut out = vec![self.frame()];
        if ended {
            out.extend(self.finish()?);
        }
        Ok(out)
    }

    /// The client went away: a running trial is aborted and persisted.
    pub fn disconnect(&mut self) -> Result<Vec<ServerMessage>> {
        self.last_seq = None;
        match self.trial.as_mut() {
            Some(trial) => {
                trial.abort();
                self.finish()
            }
            None => Ok(vec![]),
        }
    }

    fn start(&mut self, condition: Option<&TrialCondition>) -> Result<Vec<ServerMessage>> {
        if self.trial.is_some() {
            return Ok(vec![ServerMessage::error(
                "trial_running",
                "a trial is already running",
            )]);
        }
        let cond = match condition {
            Some(c) => *c,
            None if self.config.schedule.is_empty() => {
                let (roll, pitch, yaw) = self.config.base.rpy.to_degrees();
                TrialCondition {
                    roll_deg: roll,
                    pitch_deg: pitch,
                    yaw_deg: yaw,
                    correction: self.config.base.correction,
                }
            }
            None => match self.config.schedule.get(self.next_entry) {
                Some(e) => {
                    self.next_entry += 1;
                    TrialCondition {
                        roll_deg: e.roll_deg,
                        pitch_deg: e.pitch_deg,
                        yaw_deg: e.yaw_deg,
                        correction: e.correction,
                    }
                }
                None => {
                    return Ok(vec![ServerMessage::error(
                        "schedule_complete",
                        "every scheduled trial has run",
                    )])
                }
            },
        };
        let mut cfg = self.config.base.clone();
        let trial =
            RpyAngles::from_degrees(cond.roll_deg, cond.pitch_deg, cond.yaw_deg).and_then(|rpy| {
                cfg.rpy = rpy;
                cfg.correction = cond.correction;
                cfg.validate()?;
                Trial::new(cfg, None)
            });
        match trial {
            Ok(t) => {
                let ended = t.outcome().is_some();
                self.trial = Some(t);
                self.held = Axes::ZERO;
                let mut out = vec![self.frame()];
                if ended {
                    out.extend(self.finish()?);
                }
                Ok(out)
            }
            Err(e) => Ok(vec![ServerMessage::error("bad_condition", e.to_string())]),
        }
    }

    fn frame(&self) -> ServerMessage {
        let trial = self.trial.as_ref().expect("frame needs a trial");
        let s = trial.state();
        ServerMessage::StateFrame {
            tick: s.tick,
            elapsed: s.elapsed,
            theta_deg: s.theta.to_degrees(),
            correction: trial.config().correction,
            status: TrialStatus::from(trial.outcome()),
            view: trial.view().clone(),
        }
    }

    fn finish(&mut self) -> Result<Vec<ServerMessage>> {
        let Some(trial) = self.trial.take() else {
            return Ok(vec![]);
        };
        let log = trial.to_log();
        let log_file = match &self.config.log_dir {
            Some(dir) => {
                let name = format!(
                    "trial{:04}_{}",
                    self.completed.len(),
                    log_file_name(&log.header, 0).replace("_rep0", "")
                );
                let path = dir.join(name);
                write_trial_log(&path, &log)?;
                Some(path.display().to_string())
            }
            None => None,
        };
        let msg = ServerMessage::TrialEnd {
            outcome: log.footer.outcome,
            completion_time: log.footer.completion_time_s,
            ticks: log.footer.ticks,
            log_file,
        };
        self.completed.push(log);
        self.held = Axes::ZERO;
        Ok(vec![msg])
    }
}

/// Runs a recorded event sequence through a fresh engine.
pub fn replay_transcript(
    config: EngineConfig,
    events: &[SessionEvent],
) -> Result<(Vec<ServerMessage>, Vec<TrialLog>)> {
    let mut engine = SessionEngine::new(config)?;
    let mut out = Vec::new();
    for e in events {
        out.extend(engine.apply(e)?);
    }
    Ok((out, engine.completed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Outcome;

    fn input(seq: u64, x: f64, y: f64, z: f64) -> SessionEvent {
        SessionEvent::Message {
            message: ClientMessage::Input {
                seq,
                axes: Axes::new(x, y, z),
            },
        }
    }

    fn start() -> SessionEvent {
        SessionEvent::Message {
            message: ClientMessage::StartTrial { condition: None },
        }
    }

    fn engine(lockstep: bool) -> SessionEngine {
        let mut c = EngineConfig::new(SimConfig::default());
        c.lockstep = lockstep;
        SessionEngine::new(c).unwrap()
    }

    #[test]
    fn latest_input_wins_and_stale_is_ignored() {
        let mut e = engine(false);
        e.apply(&start()).unwrap();
        e.apply(&input(1, 1.0, 0.0, 0.0)).unwrap();
        e.apply(&input(2, 0.0, 1.0, 0.0)).unwrap();
        e.apply(&input(2, 0.0, 0.0, 1.0)).unwrap();
        e.apply(&input(1, -1.0, 0.0, 0.0)).unwrap();
        e.apply(&SessionEvent::Tick).unwrap();
        assert_eq!(
            e.trial.as_ref().unwrap().script(),
            &[Axes::new(0.0, 1.0, 0.0)]
        );
        // held across ticks
        e.apply(&SessionEvent::Tick).unwrap();
        assert_eq!(
            e.trial.as_ref().unwrap().script()[1],
            Axes::new(0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn lockstep_ticks_per_input() {
        let mut e = engine(true);
        e.apply(&start()).unwrap();
        let out = e.apply(&input(1, 0.5, 0.0, 0.0)).unwrap();
        assert!(matches!(out[0], ServerMessage::StateFrame { tick: 1, .. }));
        assert!(e.apply(&input(1, 0.5, 0.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn protocol_errors_are_frames() {
        let mut e = engine(false);
        let out = e
            .apply(&SessionEvent::Message {
                message: ClientMessage::AbortTrial {},
            })
            .unwrap();
        assert!(matches!(&out[0], ServerMessage::Error { code, .. } if code == "no_trial"));
        e.apply(&start()).unwrap();
        let out = e.apply(&start()).unwrap();
        assert!(matches!(&out[0], ServerMessage::Error { code, .. } if code == "trial_running"));
        let bad = ClientMessage::StartTrial {
            condition: Some(TrialCondition {
                roll_deg: 0.0,
                pitch_deg: 30.0,
                yaw_deg: 0.0,
                correction: false,
            }),
        };
        e.apply(&SessionEvent::Message {
            message: ClientMessage::AbortTrial {},
        })
        .unwrap();
        let out = e.handle(&bad).unwrap();
        assert!(matches!(&out[0], ServerMessage::Error { code, .. } if code == "bad_condition"));
    }

    #[test]
    fn disconnect_aborts_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = EngineConfig::new(SimConfig::default());
        c.log_dir = Some(dir.path().to_path_buf());
        let mut e = SessionEngine::new(c).unwrap();
        e.apply(&start()).unwrap();
        e.apply(&input(1, 0.2, 0.0, 0.0)).unwrap();
        for _ in 0..5 {
            e.apply(&SessionEvent::Tick).unwrap();
        }
        let out = e.apply(&SessionEvent::Disconnect).unwrap();
        let ServerMessage::TrialEnd {
            outcome,
            log_file: Some(path),
            ticks,
            ..
        } = &out[0]
        else {
            panic!("{out:?}")
        };
        assert_eq!((*outcome, *ticks), (Outcome::Aborted, 5));
        let log = crate::session::read_trial_log(path).unwrap();
        assert_eq!(log.footer.outcome, Outcome::Aborted);
        assert!(!e.running());
    }

    #[test]
    fn toggle_changes_theta() {
        let mut c = EngineConfig::new(SimConfig::paper(90.0, 0.0, 0.0, false).unwrap());
        c.lockstep = true;
        let mut e = SessionEngine::new(c).unwrap();
        e.apply(&start()).unwrap();
        let out = e.handle(&ClientMessage::ToggleCorrection {}).unwrap();
        let ServerMessage::StateFrame {
            theta_deg,
            correction,
            ..
        } = out[0]
        else {
            panic!()
        };
        assert!(correction);
        assert!((theta_deg + 90.0).abs() < 1e-9);
    }

    #[test]
    fn schedule_is_followed_then_exhausted() {
        let grid = crate::session::ConditionGrid {
            repetitions: 1,
            ..Default::default()
        };
        let sched = crate::session::build_schedule(&grid, 1, 3).unwrap();
        let mut c = EngineConfig::new(SimConfig::default());
        c.schedule = sched.entries[..2].to_vec();
        let mut e = SessionEngine::new(c).unwrap();
        for entry in &sched.entries[..2] {
            e.apply(&start()).unwrap();
            assert_eq!(
                e.trial.as_ref().unwrap().config().correction,
                entry.correction
            );
            e.apply(&SessionEvent::Message {
                message: ClientMessage::AbortTrial {},
            })
            .unwrap();
        }
        let out = e.apply(&start()).unwrap();
        assert!(
            matches!(&out[0], ServerMessage::Error { code, .. } if code == "schedule_complete")
        );
        assert_eq!(e.completed().len(), 2);
    }

    fn drive(toggle_at: Option<u64>) -> (Vec<ServerMessage>, TrialLog) {
        let mut c = EngineConfig::new(SimConfig::paper(135.0, 0.0, 45.0, false).unwrap());
        c.lockstep = true;
        let mut events = vec![start()];
        for k in 0..120u64 {
            if Some(k) == toggle_at {
                events.push(SessionEvent::Message {
                    message: ClientMessage::ToggleCorrection {},
                });
            }
            events.push(input(k + 1, 0.4, -0.2, 0.3));
        }
        events.push(SessionEvent::Disconnect);
        let (out, mut logs) = replay_transcript(c, &events).unwrap();
        (out, logs.remove(0))
    }

    #[test]
    fn toggle_reorients_view_but_not_motion() {
        let (plain_out, plain) = drive(None);
        let (toggled_out, toggled) = drive(Some(60));
        assert_eq!(plain.positions(), toggled.positions());
        let frame = |out: &[ServerMessage], tick: u64| {
            out.iter()
                .find_map(|m| match m {
                    ServerMessage::StateFrame {
                        tick: t,
                        view,
                        correction,
                        ..
                    } if *t == tick => Some((view.clone(), *correction)),
                    _ => None,
                })
                .unwrap()
        };
        assert_eq!(frame(&plain_out, 30), frame(&toggled_out, 30));
        let (a, ca) = frame(&plain_out, 90);
        let (b, cb) = frame(&toggled_out, 90);
        assert!(!ca && cb);
        assert_ne!(a.sphere_center, b.sphere_center);
        assert_eq!(a.sphere_radius_px, b.sphere_radius_px);
    }

    #[test]
    fn zero_input_times_out() {
        let mut e = engine(false);
        e.apply(&start()).unwrap();
        let mut end = None;
        for _ in 0..10_000 {
            let out = e.apply(&SessionEvent::Tick).unwrap();
            if let Some(ServerMessage::TrialEnd { outcome, ticks, .. }) = out.last() {
                end = Some((*outcome, *ticks));
                break;
            }
        }
        assert_eq!(end, Some((Outcome::Timeout, 7200)));
    }
}
