use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use camalign_core::correction::{correction_angle, CorrectionInput};
use camalign_core::metrics::{build_report, trajectory_length, ReportRow, Trajectory};
use camalign_core::operators::{DEFAULT_GAIN_XY, DEFAULT_GAIN_Z, DEFAULT_WINDOW};
use camalign_core::session::{
    build_schedule, log_file_name, read_trial_log, write_trial_log, EngineConfig, Server,
    ServerOptions, LOG_EXTENSION,
};
use camalign_core::sim::{Outcome, SimMode};
use camalign_core::{
    frame_from_rotation, rpy_to_rotation, run_scripted, Axes, Error, FrameTriad, OperatorPolicy,
    RpyAngles, ScriptedRun, SimConfig,
};
use rayon::prelude::*;

use crate::config::FileConfig;
use crate::output::{Format, Report};
use crate::{
    BatchArgs, Cli, Command, CorrectArgs, GridKind, MetricsArgs, OperatorArgs, OperatorKind,
    RunArgs, ScheduleArgs, ServeArgs, EXIT_DATA, EXIT_ERROR, EXIT_OK, EXIT_TIMEOUT, EXIT_USAGE,
};

pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            code: EXIT_ERROR,
            error: e.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        error: e.into(),
    }
}

pub fn dispatch(cli: Cli) -> CliResult<u8> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Run(a) => run(&file, a, cli.format),
        Command::Batch(a) => batch(&file, a, cli.format),
        Command::Correct(a) => correct(a, cli.format),
        Command::Metrics(a) => metrics(a, cli.format),
        Command::Schedule(a) => schedule(&file, a, cli.format),
        Command::Serve(a) => serve(&file, a),
    }
}

fn parse_script(path: &Path) -> CliResult<Vec<Axes>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut script = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        let [x, y, z] = v[..] else {
            return Err(anyhow!("{}:{}: expected three numbers", path.display(), i + 1).into());
        };
        script.push(Axes::new(x, y, z));
    }
    Ok(script)
}

fn write_script(path: &Path, script: &[Axes]) -> CliResult<()> {
    let mut text = String::new();
    for a in script {
        text.push_str(&format!("{:?} {:?} {:?}\n", a.0[0], a.0[1], a.0[2]));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn policy(file: &FileConfig, a: &OperatorArgs) -> CliResult<OperatorPolicy> {
    let kind = match a.operator {
        Some(k) => k,
        None => match file.operator.kind.as_deref() {
            None | Some("naive-p") => OperatorKind::NaiveP,
            Some("adaptive") => OperatorKind::Adaptive,
            Some("replay") => OperatorKind::Replay,
            Some(other) => return Err(usage(anyhow!("unknown operator kind {other:?} in config"))),
        },
    };
    let gain_xy = a.gain.or(file.operator.gain_xy).unwrap_or(DEFAULT_GAIN_XY);
    let gain_z = a.gain_z.or(file.operator.gain_z).unwrap_or(DEFAULT_GAIN_Z);
    let window = a.window.or(file.operator.window).unwrap_or(DEFAULT_WINDOW);
    let p = match kind {
        OperatorKind::NaiveP => OperatorPolicy::NaiveProportional { gain_xy, gain_z },
        OperatorKind::Adaptive => OperatorPolicy::AdaptiveRotation {
            gain_xy,
            gain_z,
            window,
        },
        OperatorKind::Replay => {
            let path = a
                .script
                .as_ref()
                .ok_or_else(|| usage(anyhow!("--operator replay needs --script")))?;
            OperatorPolicy::Replay {
                script: parse_script(path)?,
            }
        }
    };
    p.validate().map_err(usage)?;
    Ok(p)
}

fn run(file: &FileConfig, a: RunArgs, format: Format) -> CliResult<u8> {
    let cfg = file
        .sim_config(
            a.mode.map(Into::into),
            a.roll,
            a.pitch,
            a.yaw,
            a.correction.on(),
            a.seed,
        )
        .map_err(usage)?;
    let policy = policy(file, &a.operator)?;
    let max_steps = a.max_steps.unwrap_or(cfg.max_ticks());
    if max_steps == 0 {
        return Err(usage(anyhow!("--max-steps must be at least 1")));
    }
    let result = run_scripted(&cfg, &policy, max_steps)?;
    if let Some(out) = &a.out {
        write_trial_log(out, &result.log)?;
    }
    if let Some(path) = &a.script_out {
        write_script(path, &result.script)?;
    }
    let mut report = Report::new(&["outcome", "steps", "completion_time_s", "path_length_mm"]);
    report.push(vec![
        result.outcome().as_str().into(),
        result.steps().into(),
        result.log.footer.completion_time_s.into(),
        path_length(&result).into(),
    ]);
    report.print(format)?;
    Ok(match result.outcome() {
        Outcome::Success => EXIT_OK,
        _ => EXIT_TIMEOUT,
    })
}

fn path_length(run: &ScriptedRun) -> Option<f64> {
    Trajectory::from_log(&run.log)
        .ok()
        .and_then(|t| trajectory_length(&t).ok())
}

fn parse_pair(s: &str) -> CliResult<(f64, f64)> {
    let (p, y) = s
        .split_once(':')
        .ok_or_else(|| usage(anyhow!("pitch:yaw pair expected, got {s:?}")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|e| usage(anyhow!("{s:?}: {e}")))
    };
    Ok((num(p)?, num(y)?))
}

struct BatchCell {
    roll: f64,
    pitch: f64,
    yaw: f64,
    correction: bool,
}

fn batch(file: &FileConfig, a: BatchArgs, format: Format) -> CliResult<u8> {
    let mut grid = file.grid();
    if a.grid == GridKind::Custom {
        if let Some(r) = &a.rolls {
            grid.roll_levels = r.clone();
        }
        if let Some(p) = &a.pitch_yaw {
            grid.pitch_yaw_pairs = p.iter().map(|s| parse_pair(s)).collect::<CliResult<_>>()?;
        }
        if let Some(c) = &a.corrections {
            grid.correction_levels = c.iter().map(|c| c.on()).collect();
        }
    } else if a.rolls.is_some() || a.pitch_yaw.is_some() || a.corrections.is_some() {
        return Err(usage(anyhow!(
            "--rolls/--pitch-yaw/--corrections need --grid custom"
        )));
    }
    if let Some(r) = a.reps {
        grid.repetitions = r;
    }
    grid.validate().map_err(usage)?;
    let policy = policy(file, &a.operator)?;
    let mode = a.mode.map(SimMode::from);

    let mut cells = Vec::new();
    for &(pitch, yaw) in &grid.pitch_yaw_pairs {
        for &roll in &grid.roll_levels {
            for &correction in &grid.correction_levels {
                cells.push(BatchCell {
                    roll,
                    pitch,
                    yaw,
                    correction,
                });
            }
        }
    }
    let configs: Vec<SimConfig> = cells
        .iter()
        .map(|c| file.sim_config(mode, c.roll, c.pitch, c.yaw, c.correction, a.seed))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let reps = grid.repetitions;
    let jobs: Vec<(usize, u32)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()?;
    let results: Vec<ScriptedRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, _)| {
                let cfg = &configs[c];
                run_scripted(cfg, &policy, a.max_steps.unwrap_or(cfg.max_ticks()))
            })
            .collect::<Result<_, _>>()
    })?;

    if let Some(dir) = &a.out_dir {
        for (&(_, rep), run) in jobs.iter().zip(&results) {
            let path = dir.join(log_file_name(&run.log.header, rep));
            write_trial_log(&path, &run.log)?;
        }
    }

    let mut report = Report::new(&[
        "roll_deg",
        "pitch_deg",
        "yaw_deg",
        "correction",
        "n",
        "success_rate",
        "mean_steps",
        "mean_completion_s",
    ]);
    for (ci, cell) in cells.iter().enumerate() {
        let runs: Vec<&ScriptedRun> = jobs
            .iter()
            .zip(&results)
            .filter(|((c, _), _)| *c == ci)
            .map(|(_, r)| r)
            .collect();
        let n = runs.len();
        let ok: Vec<&&ScriptedRun> = runs
            .iter()
            .filter(|r| r.outcome() == Outcome::Success)
            .collect();
        let mean_steps = runs.iter().map(|r| r.steps() as f64).sum::<f64>() / n as f64;
        let mean_completion = if ok.is_empty() {
            None
        } else {
            Some(
                ok.iter()
                    .filter_map(|r| r.log.footer.completion_time_s)
                    .sum::<f64>()
                    / ok.len() as f64,
            )
        };
        report.push(vec![
            cell.roll.into(),
            cell.pitch.into(),
            cell.yaw.into(),
            if cell.correction { "wc" } else { "woc" }.into(),
            n.into(),
            (ok.len() as f64 / n as f64).into(),
            mean_steps.into(),
            mean_completion.into(),
        ]);
    }
    report.print(format)?;
    Ok(EXIT_OK)
}

fn data_error(e: Error) -> CliError {
    CliError {
        code: EXIT_DATA,
        error: e.into(),
    }
}

fn correct(a: CorrectArgs, format: Format) -> CliResult<u8> {
    let input = match (a.teleop_frame, a.actual_frame, a.rpy) {
        (Some(t), Some(c), None) => {
            let frame = |v: Vec<f64>| {
                let arr: [f64; 9] = v.try_into().expect("clap enforces nine values");
                FrameTriad::from_row_major(arr).map_err(data_error)
            };
            CorrectionInput::new(frame(t)?, frame(c)?)
        }
        (None, None, Some(r)) => {
            let rpy = RpyAngles::from_degrees(r[0], r[1], r[2]).map_err(usage)?;
            CorrectionInput::new(
                FrameTriad::IDENTITY,
                frame_from_rotation(&rpy_to_rotation(&rpy)),
            )
        }
        _ => {
            return Err(usage(anyhow!(
                "give --teleop-frame and --actual-frame, or --rpy"
            )))
        }
    };
    let theta = correction_angle(&input).map_err(data_error)?.to_degrees();
    let shown = format!("{theta:.6}");
    let shown = if shown == "-0.000000" {
        "0.000000".to_string()
    } else {
        shown
    };
    let mut out = std::io::stdout().lock();
    match format {
        Format::Table => writeln!(out, "{shown}")?,
        Format::Tsv => writeln!(out, "theta_deg\n{shown}")?,
        Format::JsonLines => writeln!(out, "{}", serde_json::json!({ "theta_deg": theta + 0.0 }))?,
    }
    Ok(EXIT_OK)
}

fn log_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(&format!(".{LOG_EXTENSION}")))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn metrics(a: MetricsArgs, format: Format) -> CliResult<u8> {
    let files = log_files(&a.in_dir)?;
    if files.is_empty() {
        return Err(anyhow!("no .{LOG_EXTENSION} files in {}", a.in_dir.display()).into());
    }
    let logs = files
        .iter()
        .map(|p| read_trial_log(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = build_report(&logs)?;
    let mut report = Report::new(&ReportRow::COLUMNS);
    for r in rows {
        report.push(vec![
            r.kind.into(),
            r.condition.into(),
            r.metric.into(),
            r.n.into(),
            r.value.into(),
            r.mean.into(),
            r.sd.into(),
            r.median.into(),
            r.ci95_low.into(),
            r.ci95_high.into(),
            r.t.into(),
            r.df.into(),
            r.p.into(),
            r.note.into(),
        ]);
    }
    report.print(format)?;
    Ok(EXIT_OK)
}

fn schedule(file: &FileConfig, a: ScheduleArgs, format: Format) -> CliResult<u8> {
    let s = build_schedule(&file.grid(), a.subjects, a.seed).map_err(usage)?;
    if let Some(out) = &a.out {
        fs::write(out, s.to_tsv()).with_context(|| format!("writing {}", out.display()))?;
        return Ok(EXIT_OK);
    }
    let mut report = Report::new(&[
        "subject",
        "trial_index",
        "roll_deg",
        "pitch_deg",
        "yaw_deg",
        "correction",
        "repetition",
    ]);
    for e in &s.entries {
        report.push(vec![
            (e.subject as u64).into(),
            (e.trial_index as u64).into(),
            e.roll_deg.into(),
            e.pitch_deg.into(),
            e.yaw_deg.into(),
            if e.correction { "wc" } else { "woc" }.into(),
            (e.repetition as u64).into(),
        ]);
    }
    report.print(format)?;
    Ok(EXIT_OK)
}

fn serve(file: &FileConfig, a: ServeArgs) -> CliResult<u8> {
    let s = &file.serve;
    let base = file
        .sim_config(a.mode.map(Into::into), 0.0, 0.0, 0.0, false, a.seed)
        .map_err(usage)?;
    let mut engine = EngineConfig::new(base);
    engine.log_dir = a.log_dir.or_else(|| s.log_dir.clone());
    if let Some(subject) = a.subject {
        let seed = a.seed.or(file.sim.seed).unwrap_or(0);
        let sched = build_schedule(&file.grid(), subject + 1, seed).map_err(usage)?;
        engine.schedule = sched
            .entries
            .into_iter()
            .filter(|e| e.subject == subject)
            .collect();
    }
    let mut options = ServerOptions::default();
    if let Some(c) = a.clock.map(Into::into).or(s.clock) {
        options.clock = c;
    }
    if let Some(hz) = a.display_hz.or(s.display_hz) {
        options.display_hz = hz;
    }
    let host = a
        .host
        .or_else(|| s.host.clone())
        .unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(s.port).unwrap_or(7878);
    let server = Server::bind((host.as_str(), port), engine, options).map_err(|e| match e {
        Error::InvalidArgument(_) => usage(e),
        other => other.into(),
    })?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))?;
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "listening on {}", server.local_addr()?)?;
        out.flush()?;
    }
    let logs = server.run(stop)?;
    println!("served {} trial(s)", logs.len());
    Ok(EXIT_OK)
}
