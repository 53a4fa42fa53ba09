use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sim::{LogFooter, LogHeader, LogSample, TrialLog, LOG_SCHEMA_VERSION};

pub const LOG_EXTENSION: &str = "trial.jsonl";

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(LogHeader),
    Sample(LogSample),
    Footer(LogFooter),
}

/// JSON-lines text: one header, the samples, one footer.
pub fn trial_log_to_string(log: &TrialLog) -> String {
    let mut out = String::new();
    let mut push = |r: Record| {
        out.push_str(&serde_json::to_string(&r).expect("log records serialize"));
        out.push('\n');
    };
    push(Record::Header(log.header.clone()));
    for s in &log.samples {
        push(Record::Sample(s.clone()));
    }
    push(Record::Footer(log.footer.clone()));
    out
}

pub fn parse_trial_log(text: &str) -> Result<TrialLog> {
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut header = None;
    let mut samples = Vec::new();
    let mut footer: Option<(usize, LogFooter)> = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        if raw.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(perr(line, "content after footer".into()));
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| perr(line, e.to_string()))?;
        if value.get("record").and_then(Value::as_str) == Some("header") {
            if let Some(found) = value.get("schema").and_then(Value::as_u64) {
                if found != LOG_SCHEMA_VERSION as u64 {
                    return Err(Error::SchemaMismatch {
                        found: found.min(u32::MAX as u64) as u32,
                        expected: LOG_SCHEMA_VERSION,
                    });
                }
            }
        }
        let record: Record =
            serde_json::from_value(value).map_err(|e| perr(line, e.to_string()))?;
        match record {
            Record::Header(h) => {
                if header.is_some() {
                    return Err(perr(line, "second header".into()));
                }
                header = Some(h);
            }
            Record::Sample(s) => {
                if header.is_none() {
                    return Err(perr(line, "sample before header".into()));
                }
                samples.push(s);
            }
            Record::Footer(f) => {
                if header.is_none() {
                    return Err(perr(line, "footer before header".into()));
                }
                footer = Some((line, f));
            }
        }
    }
    let header = header.ok_or_else(|| perr(last_line.max(1), "missing header".into()))?;
    let (fline, footer) =
        footer.ok_or_else(|| perr(last_line + 1, "missing footer (truncated log?)".into()))?;
    if footer.n_samples != samples.len() {
        return Err(perr(
            fline,
            format!(
                "footer declares {} samples, found {}",
                footer.n_samples,
                samples.len()
            ),
        ));
    }
    Ok(TrialLog {
        header,
        samples,
        footer,
    })
}

pub fn write_trial_log(path: impl AsRef<Path>, log: &TrialLog) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trial_log_to_string(log)).map_err(|e| Error::io(path, e))
}

pub fn read_trial_log(path: impl AsRef<Path>) -> Result<TrialLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trial_log(&text)
}

fn angle_tag(deg: f64) -> String {
    if deg.fract() == 0.0 {
        format!("{:03}", deg as i64)
    } else {
        format!("{deg}").replace('.', "p")
    }
}

/// `r045_p000_y045_wc_rep2.trial.jsonl`
pub fn log_file_name(header: &LogHeader, repetition: u32) -> String {
    format!(
        "r{}_p{}_y{}_{}_rep{repetition}.{LOG_EXTENSION}",
        angle_tag(header.roll_deg),
        angle_tag(header.pitch_deg),
        angle_tag(header.yaw_deg),
        if header.correction { "wc" } else { "woc" },
    )
}
