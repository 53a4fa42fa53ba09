use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    completion_time, paired_t_test, pairwise_hausdorff, summarize, trajectory_length, Summary,
    Trajectory,
};
use crate::error::Result;
use crate::sim::{ConditionKey, Outcome, TrialLog};

/// One line of a metrics report. Fields not meaningful for a row kind are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// `summary`, `hausdorff` or `paired`.
    pub kind: String,
    pub condition: String,
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportRow {
    fn new(kind: &str, condition: String, metric: &str) -> Self {
        ReportRow {
            kind: kind.into(),
            condition,
            metric: metric.into(),
            n: None,
            value: None,
            mean: None,
            sd: None,
            median: None,
            ci95_low: None,
            ci95_high: None,
            t: None,
            df: None,
            p: None,
            note: None,
        }
    }

    fn summary(condition: String, metric: &str, values: &[f64]) -> Result<Self> {
        let mut row = Self::new("summary", condition, metric);
        row.n = Some(values.len());
        if values.is_empty() {
            row.note = Some("no values".into());
            return Ok(row);
        }
        let Summary {
            mean,
            sd,
            median,
            ci95_low,
            ci95_high,
            ..
        } = summarize(values)?;
        row.mean = Some(mean);
        row.sd = Some(sd);
        row.median = Some(median);
        row.ci95_low = Some(ci95_low);
        row.ci95_high = Some(ci95_high);
        Ok(row)
    }

    pub const COLUMNS: [&'static str; 14] = [
        "kind",
        "condition",
        "metric",
        "n",
        "value",
        "mean",
        "sd",
        "median",
        "ci95_low",
        "ci95_high",
        "t",
        "df",
        "p",
        "note",
    ];

    /// Cells in `COLUMNS` order; absent values are empty strings.
    pub fn cells(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.kind.clone(),
            self.condition.clone(),
            self.metric.clone(),
            u(self.n),
            f(self.value),
            f(self.mean),
            f(self.sd),
            f(self.median),
            f(self.ci95_low),
            f(self.ci95_high),
            f(self.t),
            u(self.df),
            f(self.p),
            self.note.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Default)]
struct CellMetrics {
    completion: Vec<f64>,
    length: Vec<f64>,
    success: Vec<f64>,
    trajectories: Vec<Trajectory>,
    hausdorff: Vec<f64>,
}

const PAIRED_METRICS: [&str; 3] = ["completion_time_s", "trajectory_length_mm", "hausdorff_mm"];

impl CellMetrics {
    fn values(&self, metric: &str) -> &[f64] {
        match metric {
            "completion_time_s" => &self.completion,
            "trajectory_length_mm" => &self.length,
            _ => &self.hausdorff,
        }
    }
}

/// Per-condition summaries, within-condition pairwise Hausdorff distances,
/// and paired t-tests of corrected vs uncorrected cell means and medians.
pub fn build_report(logs: &[TrialLog]) -> Result<Vec<ReportRow>> {
    let mut cells: BTreeMap<ConditionKey, CellMetrics> = BTreeMap::new();
    for log in logs {
        let cell = cells.entry(log.header.condition_key()).or_default();
        let success = log.footer.outcome == Outcome::Success;
        cell.success.push(if success { 1.0 } else { 0.0 });
        if let Ok(t) = completion_time(log) {
            cell.completion.push(t);
        }
        let traj = Trajectory::from_log(log)?;
        if let Ok(l) = trajectory_length(&traj) {
            cell.length.push(l);
        }
        if !traj.is_empty() {
            cell.trajectories.push(traj);
        }
    }

    let mut rows = Vec::new();
    for (key, cell) in cells.iter_mut() {
        let label = key.label();
        if cell.trajectories.len() >= 2 {
            cell.hausdorff = pairwise_hausdorff(&cell.trajectories)?;
            let n = cell.trajectories.len();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let mut row = ReportRow::new("hausdorff", label.clone(), "hausdorff_mm");
                    row.value = Some(cell.hausdorff[k]);
                    row.note = Some(format!("trials {i},{j}"));
                    rows.push(row);
                    k += 1;
                }
            }
        }
        rows.push(ReportRow::summary(label.clone(), "success", &cell.success)?);
        rows.push(ReportRow::summary(
            label.clone(),
            "completion_time_s",
            &cell.completion,
        )?);
        rows.push(ReportRow::summary(
            label.clone(),
            "trajectory_length_mm",
            &cell.length,
        )?);
        rows.push(ReportRow::summary(label, "hausdorff_mm", &cell.hausdorff)?);
    }

    for metric in PAIRED_METRICS {
        for stat in ["mean", "median"] {
            let mut wc = Vec::new();
            let mut woc = Vec::new();
            for (key, cell) in &cells {
                if !key.correction {
                    continue;
                }
                let twin = ConditionKey {
                    correction: false,
                    ..*key
                };
                let Some(other) = cells.get(&twin) else {
                    continue;
                };
                let (a, b) = (cell.values(metric), other.values(metric));
                if a.is_empty() || b.is_empty() {
                    continue;
                }
                let (sa, sb) = (summarize(a)?, summarize(b)?);
                if stat == "mean" {
                    wc.push(sa.mean);
                    woc.push(sb.mean);
                } else {
                    wc.push(sa.median);
                    woc.push(sb.median);
                }
            }
            let mut row = ReportRow::new("paired", "wc-vs-woc".into(), &format!("{metric}/{stat}"));
            row.n = Some(wc.len());
            match paired_t_test(&wc, &woc) {
                Ok(s) => {
                    row.mean = Some(s.mean_a - s.mean_b);
                    row.t = Some(s.t_statistic);
                    row.df = Some(s.df);
                    row.p = Some(s.p_two_tailed);
                }
                Err(e) => row.note = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
