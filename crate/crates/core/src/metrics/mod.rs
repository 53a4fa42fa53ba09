//! Trajectory-quality metrics and small-sample statistics over trial logs.

mod report;
mod stats;

pub use report::{build_report, ReportRow};
pub use stats::{paired_t_test, summarize, t_critical_95, t_two_tailed_p, PairedStats, Summary};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::sim::{LogSample, Outcome, TrialLog, LOG_RATE_HZ};

/// Positions sampled at the log rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, Vec3)>,
}

impl Trajectory {
    /// Timestamps must increase by exactly one log period (within 1e-9 s).
    pub fn new(samples: Vec<(f64, Vec3)>) -> Result<Self> {
        let period = 1.0 / LOG_RATE_HZ;
        for w in samples.windows(2) {
            let gap = w[1].0 - w[0].0;
            if gap.is_nan() || gap <= 0.0 || (gap - period).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "trajectory samples at {} and {} are not {period} s apart",
                    w[0].0, w[1].0
                )));
            }
        }
        if samples
            .iter()
            .any(|(t, p)| !t.is_finite() || !p.is_finite())
        {
            return Err(Error::invalid("trajectory has non-finite samples"));
        }
        Ok(Trajectory { samples })
    }

    /// Points stamped at successive log periods from t = 0.
    pub fn from_points(points: impl IntoIterator<Item = Vec3>) -> Result<Self> {
        let period = 1.0 / LOG_RATE_HZ;
        Self::new(
            points
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as f64 * period, p))
                .collect(),
        )
    }

    pub fn from_log(log: &TrialLog) -> Result<Self> {
        Self::new(
            log.samples
                .iter()
                .map(|s: &LogSample| (s.t, Vec3::from_array(s.rel_pos)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|(_, p)| *p)
    }
}

/// Seconds from the first nonzero command to success.
pub fn completion_time(log: &TrialLog) -> Result<f64> {
    if log.footer.outcome != Outcome::Success {
        return Err(Error::NoCompletion(format!(
            "trial ended with {}",
            log.footer.outcome.as_str()
        )));
    }
    let moved = log
        .footer
        .moved_s
        .ok_or_else(|| Error::NoCompletion("camera never moved".into()))?;
    Ok(log.footer.end_s - moved)
}

/// Sum of distances between consecutive samples.
pub fn trajectory_length(traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::invalid(
            "trajectory length needs at least two samples",
        ));
    }
    Ok(traj
        .samples
        .windows(2)
        .map(|w| w[0].1.distance(w[1].1))
        .sum())
}

/// Largest distance from a point of `from` to its nearest point of `to`.
fn directed_hausdorff(from: &[Vec3], to: &[Vec3]) -> f64 {
    let mut worst = 0.0f64;
    for &a in from {
        let mut nearest = f64::INFINITY;
        for &b in to {
            let d = a.distance(b);
            if d < nearest {
                nearest = d;
                // this point cannot raise the maximum any more
                if nearest <= worst {
                    break;
                }
            }
        }
        worst = worst.max(nearest);
    }
    worst
}

/// Discrete Hausdorff distance between the sampled point sets.
pub fn hausdorff_distance(x: &Trajectory, y: &Trajectory) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("Hausdorff distance of an empty trajectory"));
    }
    let a: Vec<Vec3> = x.points().collect();
    let b: Vec<Vec3> = y.points().collect();
    Ok(directed_hausdorff(&a, &b).max(directed_hausdorff(&b, &a)))
}

/// Distances for every unordered pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pairwise_hausdorff(trials: &[Trajectory]) -> Result<Vec<f64>> {
    if trials.len() < 2 {
        return Err(Error::invalid(
            "pairwise Hausdorff needs at least two trajectories",
        ));
    }
    let mut out = Vec::with_capacity(trials.len() * (trials.len() - 1) / 2);
    for i in 0..trials.len() {
        for j in i + 1..trials.len() {
            out.push(hausdorff_distance(&trials[i], &trials[j])?);
        }
    }
    Ok(out)
}
