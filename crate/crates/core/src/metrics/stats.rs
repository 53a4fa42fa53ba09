use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedStats {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub t_statistic: f64,
    pub df: usize,
    pub p_two_tailed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub sd: f64,
    pub median: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom:
/// `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_tailed_p(t: f64, df: usize) -> Result<f64> {
    if df == 0 || !t.is_finite() {
        return Err(Error::invalid(
            "t-test needs df >= 1 and a finite statistic",
        ));
    }
    let nu = df as f64;
    let x = nu / (nu + t * t);
    Ok(beta_reg(0.5 * nu, 0.5, x).clamp(0.0, 1.0))
}

/// Upper 97.5% quantile of Student's t.
pub fn t_critical_95(df: usize) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::invalid(format!("t distribution: {e}")))?;
    Ok(dist.inverse_cdf(0.975))
}

/// Paired-samples t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedStats> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("paired samples must be finite"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd = sample_sd(&d);
    if sd == 0.0 {
        return Err(Error::DegenerateTest(
            "differences have zero variance".into(),
        ));
    }
    let t = mean(&d) / (sd / (n as f64).sqrt());
    let df = n - 1;
    Ok(PairedStats {
        n,
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sample_sd(a),
        sd_b: sample_sd(b),
        t_statistic: t,
        df,
        p_two_tailed: t_two_tailed_p(t, df)?,
    })
}

/// Mean, sample sd, median and t-based 95% interval of the mean.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("summary values must be finite"));
    }
    let n = values.len();
    let m = mean(values);
    let sd = sample_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let half = if n < 2 {
        0.0
    } else {
        t_critical_95(n - 1)? * sd / (n as f64).sqrt()
    };
    Ok(Summary {
        n,
        mean: m,
        sd,
        median,
        ci95_low: m - half,
        ci95_high: m + half,
    })
}
