use crate::descriptive::{mean, sample_variance};
use crate::special::student_t_two_sided;
use crate::{Result, StatsError};

/// Outcome of Welch's unequal-variance t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Welch {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's t-test for two independent samples.
///
/// When both samples have zero variance the statistic is undefined; by
/// convention equal means give `t = 0, p = 1` and different means give
/// `t = ±inf, p = 0`, with `df = n_x + n_y - 2`.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> Result<Welch> {
    let got = x.len().min(y.len());
    if got < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got });
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let diff = mean(x) - mean(y);
    let (vx, vy) = (sample_variance(x) / nx, sample_variance(y) / ny);
    let se2 = vx + vy;

    if se2 == 0.0 {
        let df = nx + ny - 2.0;
        return Ok(if diff == 0.0 {
            Welch { t: 0.0, df, p: 1.0 }
        } else {
            Welch { t: diff.signum() * f64::INFINITY, df, p: 0.0 }
        });
    }

    let t = diff / se2.sqrt();
    let df = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    Ok(Welch { t, df, p: student_t_two_sided(t, df) })
}

/// Bonferroni adjustment: `p' = min(1, m * p)` for a family of `m` tests.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if p_values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if m < p_values.len() {
        return Err(StatsError::InvalidArgument(format!(
            "family size {m} is smaller than the {} p-values given",
            p_values.len()
        )));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}
