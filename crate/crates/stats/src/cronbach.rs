use crate::descriptive::sample_variance;
use crate::{Result, StatsError};

/// Cronbach's alpha over a students × items score matrix.
///
/// `alpha = k/(k-1) * (1 - sum(item variances) / variance(total scores))`,
/// with sample (n - 1) variances.
pub fn cronbach_alpha(matrix: &[Vec<f64>]) -> Result<f64> {
    let students = matrix.len();
    if students < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: students });
    }
    let items = matrix[0].len();
    if items < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: items });
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != items) {
        return Err(StatsError::LengthMismatch { left: items, right: row.len() });
    }

    let totals: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(StatsError::DegenerateVariance("total scores are constant"));
    }
    let item_var: f64 = (0..items)
        .map(|j| {
            let column: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
            sample_variance(&column)
        })
        .sum();

    let k = items as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}
