pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean; zero for a single observation.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Cohen's d with the pooled standard deviation. `None` when the pooled
/// deviation is zero or either group has fewer than two observations.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Option<f64> {
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    if x.len() < 2 || y.len() < 2 {
        return None;
    }
    let pooled = (((nx - 1.0) * sample_variance(x) + (ny - 1.0) * sample_variance(y)) / (nx + ny - 2.0)).sqrt();
    if pooled == 0.0 {
        return None;
    }
    Some((mean(x) - mean(y)) / pooled)
}
