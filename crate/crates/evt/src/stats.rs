//! Small empirical-statistics helpers shared by the scenarios.

/// Linearly interpolated empirical quantile, `q` in `[0, 1]`.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let idx = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n-1) sample variance; zero for fewer than two samples.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_quantile(&data, 0.0), 1.0);
        assert_eq!(empirical_quantile(&data, 0.5), 3.0);
        assert_eq!(empirical_quantile(&data, 1.0), 5.0);
        assert!((empirical_quantile(&data, 0.125) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn variance_of_constant_is_zero() {
        assert_eq!(sample_variance(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn basic_moments() {
        let data = [1.0, 2.0, 3.0];
        assert!((mean(&data) - 2.0).abs() < 1e-12);
        assert!((sample_variance(&data) - 1.0).abs() < 1e-12);
    }
}
