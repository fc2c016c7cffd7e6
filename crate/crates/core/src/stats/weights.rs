//! `w = exp(-sigma / mean(sigma))`: 1 where a variance is zero, strictly
//! decreasing in sigma, and finite for any non-negative input.

use super::StatsError;

fn check(index: usize, value: f64) -> Result<(), StatsError> {
    if value < 0.0 || value.is_nan() {
        return Err(StatsError::NegativeVariance { index, value });
    }
    Ok(())
}

// keeps weights inside (0, 1] even when the exponent underflows
fn weight(ratio: f64) -> f64 {
    (-ratio).exp().max(f64::MIN_POSITIVE)
}

/// Weights over time for one axis. All ones when the axis never varies.
pub fn time_weights(variances: &[f64]) -> Result<Vec<f64>, StatsError> {
    for (i, &v) in variances.iter().enumerate() {
        check(i, v)?;
    }
    let mean = variances.iter().sum::<f64>() / variances.len().max(1) as f64;
    if mean <= 0.0 {
        return Ok(vec![1.0; variances.len()]);
    }
    Ok(variances.iter().map(|v| weight(v / mean)).collect())
}

/// Weights over axes at each sample. All ones at samples with no variance.
pub fn space_weights(variances: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, StatsError> {
    variances
        .iter()
        .enumerate()
        .map(|(t, v)| {
            for &x in v {
                check(t, x)?;
            }
            let mean = (v[0] + v[1] + v[2]) / 3.0;
            Ok(if mean <= 0.0 { [1.0; 3] } else { v.map(|x| weight(x / mean)) })
        })
        .collect()
}

/// `W[t][axis] = w_space[t][axis] * w_time[axis][t]`.
pub fn combine_weights(w_time: &[Vec<f64>; 3], w_space: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, StatsError> {
    if w_time.iter().any(|w| w.len() != w_space.len()) {
        return Err(StatsError::Shape(format!(
            "time weights of length {:?} vs {} samples",
            w_time.iter().map(Vec::len).collect::<Vec<_>>(),
            w_space.len()
        )));
    }
    Ok(w_space
        .iter()
        .enumerate()
        .map(|(t, s)| std::array::from_fn(|d| (s[d] * w_time[d][t]).max(f64::MIN_POSITIVE)))
        .collect())
}
