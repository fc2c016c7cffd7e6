use super::StatsError;

/// Demonstrations resampled to a common length and blended onto shared
/// endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub dt: f64,
    pub demos: Vec<Vec<[f64; 3]>>,
}

/// Linear interpolation of `p` onto `samples` points over the same duration.
pub fn resample(p: &[[f64; 3]], samples: usize) -> Vec<[f64; 3]> {
    let n = p.len();
    (0..samples)
        .map(|k| {
            let s = if samples > 1 { k as f64 * (n - 1) as f64 / (samples - 1) as f64 } else { 0.0 };
            let i = (s.floor() as usize).min(n - 2);
            let frac = s - i as f64;
            std::array::from_fn(|d| p[i][d] + frac * (p[i + 1][d] - p[i][d]))
        })
        .collect()
}

impl DemoSet {
    /// Resamples every demonstration to `samples` points and adds a linear
    /// blend of endpoint corrections so all start at the mean start and end
    /// at the mean goal. `dt` is set so the mean duration is preserved.
    pub fn new(demos: &[(f64, Vec<[f64; 3]>)], samples: usize) -> Result<Self, StatsError> {
        if demos.is_empty() {
            return Err(StatsError::Empty);
        }
        if samples < 2 {
            return Err(StatsError::InvalidParameter(format!("{samples} samples")));
        }
        for (index, (_, d)) in demos.iter().enumerate() {
            if d.len() < 2 {
                return Err(StatsError::TooShort { index, len: d.len() });
            }
        }
        let duration: f64 =
            demos.iter().map(|(dt, d)| dt * (d.len() - 1) as f64).sum::<f64>() / demos.len() as f64;
        let resampled: Vec<Vec<[f64; 3]>> = demos.iter().map(|(_, d)| resample(d, samples)).collect();
        let n = demos.len() as f64;
        let start: [f64; 3] = std::array::from_fn(|a| resampled.iter().map(|d| d[0][a]).sum::<f64>() / n);
        let goal: [f64; 3] = std::array::from_fn(|a| resampled.iter().map(|d| d[samples - 1][a]).sum::<f64>() / n);
        let aligned = resampled
            .into_iter()
            .map(|d| {
                let (s0, g0) = (d[0], d[samples - 1]);
                d.into_iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let s = k as f64 / (samples - 1) as f64;
                        std::array::from_fn(|a| p[a] + (1.0 - s) * (start[a] - s0[a]) + s * (goal[a] - g0[a]))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { dt: duration / (samples - 1) as f64, demos: aligned })
    }

    pub fn samples(&self) -> usize {
        self.demos[0].len()
    }

    /// Distinct demonstrations (bitwise), in first-seen order.
    pub fn unique(&self) -> Vec<&Vec<[f64; 3]>> {
        let mut out: Vec<&Vec<[f64; 3]>> = Vec::new();
        for d in &self.demos {
            if !out.contains(&d) {
                out.push(d);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_is_linear() {
        let p = vec![[0.0; 3], [1.0, 2.0, 3.0], [2.0, 4.0, 6.0]];
        let r = resample(&p, 5);
        assert_eq!(r[1], [0.5, 1.0, 1.5]);
        assert_eq!(r[4], [2.0, 4.0, 6.0]);
    }

    #[test]
    fn aligns_endpoints() {
        let a = (0.1, vec![[0.0; 3], [0.5, 0.5, 0.0], [1.0, 1.0, 0.0]]);
        let b = (0.05, vec![[0.1, 0.0, 0.0], [0.3, 0.2, 0.0], [0.6, 0.6, 0.0], [1.1, 1.0, 0.2], [0.9, 1.0, 0.0]]);
        let set = DemoSet::new(&[a, b], 11).unwrap();
        let (d0, d1) = (&set.demos[0], &set.demos[1]);
        for k in [0, 10] {
            for ax in 0..3 {
                assert!((d0[k][ax] - d1[k][ax]).abs() < 1e-12);
            }
        }
        assert!((set.dt - 0.02).abs() < 1e-12);
    }
}
