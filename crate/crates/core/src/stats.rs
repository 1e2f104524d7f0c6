//! Empirical CDFs and quantiles.

use crate::error::{Result, SimError};

/// Empirical CDF: samples sorted ascending, the k-th of n (1-based) at
/// percentile k/n.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub points: Vec<(f64, f64)>,
}

pub fn cdf(samples: &[f64]) -> Result<Cdf> {
    if samples.is_empty() {
        return Err(SimError::Stats("cannot build a CDF from no samples".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(SimError::Stats("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(Cdf {
        points: v
            .into_iter()
            .enumerate()
            .map(|(k, x)| (x, (k + 1) as f64 / n))
            .collect(),
    })
}

impl Cdf {
    /// Value at percentile `p` in [0, 1], interpolating linearly between
    /// CDF points. `p` at or below 1/n gives the minimum, so for 1..=100 the
    /// median is 50 (not the 50.5 midpoint convention).
    pub fn quantile(&self, p: f64) -> f64 {
        let pts = &self.points;
        let p = p.clamp(0.0, 1.0);
        if p <= pts[0].1 {
            return pts[0].0;
        }
        let i = pts.partition_point(|&(_, q)| q < p);
        if i >= pts.len() {
            return pts[pts.len() - 1].0;
        }
        let (x1, p1) = pts[i];
        let (x0, p0) = pts[i - 1];
        if p1 == p0 {
            x1
        } else {
            x0 + (x1 - x0) * (p - p0) / (p1 - p0)
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}
