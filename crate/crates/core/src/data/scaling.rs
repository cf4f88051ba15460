use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centre and spread used to standardise a column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation over the observed values.
pub fn scaling_stats(values: &[Option<f64>]) -> Result<ScaleStats> {
    let obs: Vec<f64> = values.iter().flatten().copied().collect();
    if obs.len() < 2 {
        return Err(Error::Data(
            "cannot scale a column with fewer than two observed values".into(),
        ));
    }
    let n = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / n;
    let ss: f64 = obs.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Data("cannot scale a column with zero standard deviation".into()));
    }
    Ok(ScaleStats { mean, sd })
}

pub fn apply_scaling(values: &[Option<f64>], stats: ScaleStats) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|v| v.map(|x| (x - stats.mean) / stats.sd))
        .collect()
}

pub fn unscale(values: &[Option<f64>], stats: ScaleStats) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|v| v.map(|z| z * stats.sd + stats.mean))
        .collect()
}
