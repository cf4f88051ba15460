//! Scalar statistics over draws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `2 * min(P(x > 0), P(x < 0))`; exact zeros count in neither part.
pub fn tail_probability(draws: &[f64]) -> f64 {
    if draws.is_empty() {
        return f64::NAN;
    }
    let n = draws.len() as f64;
    let pos = draws.iter().filter(|&&v| v > 0.0).count() as f64 / n;
    let neg = draws.iter().filter(|&&v| v < 0.0).count() as f64 / n;
    2.0 * pos.min(neg)
}

/// Potential scale reduction factor of one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psrf {
    /// Mean within-chain variance.
    pub w: f64,
    /// `n` times the variance of the chain means.
    pub b: f64,
    /// Pooled variance estimate `(n-1)/n W + (1 + 1/m) B/n`.
    pub v_hat: f64,
    /// `sqrt(v_hat / W)` before the degrees-of-freedom correction.
    pub uncorrected: f64,
    pub point: f64,
    pub upper: f64,
}

/// Brooks-Gelman corrected PSRF over chains of equal length.
pub fn psrf(chains: &[Vec<f64>], confidence: f64) -> Result<Psrf> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Diagnostics("the Gelman-Rubin criterion needs at least two chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Diagnostics("chains differ in length".into()));
    }
    if n < 2 {
        return Err(Error::Diagnostics("the Gelman-Rubin criterion needs at least two draws per chain".into()));
    }
    let (mf, nf) = (m as f64, n as f64);
    let s2: Vec<f64> = chains.iter().map(|c| variance(c)).collect();
    let xbar: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&s2);
    if !(w > 0.0) {
        return Err(Error::Diagnostics("chains are constant, the criterion is undefined".into()));
    }
    let b = nf * variance(&xbar);
    let muhat = mean(&xbar);
    let var_w = variance(&s2) / mf;
    let var_b = 2.0 * b * b / (mf - 1.0);
    let xbar2: Vec<f64> = xbar.iter().map(|x| x * x).collect();
    let cov_wb = nf / mf * (covariance(&s2, &xbar2) - 2.0 * muhat * covariance(&s2, &xbar));
    let v_hat = (nf - 1.0) / nf * w + (1.0 + 1.0 / mf) * b / nf;
    let var_v = ((nf - 1.0).powi(2) * var_w
        + (1.0 + 1.0 / mf).powi(2) * var_b
        + 2.0 * (nf - 1.0) * (1.0 + 1.0 / mf) * cov_wb)
        / (nf * nf);
    let df_adj = if var_v > 0.0 {
        let df_v = 2.0 * v_hat * v_hat / var_v;
        (df_v + 3.0) / (df_v + 1.0)
    } else {
        1.0
    };
    let r2_fixed = (nf - 1.0) / nf;
    let r2_random = (1.0 + 1.0 / mf) * (1.0 / nf) * (b / w);
    let b_df = mf - 1.0;
    let p = (1.0 + confidence) / 2.0;
    let quant = if var_w > 0.0 {
        let w_df = 2.0 * w * w / var_w;
        FisherSnedecor::new(b_df, w_df)
            .map_err(|e| Error::Diagnostics(format!("F quantile: {e}")))?
            .inverse_cdf(p)
    } else {
        ChiSquared::new(b_df)
            .map_err(|e| Error::Diagnostics(format!("chi-squared quantile: {e}")))?
            .inverse_cdf(p)
            / b_df
    };
    let r2 = r2_fixed + r2_random;
    Ok(Psrf {
        w,
        b,
        v_hat,
        uncorrected: r2.sqrt(),
        point: (df_adj * r2).sqrt(),
        upper: (df_adj * (r2_fixed + quant * r2_random)).sqrt(),
    })
}

/// Monte Carlo standard error by non-overlapping batch means with batch
/// size `floor(sqrt(n))`.
pub fn batch_means_se(x: &[f64]) -> Result<f64> {
    let n = x.len();
    let size = (n as f64).sqrt().floor() as usize;
    let a = if size == 0 { 0 } else { n / size };
    if a < 2 {
        return Err(Error::Diagnostics(format!("{n} draws give fewer than two batches")));
    }
    let mu = mean(x);
    let ss: f64 = (0..a)
        .map(|k| (mean(&x[k * size..(k + 1) * size]) - mu).powi(2))
        .sum();
    let sigma2 = size as f64 * ss / (a - 1) as f64;
    Ok((sigma2 / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn tail_probability_examples() {
        assert_eq!(tail_probability(&[-1.0, 2.0, 3.0, 4.0]), 0.5);
        assert_eq!(tail_probability(&[1.0, 2.0]), 0.0);
        assert_eq!(tail_probability(&[-2.0, -1.0, 1.0, 2.0]), 1.0);
        assert_eq!(tail_probability(&[0.0, 0.0, 1.0, -1.0]), 0.5);
    }

    #[test]
    fn quantile_interpolates() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn psrf_hand_example() {
        let r = psrf(&[vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 3.0, 4.0, 5.0]], 0.95).unwrap();
        assert!((r.w - 5.0 / 3.0).abs() < 1e-12);
        assert!((r.b - 2.0).abs() < 1e-12);
        // (3/4) (5/3) + (3/2) (2/4)
        assert!((r.v_hat - 2.0).abs() < 1e-12);
        assert!((r.uncorrected - 1.2f64.sqrt()).abs() < 1e-12);
        assert!(r.upper >= r.point);
    }

    #[test]
    fn psrf_errors() {
        assert!(psrf(&[vec![1.0, 2.0]], 0.95).is_err());
        assert!(psrf(&[vec![1.0, 1.0], vec![1.0, 1.0]], 0.95).is_err());
        assert!(psrf(&[vec![1.0, 2.0], vec![1.0]], 0.95).is_err());
    }

    #[test]
    fn batch_means_iid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let se = batch_means_se(&x).unwrap();
        assert!((se - 0.01).abs() < 0.003, "{se}");
        assert!(batch_means_se(&[1.0]).is_err());
    }
}
