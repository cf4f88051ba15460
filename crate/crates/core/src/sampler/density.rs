//! Log-densities of the response families. Values outside the support give
//! negative infinity.

use statrs::function::gamma::ln_gamma;

use crate::graph::Link;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn normal(y: f64, mu: f64, tau: f64) -> f64 {
    0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * (y - mu) * (y - mu)
}

pub fn lognormal(y: f64, mu: f64, tau: f64) -> f64 {
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ly = y.ln();
    normal(ly, mu, tau) - ly
}

/// Bernoulli with success probability given through a link.
pub fn bernoulli(y: bool, eta: f64, link: Link) -> f64 {
    if link == Link::Logit {
        return if y { log_sigmoid(eta) } else { log_sigmoid(-eta) };
    }
    let p = link.inverse(eta);
    if !(0.0..=1.0).contains(&p) {
        return f64::NEG_INFINITY;
    }
    if y {
        p.ln()
    } else {
        (-p).ln_1p()
    }
}

pub fn poisson(y: f64, lambda: f64) -> f64 {
    if !(lambda > 0.0 && lambda.is_finite()) || y < 0.0 || y.fract() != 0.0 {
        return f64::NEG_INFINITY;
    }
    y * lambda.ln() - lambda - ln_gamma(y + 1.0)
}

/// Gamma with mean `mu` and precision `tau`: shape `mu^2 tau`, rate `mu tau`.
pub fn gamma_mean(y: f64, mu: f64, tau: f64) -> f64 {
    if y <= 0.0 || mu <= 0.0 || !mu.is_finite() {
        return f64::NEG_INFINITY;
    }
    let shape = mu * mu * tau;
    let rate = mu * tau;
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * y.ln() - rate * y
}

/// Beta with mean `mu` and precision `tau`: `a = mu tau`, `b = (1 - mu) tau`.
pub fn beta_mean(y: f64, mu: f64, tau: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 || mu <= 0.0 || mu >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let a = mu * tau;
    let b = (1.0 - mu) * tau;
    ln_gamma(tau) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p()
}

/// Cumulative logit: `logit P(y <= k) = gamma_k - eta` for thresholds
/// `gamma` (length K-1, increasing); `y` is the 0-based category.
pub fn cumulative_logit(y: usize, eta: f64, gamma: &[f64]) -> f64 {
    let k = gamma.len();
    if y == 0 {
        return log_sigmoid(gamma[0] - eta);
    }
    if y == k {
        return log_sigmoid(eta - gamma[k - 1]);
    }
    let hi = sigmoid(gamma[y] - eta);
    let lo = sigmoid(gamma[y - 1] - eta);
    let d = hi - lo;
    if d > 0.0 {
        d.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Category probabilities of the cumulative logit model.
pub fn cumulative_probs(eta: f64, gamma: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(gamma.len() + 1);
    let mut prev = 0.0;
    for g in gamma {
        let c = sigmoid(g - eta);
        out.push(c - prev);
        prev = c;
    }
    out.push(1.0 - prev);
    out
}

/// Multinomial logit. `etas` holds one linear predictor per category with
/// the reference category at zero.
pub fn multinomial_logit(y: usize, etas: &[f64]) -> f64 {
    etas[y] - log_sum_exp(etas)
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Weibull with survival `S(t) = exp(-(r t)^s)` and `log r = -eta`.
/// Events contribute the density, censored times the survival.
pub fn weibull(t: f64, event: bool, eta: f64, shape: f64) -> f64 {
    if t <= 0.0 || shape <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let log_r = -eta;
    let log_rt = log_r + t.ln();
    let cum_haz = (shape * log_rt).exp();
    if event {
        shape.ln() + shape * log_r + (shape - 1.0) * t.ln() - cum_haz
    } else {
        -cum_haz
    }
}

/// Gamma log-density in shape/rate form, used for priors.
pub fn gamma_prior(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Beta, Continuous, Discrete, Gamma, LogNormal, Normal, Poisson, Weibull};

    #[test]
    fn standard_normal_at_zero() {
        assert!((normal(0.0, 0.0, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_logit_half() {
        assert!((bernoulli(true, 0.0, Link::Logit) - 0.5f64.ln()).abs() < 1e-15);
        let p = Link::Probit.inverse(0.3);
        assert!((bernoulli(false, 0.3, Link::Probit) - (1.0 - p).ln()).abs() < 1e-12);
        assert_eq!(bernoulli(true, 0.5, Link::Log), f64::NEG_INFINITY);
    }

    #[test]
    fn weibull_censored_example() {
        // s = 1, r = 0.1, t = 10: log S = -(r t)^s = -1
        let eta = -(0.1f64.ln());
        assert!((weibull(10.0, false, eta, 1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn weibull_matches_reference() {
        // statrs Weibull(shape k, scale lambda) has S = exp(-(t/lambda)^k)
        let (s, r, t) = (1.5, 0.2, 3.0);
        let d = Weibull::new(s, 1.0 / r).unwrap();
        assert!((weibull(t, true, -r.ln(), s) - d.ln_pdf(t)).abs() < 1e-12);
    }

    #[test]
    fn families_match_reference_densities() {
        let n = Normal::new(1.0, 0.5).unwrap();
        assert!((normal(1.3, 1.0, 4.0) - n.ln_pdf(1.3)).abs() < 1e-12);
        let ln = LogNormal::new(0.2, 0.5).unwrap();
        assert!((lognormal(1.7, 0.2, 4.0) - ln.ln_pdf(1.7)).abs() < 1e-12);
        // mean 2, precision 3: shape 12, rate 6
        let g = Gamma::new(12.0, 6.0).unwrap();
        assert!((gamma_mean(1.5, 2.0, 3.0) - g.ln_pdf(1.5)).abs() < 1e-12);
        let b = Beta::new(0.3 * 5.0, 0.7 * 5.0).unwrap();
        assert!((beta_mean(0.4, 0.3, 5.0) - b.ln_pdf(0.4)).abs() < 1e-12);
        let p = Poisson::new(2.5).unwrap();
        assert!((poisson(3.0, 2.5) - p.ln_pmf(3)).abs() < 1e-12);
    }

    #[test]
    fn support_violations() {
        assert_eq!(gamma_mean(-1.0, 1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(beta_mean(1.0, 0.5, 1.0), f64::NEG_INFINITY);
        assert_eq!(lognormal(0.0, 0.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(poisson(1.5, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn cumulative_logit_sums_to_one() {
        let g = [-1.0, 0.5, 2.0];
        let total: f64 = (0..4).map(|k| cumulative_logit(k, 0.3, &g).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p = cumulative_probs(0.3, &g);
        for k in 0..4 {
            assert!((p[k].ln() - cumulative_logit(k, 0.3, &g)).abs() < 1e-12);
        }
        // larger eta shifts mass to higher categories
        assert!(cumulative_logit(3, 2.0, &g) > cumulative_logit(3, 0.0, &g));
    }

    #[test]
    fn multinomial_reference_zero() {
        let etas = [0.0, 1.0, -0.5];
        let total: f64 = (0..3).map(|k| multinomial_logit(k, &etas).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
