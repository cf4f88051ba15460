//! Adaptive random-walk proposal scales.

use serde::{Deserialize, Serialize};

pub const TARGET_ACCEPTANCE: f64 = 0.44;
/// Number of final adaptation iterations used for the acceptance check.
pub const CHECK_WINDOW: usize = 50;

/// Proposal scale of one random-walk update, tuned by Robbins-Monro steps
/// on the log scale during adaptation and frozen afterwards.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adaptive {
    pub log_scale: f64,
    n: u64,
    window_accepted: u32,
    window_total: u32,
}

impl Adaptive {
    pub fn new(scale: f64) -> Self {
        Adaptive {
            log_scale: scale.ln(),
            n: 0,
            window_accepted: 0,
            window_total: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Records the outcome of one proposal made at iteration `iter`.
    pub fn record(&mut self, accepted: bool, iter: usize, n_adapt: usize) {
        if iter > n_adapt {
            return;
        }
        self.n += 1;
        let a = if accepted { 1.0 } else { 0.0 };
        let gain = (self.n as f64).powf(-0.6);
        self.log_scale = (self.log_scale + gain * (a - TARGET_ACCEPTANCE)).clamp(-20.0, 10.0);
        if iter + CHECK_WINDOW.min(n_adapt) > n_adapt {
            self.window_total += 1;
            self.window_accepted += u32::from(accepted);
        }
    }

    /// Acceptance rate over the last adaptation window.
    pub fn window_rate(&self) -> Option<f64> {
        (self.window_total > 0).then(|| f64::from(self.window_accepted) / f64::from(self.window_total))
    }
}

/// Metropolis decision from a log acceptance ratio and a uniform draw.
pub fn accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u.ln() < log_ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    /// Random-walk MH on a standard normal target recovers its moments and
    /// tunes towards the target acceptance rate.
    #[test]
    fn standard_normal_target() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut a = Adaptive::new(0.1);
        let n_adapt = 2000;
        let mut x = 0.0f64;
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
        for it in 1..=n_adapt + 200_000 {
            let prop = x + a.scale() * rng.sample::<f64, _>(StandardNormal);
            let ok = accept(-0.5 * (prop * prop - x * x), rng.random());
            if ok {
                x = prop;
            }
            a.record(ok, it, n_adapt);
            if it > n_adapt {
                s1 += x;
                s2 += x * x;
                n += 1.0;
            }
        }
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.04, "{var}");
        let r = a.window_rate().unwrap();
        assert!((0.3..0.6).contains(&r), "{r}");
    }

    /// Detailed balance on three states: the empirical distribution of a
    /// symmetric-proposal chain matches the target.
    #[test]
    fn three_state_balance() {
        let p = [0.2f64, 0.5, 0.3];
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut x = 0usize;
        let mut counts = [0usize; 3];
        for _ in 0..300_000 {
            let prop = (x + 1 + rng.random_range(0..2)) % 3;
            if accept(p[prop].ln() - p[x].ln(), rng.random()) {
                x = prop;
            }
            counts[x] += 1;
        }
        for k in 0..3 {
            let f = counts[k] as f64 / 300_000.0;
            assert!((f - p[k]).abs() < 0.01, "{k}: {f}");
        }
    }

    #[test]
    fn frozen_after_adaptation() {
        let mut a = Adaptive::new(1.0);
        a.record(true, 11, 10);
        assert_eq!(a.scale(), 1.0);
        a.record(true, 10, 10);
        assert!(a.scale() > 1.0);
        assert_eq!(a.window_rate(), Some(1.0));
    }
}
