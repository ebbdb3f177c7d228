use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn from_samples(xs: &[f64]) -> MeanSe {
        let n = xs.len();
        if n == 0 {
            return MeanSe { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, stderr, count: n }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn joint_stderr(&self, other: &MeanSe) -> f64 {
        (self.stderr * self.stderr + other.stderr * other.stderr).sqrt()
    }

    /// `|a - b| <= k * joint stderr`.
    pub fn agrees_with(&self, other: &MeanSe, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.joint_stderr(other)
    }
}

/// Binomial proportion with its standard error.
pub fn proportion(successes: usize, trials: usize) -> MeanSe {
    if trials == 0 {
        return MeanSe { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let p = successes as f64 / trials as f64;
    MeanSe {
        mean: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        count: trials,
    }
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let m = MeanSe::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.stderr - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-12);
        let c = MeanSe::from_samples(&[1.0; 10]);
        assert_eq!(c.stderr, 0.0);
        assert!(c.agrees_with(&c, 0.0));
    }

    #[test]
    fn quantiles() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(quantile(&xs, 0.999), 999.0);
        assert_eq!(quantile(&xs, 1.0), 1000.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
    }
}
