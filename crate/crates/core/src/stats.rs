//! Small statistics helpers: compensated summation, the normal CDF and
//! Kolmogorov–Smirnov statistics.

use std::f64::consts::FRAC_1_SQRT_2;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merge a partial sum computed elsewhere.
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().collect::<CompensatedSum>().value()
}

/// Sample mean and unbiased variance with compensated sums (two passes).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, ss / (n - 1.0))
}

/// Standard normal CDF `Φ(t) = ½ erfc(−t/√2)`.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// `sup_t |F̂(t) − F(t)|` for the empirical CDF of `sorted` (ascending).
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level 1% (`1.63 / √N`).
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compensation_recovers_lost_bits() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
        let mut a: CompensatedSum = [1e16, 1.0].into_iter().collect();
        a.merge([-1e16, 1.0].into_iter().collect());
        assert_eq!(a.value(), 2.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // Tabulated Φ(1.96) and the symmetry Φ(−t) = 1 − Φ(t)
        assert_relative_eq!(normal_cdf(1.96), 0.975_002_104_851_780, max_relative = 1e-13);
        assert_relative_eq!(normal_cdf(-1.0) + normal_cdf(1.0), 1.0, max_relative = 1e-15);
        // deep tail stays relative-accurate: Φ(−10) ≈ 7.6198530241605e−24
        assert_relative_eq!(normal_cdf(-10.0), 7.619_853_024_160_527e-24, max_relative = 1e-12);
    }

    #[test]
    fn ks_of_perfect_grid_is_half_step() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert_relative_eq!(ks_statistic(&xs, |x| x), 0.5 / n as f64, max_relative = 1e-12);
    }

    #[test]
    fn mean_var_small_case() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_relative_eq!(v, 5.0 / 3.0, max_relative = 1e-15);
    }
}
