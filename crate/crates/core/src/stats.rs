//! Small statistics helpers for reporting: sample means with Student-t
//! confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean with a two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub half_width: f64,
}

impl MeanCi {
    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Whether two intervals share at least one point.
    pub fn overlaps(&self, other: &MeanCi) -> bool {
        self.low() <= other.high() && other.low() <= self.high()
    }
}

/// Mean and Student-t confidence interval of the samples; `None` with fewer
/// than two samples.
pub fn mean_ci(samples: &[f64], confidence: f64) -> Option<MeanCi> {
    let n = samples.len();
    if n < 2 || !(0.0..1.0).contains(&confidence) {
        return None;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .ok()?
        .inverse_cdf(0.5 + confidence / 2.0);
    Some(MeanCi {
        n,
        mean,
        half_width: t * (var / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_t_quantiles() {
        // t quantiles at 97.5%: 2.2621571628 for 9 degrees of freedom,
        // 2.0452296421 for 29.
        let t9 = StudentsT::new(0.0, 1.0, 9.0).unwrap().inverse_cdf(0.975);
        assert_relative_eq!(t9, 2.2621571628, epsilon = 1e-6);
        let t29 = StudentsT::new(0.0, 1.0, 29.0).unwrap().inverse_cdf(0.975);
        assert_relative_eq!(t29, 2.0452296421, epsilon = 1e-6);
    }

    #[test]
    fn interval_matches_hand_computation() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let ci = mean_ci(&xs, 0.95).unwrap();
        assert_relative_eq!(ci.mean, 5.0);
        // Sample variance 32/7; half width = t(0.975, 7) * sqrt(32/7/8).
        let t7 = 2.3646242510;
        assert_relative_eq!(ci.half_width, t7 * (32.0f64 / 7.0 / 8.0).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(mean_ci(&[1.0], 0.95).is_none());
        assert!(mean_ci(&[], 0.95).is_none());
        let ci = mean_ci(&[3.0, 3.0, 3.0], 0.95).unwrap();
        assert_eq!(ci.mean, 3.0);
        assert_eq!(ci.half_width, 0.0);
    }

    #[test]
    fn overlap_test() {
        let a = MeanCi { n: 5, mean: 1.0, half_width: 0.5 };
        let b = MeanCi { n: 5, mean: 1.8, half_width: 0.4 };
        let c = MeanCi { n: 5, mean: 3.0, half_width: 0.2 };
        assert!(a.overlaps(&b));
        assert!(b.overlaps(&a));
        assert!(!a.overlaps(&c));
    }
}
