//! Certified probability bounds for the smoothed traffic estimate.
//!
//! The estimator `y_t = alpha * p_t + (1 - alpha) * y_{t-1}` driven by
//! i.i.d. packet counts `p_t` with mean `mu` approaches a stationary
//! distribution. For slot scheduling the interesting quantity is the
//! probability that `y` stays inside the open unit band `(mu - 1, mu + 1)`:
//! inside the band, the hysteresis rule keeps the slot count untouched.
//!
//! The bounds are computed by iterating two coupled envelope chains on a
//! value grid of `h` bins per packet: a lower chain that rounds every
//! update down to its bin floor and an upper chain that rounds up by one
//! bin. Monotonicity of the update map keeps the lower chain stochastically
//! below the true estimate and the upper chain above it at every
//! iteration, so the reported interval is valid even when iteration stops
//! early. The chains converge toward discretized stationary distributions;
//! the residual gap between the two bounds is the grid discretization
//! error, so small `epsilon` targets need a fine grid.

use crate::scheduler::Real;
use rand::Rng;
use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("distribution cutoff m_max = {m_max} lies below the mean {mean}")]
    CutoffBelowMean { m_max: usize, mean: f64 },
    #[error("probability masses sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// Compensated (Kahan) accumulator.
#[derive(Clone, Copy)]
struct Kahan<F: Real> {
    sum: F,
    carry: F,
}

impl<F: Real> Kahan<F> {
    fn new() -> Self {
        Self {
            sum: F::zero(),
            carry: F::zero(),
        }
    }

    fn add(&mut self, x: F) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> F {
        self.sum
    }
}

fn kahan_sum<F: Real>(xs: impl IntoIterator<Item = F>) -> F {
    let mut acc = Kahan::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Packet-count distribution truncated at a cutoff `m_max`, with all tail
/// mass folded into the last entry.
///
/// `mean` keeps the nominal (untruncated) mean; the band limits are placed
/// around it rather than around the slightly smaller truncated mean.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf<F: Real> {
    mass: Vec<F>,
    mean: F,
}

impl<F: Real> TruncatedPmf<F> {
    /// Build from explicit masses for counts `0..=m_max`; masses beyond
    /// `m_max` in the input are folded into the last entry.
    pub fn from_masses(masses: &[F], mean: F, m_max: usize) -> Result<Self, AnalysisError> {
        if masses.is_empty() || m_max == 0 {
            return Err(AnalysisError::BadParameter("empty distribution"));
        }
        if F::from_usize(m_max).unwrap() < mean {
            return Err(AnalysisError::CutoffBelowMean {
                m_max,
                mean: mean.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut mass = vec![F::zero(); m_max + 1];
        for (k, &m) in masses.iter().enumerate() {
            mass[k.min(m_max)] = mass[k.min(m_max)] + m;
        }
        let sum = kahan_sum(mass.iter().copied());
        let tol = F::from_f64(1e-6).unwrap();
        if (sum - F::one()).abs() > tol {
            return Err(AnalysisError::NotNormalized {
                sum: sum.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { mass, mean })
    }

    /// Poisson distribution with the given mean, truncated at `m_max`.
    pub fn poisson(mu: F, m_max: usize) -> Result<Self, AnalysisError> {
        if mu <= F::zero() {
            return Err(AnalysisError::BadParameter("poisson mean must be positive"));
        }
        if F::from_usize(m_max).unwrap() < mu {
            return Err(AnalysisError::CutoffBelowMean {
                m_max,
                mean: mu.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut mass = vec![F::zero(); m_max + 1];
        let mut p = (-mu).exp();
        let mut head = Kahan::new();
        for (k, slot) in mass.iter_mut().enumerate().take(m_max) {
            *slot = p;
            head.add(p);
            p = p * mu / F::from_usize(k + 1).unwrap();
        }
        // Fold the entire tail into the cutoff entry.
        mass[m_max] = (F::one() - head.value()).max(F::zero());
        Ok(Self { mass, mean: mu })
    }

    /// Deterministic count: all mass at `k`.
    pub fn fixed(k: usize, m_max: usize) -> Result<Self, AnalysisError> {
        if m_max < k {
            return Err(AnalysisError::CutoffBelowMean {
                m_max,
                mean: k as f64,
            });
        }
        let mut mass = vec![F::zero(); m_max + 1];
        mass[k] = F::one();
        Ok(Self {
            mass,
            mean: F::from_usize(k).unwrap(),
        })
    }

    /// Default cutoff: four times the mean, rounded up.
    pub fn default_m_max(mean: F) -> usize {
        let four = F::from_u8(4).unwrap();
        (four * mean).ceil().to_usize().unwrap_or(1).max(1)
    }

    pub fn mass(&self) -> &[F] {
        &self.mass
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    pub fn m_max(&self) -> usize {
        self.mass.len() - 1
    }

    /// Mean of the truncated distribution itself (at most the nominal
    /// mean).
    pub fn truncated_mean(&self) -> F {
        kahan_sum(
            self.mass
                .iter()
                .enumerate()
                .map(|(k, &m)| m * F::from_usize(k).unwrap()),
        )
    }
}

/// Probability distribution over a value grid with `h` bins per packet.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution<F: Real> {
    bins: Vec<F>,
    h: u32,
}

impl<F: Real> GridDistribution<F> {
    /// All mass in the lowest bin (value 0).
    pub fn at_bottom(n_bins: usize, h: u32) -> Self {
        let mut bins = vec![F::zero(); n_bins];
        bins[0] = F::one();
        Self { bins, h }
    }

    /// All mass in the highest bin.
    pub fn at_top(n_bins: usize, h: u32) -> Self {
        let mut bins = vec![F::zero(); n_bins];
        *bins.last_mut().unwrap() = F::one();
        Self { bins, h }
    }

    pub fn bins(&self) -> &[F] {
        &self.bins
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    /// One estimator update applied to the whole distribution.
    ///
    /// Each source bin `i` is read at value `i/h + offset` (offset 0 for
    /// the lower chain, `1/h` for the upper chain), combined with every
    /// packet count `m`, and the result `m*alpha + value*(1-alpha)` is
    /// floored onto the grid.
    pub fn step(&self, pmf: &TruncatedPmf<F>, alpha: F, offset: F) -> Self {
        let n = self.bins.len();
        let h = F::from_u32(self.h).unwrap();
        let one_minus = F::one() - alpha;
        let mut out = vec![F::zero(); n];
        let scaled: Vec<(usize, F)> = pmf
            .mass()
            .iter()
            .enumerate()
            .filter(|(_, &fm)| fm > F::zero())
            .map(|(m, &fm)| (m, fm))
            .collect();
        let m_alpha: Vec<F> = scaled
            .iter()
            .map(|(m, _)| F::from_usize(*m).unwrap() * alpha)
            .collect();
        for (i, &yi) in self.bins.iter().enumerate() {
            if yi == F::zero() {
                continue;
            }
            let survived = (F::from_usize(i).unwrap() / h + offset) * one_minus;
            for ((_, fm), &ma) in scaled.iter().zip(&m_alpha) {
                let lambda = ma + survived;
                let s = (lambda * h).floor().to_usize().unwrap_or(n - 1).min(n - 1);
                out[s] = out[s] + *fm * yi;
            }
        }
        Self {
            bins: out,
            h: self.h,
        }
    }

    /// Total probability mass currently on the grid.
    pub fn total(&self) -> F {
        kahan_sum(self.bins.iter().copied())
    }
}

/// Options for the bounds iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions<F: Real> {
    /// Grid resolution: bins per packet.
    pub h: u32,
    /// Target gap between the two bounds.
    pub epsilon: F,
    /// Iteration cap; reaching it yields a non-converged (but still valid)
    /// result.
    pub max_iterations: u64,
}

impl<F: Real> Default for BoundsOptions<F> {
    fn default() -> Self {
        Self {
            h: 100,
            epsilon: F::from_f64(1e-3).unwrap(),
            max_iterations: 100_000,
        }
    }
}

/// Lower and upper bounds on the stationary in-band probability.
///
/// The bounds are valid regardless of `converged`; a non-converged result
/// merely failed to bring the gap below epsilon within the iteration cap,
/// which happens when the grid is too coarse for the requested gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBounds<F: Real> {
    pub p_lower: F,
    pub p_upper: F,
    pub iterations: u64,
    pub converged: bool,
}

impl<F: Real> IntervalBounds<F> {
    pub fn gap(&self) -> F {
        self.p_upper - self.p_lower
    }
}

/// Bounds on the probability that the stationary estimate lies in the open
/// band `(mean - 1, mean + 1)`.
pub fn interval_probability<F: Real>(
    pmf: &TruncatedPmf<F>,
    alpha: F,
    opts: &BoundsOptions<F>,
) -> Result<IntervalBounds<F>, AnalysisError> {
    if !(alpha > F::zero() && alpha <= F::one()) {
        return Err(AnalysisError::BadParameter("alpha must be in (0, 1]"));
    }
    if opts.h < 2 {
        return Err(AnalysisError::BadParameter("grid resolution h must exceed 1"));
    }
    if !(opts.epsilon > F::zero()) {
        return Err(AnalysisError::BadParameter("epsilon must be positive"));
    }
    if opts.max_iterations == 0 {
        return Err(AnalysisError::BadParameter("iteration cap must be positive"));
    }

    let h = opts.h;
    let hf = F::from_u32(h).unwrap();
    let n_bins = pmf.m_max() * h as usize;
    let mu = pmf.mean();

    // Band edges on the grid around the nominal mean.
    let low_cut = ((mu - F::one()) * hf)
        .ceil()
        .to_isize()
        .unwrap_or(0)
        .clamp(0, n_bins as isize) as usize;
    let high_cut = ((mu + F::one()) * hf)
        .floor()
        .to_isize()
        .unwrap_or(n_bins as isize)
        .clamp(0, n_bins as isize) as usize;

    let mut lower_chain = GridDistribution::at_bottom(n_bins, h);
    let mut upper_chain = GridDistribution::at_top(n_bins, h);
    let offset_up = F::one() / hf;

    let clamp01 = |x: F| x.max(F::zero()).min(F::one());
    let mut iterations = 0u64;
    loop {
        lower_chain = lower_chain.step(pmf, alpha, F::zero());
        upper_chain = upper_chain.step(pmf, alpha, offset_up);
        iterations += 1;

        let lower_low = kahan_sum(lower_chain.bins()[..low_cut].iter().copied());
        let lower_high = kahan_sum(lower_chain.bins()[high_cut..].iter().copied());
        let upper_low = kahan_sum(upper_chain.bins()[..low_cut].iter().copied());
        let upper_high = kahan_sum(upper_chain.bins()[high_cut..].iter().copied());

        let p_lower = clamp01(F::one() - lower_low - upper_high);
        let p_upper = clamp01(F::one() - upper_low - lower_high);

        if p_upper - p_lower <= opts.epsilon {
            return Ok(IntervalBounds {
                p_lower,
                p_upper,
                iterations,
                converged: true,
            });
        }
        if iterations >= opts.max_iterations {
            return Ok(IntervalBounds {
                p_lower,
                p_upper,
                iterations,
                converged: false,
            });
        }
    }
}

/// Multi-superframes until the estimate first reaches one packet below a
/// constant demand `mu`, by the deterministic recurrence: the smallest `t`
/// with `mu * (1 - (1-alpha)^t) >= mu - 1`, i.e. `ln(1/mu) / ln(1-alpha)`.
pub fn settling_time<F: Real>(mu: F, alpha: F) -> Result<F, AnalysisError> {
    if mu <= F::one() {
        return Err(AnalysisError::BadParameter("settling needs a mean above 1"));
    }
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(AnalysisError::BadParameter("alpha must be in (0, 1)"));
    }
    Ok((F::one() / mu).ln() / (F::one() - alpha).ln())
}

/// First whole multi-superframe index at which the deterministic estimate
/// has settled.
pub fn settling_steps<F: Real>(mu: F, alpha: F) -> Result<u64, AnalysisError> {
    Ok(settling_time(mu, alpha)?.ceil().to_u64().unwrap_or(u64::MAX))
}

/// One row of the responsiveness/stability table for a candidate alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow<F: Real> {
    pub alpha: F,
    pub bounds: IntervalBounds<F>,
    pub settling_msf: F,
    pub settling_seconds: f64,
}

/// Evaluate the stability bounds and settling time for several smoothing
/// factors. `msf_seconds` converts settling from multi-superframes to
/// seconds.
pub fn tradeoff_table<F: Real>(
    pmf: &TruncatedPmf<F>,
    alphas: &[F],
    opts: &BoundsOptions<F>,
    msf_seconds: f64,
) -> Result<Vec<TradeoffRow<F>>, AnalysisError> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let bounds = interval_probability(pmf, alpha, opts)?;
        let settling_msf = settling_time(pmf.mean(), alpha)?;
        rows.push(TradeoffRow {
            alpha,
            bounds,
            settling_msf,
            settling_seconds: settling_msf.to_f64().unwrap_or(f64::NAN) * msf_seconds,
        });
    }
    Ok(rows)
}

/// Fraction of post-burn-in steps a simulated estimator chain spends inside
/// the open unit band around `mean`, with packet counts drawn by `sample`.
pub fn mc_in_band_fraction<R: Rng>(
    mut sample: impl FnMut(&mut R) -> u32,
    mean: f64,
    alpha: f64,
    steps: u64,
    burn_in: u64,
    rng: &mut R,
) -> f64 {
    let mut y = 0.0f64;
    let mut inside = 0u64;
    for t in 0..(burn_in + steps) {
        y = alpha * f64::from(sample(rng)) + (1.0 - alpha) * y;
        if t >= burn_in && y > mean - 1.0 && y < mean + 1.0 {
            inside += 1;
        }
    }
    inside as f64 / steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

    #[test]
    fn poisson_masses_match_reference() {
        let pmf = TruncatedPmf::<f64>::poisson(5.0, 20).unwrap();
        assert_eq!(pmf.m_max(), 20);
        // Head masses against an independent implementation and a frozen
        // literal for the first entry.
        assert_relative_eq!(pmf.mass()[0], 6.737946999085467e-3, epsilon = 1e-15);
        let reference = Poisson::new(5.0).unwrap();
        for k in 0..20 {
            assert_relative_eq!(pmf.mass()[k], reference.pmf(k as u64), epsilon = 1e-12);
        }
        // The cutoff entry absorbs the whole tail.
        let tail = 1.0 - reference.cdf(19);
        assert_relative_eq!(pmf.mass()[20], tail, epsilon = 1e-12);
        assert_relative_eq!(kahan_sum(pmf.mass().iter().copied()), 1.0, epsilon = 1e-14);
        assert!(pmf.truncated_mean() < pmf.mean());
        assert!(pmf.mean() - pmf.truncated_mean() < 1e-6);
    }

    #[test]
    fn cutoff_below_mean_rejected() {
        assert!(matches!(
            TruncatedPmf::<f64>::poisson(5.0, 4),
            Err(AnalysisError::CutoffBelowMean { m_max: 4, .. })
        ));
        assert!(TruncatedPmf::<f64>::poisson(5.0, 5).is_ok());
        assert!(matches!(
            TruncatedPmf::<f64>::fixed(7, 6),
            Err(AnalysisError::CutoffBelowMean { .. })
        ));
        assert_eq!(TruncatedPmf::default_m_max(5.0f64), 20);
        assert_eq!(TruncatedPmf::default_m_max(0.1f64), 1);
    }

    #[test]
    fn explicit_masses_fold_and_validate() {
        let pmf = TruncatedPmf::from_masses(&[0.2, 0.3, 0.3, 0.1, 0.1], 1.6, 2).unwrap();
        assert_eq!(pmf.mass(), &[0.2, 0.3, 0.5]);
        assert!(matches!(
            TruncatedPmf::from_masses(&[0.5, 0.4], 0.5, 2),
            Err(AnalysisError::NotNormalized { .. })
        ));
    }

    #[test]
    fn step_matches_hand_computed_case() {
        // h = 2, m_max = 2, alpha = 0.5, masses {0.25, 0.5, 0.25}.
        let pmf = TruncatedPmf::from_masses(&[0.25, 0.5, 0.25], 1.0, 2).unwrap();
        let lower = GridDistribution::<f64>::at_bottom(4, 2);
        let s1 = lower.step(&pmf, 0.5, 0.0);
        assert_eq!(s1.bins(), &[0.25, 0.5, 0.25, 0.0]);
        let s2 = s1.step(&pmf, 0.5, 0.0);
        assert_eq!(s2.bins(), &[0.1875, 0.4375, 0.3125, 0.0625]);

        // Upper chain reads bin i at value (i+1)/h.
        let upper = GridDistribution::<f64>::at_top(4, 2);
        let u1 = upper.step(&pmf, 0.5, 0.5);
        assert_eq!(u1.bins(), &[0.0, 0.0, 0.25, 0.75]);
    }

    proptest! {
        #[test]
        fn step_conserves_mass(
            raw in proptest::collection::vec(0.01f64..1.0, 3..6),
            alpha in 0.05f64..1.0,
            upper: bool,
        ) {
            let total: f64 = raw.iter().sum();
            let masses: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let mean = masses.iter().enumerate().map(|(k, m)| k as f64 * m).sum::<f64>();
            let m_max = masses.len() - 1;
            let pmf = TruncatedPmf::from_masses(&masses, mean, m_max).unwrap();
            let h = 4u32;
            let n = m_max * h as usize;
            let start = if upper {
                GridDistribution::at_top(n, h)
            } else {
                GridDistribution::at_bottom(n, h)
            };
            let offset = if upper { 1.0 / h as f64 } else { 0.0 };
            let mut d = start;
            for _ in 0..5 {
                d = d.step(&pmf, alpha, offset);
                prop_assert!((d.total() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn bounds_are_ordered_probabilities(
            mu in 1.5f64..4.0,
            alpha in 0.1f64..0.9,
            h in 4u32..12,
        ) {
            let pmf = TruncatedPmf::poisson(mu, TruncatedPmf::default_m_max(mu)).unwrap();
            let opts = BoundsOptions { h, epsilon: 1e-9, max_iterations: 60 };
            let b = interval_probability(&pmf, alpha, &opts).unwrap();
            prop_assert!((0.0..=1.0).contains(&b.p_lower));
            prop_assert!((0.0..=1.0).contains(&b.p_upper));
            prop_assert!(b.p_lower <= b.p_upper + 1e-12);
        }
    }

    #[test]
    fn fixed_demand_bounds_collapse_to_one() {
        let pmf = TruncatedPmf::<f64>::fixed(5, 6).unwrap();
        let opts = BoundsOptions {
            h: 10,
            epsilon: 1e-9,
            max_iterations: 1000,
        };
        let b = interval_probability(&pmf, 0.5, &opts).unwrap();
        assert!(b.converged);
        assert!(b.iterations < 100);
        assert_eq!(b.p_lower, 1.0);
        assert_eq!(b.p_upper, 1.0);
    }

    #[test]
    fn coarse_grid_reports_nonconvergence_with_valid_bounds() {
        let pmf = TruncatedPmf::<f64>::poisson(5.0, 20).unwrap();
        let opts = BoundsOptions {
            h: 5,
            epsilon: 1e-6,
            max_iterations: 80,
        };
        let b = interval_probability(&pmf, 0.05, &opts).unwrap();
        assert!(!b.converged);
        assert_eq!(b.iterations, 80);
        assert!(b.p_lower <= b.p_upper);
        assert!((0.0..=1.0).contains(&b.p_lower));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let pmf = TruncatedPmf::<f64>::poisson(2.0, 8).unwrap();
        let bad_h = BoundsOptions { h: 1, ..Default::default() };
        assert!(interval_probability(&pmf, 0.5, &bad_h).is_err());
        let opts = BoundsOptions::default();
        assert!(interval_probability(&pmf, 0.0, &opts).is_err());
        assert!(interval_probability(&pmf, 1.5, &opts).is_err());
        assert!(settling_time(0.9f64, 0.5).is_err());
        assert!(settling_time(5.0f64, 1.0).is_err());
    }

    #[test]
    fn settling_time_reference_values() {
        let t = settling_time(5.0f64, 0.05).unwrap();
        assert_relative_eq!(t, 31.3772, epsilon = 1e-3);
        assert_eq!(settling_steps(5.0f64, 0.05).unwrap(), 32);
        // Faster smoothing settles sooner.
        assert!(settling_time(5.0f64, 0.2).unwrap() < t);
        // The deterministic recurrence confirms the crossing index.
        let mut y = 0.0;
        let mut crossed_at = 0;
        for t in 1..200 {
            y = 0.05 * 5.0 + 0.95 * y;
            if y >= 4.0 {
                crossed_at = t;
                break;
            }
        }
        assert_eq!(crossed_at, 32);
    }

    #[test]
    fn tradeoff_rows_follow_alphas() {
        let pmf = TruncatedPmf::<f64>::poisson(5.0, 20).unwrap();
        let opts = BoundsOptions {
            h: 8,
            epsilon: 1e-9,
            max_iterations: 40,
        };
        let alphas = [0.05, 0.1, 0.2];
        let rows = tradeoff_table(&pmf, &alphas, &opts, 0.123).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, &a) in rows.iter().zip(&alphas) {
            assert_eq!(row.alpha, a);
            assert_relative_eq!(row.settling_seconds, row.settling_msf * 0.123);
        }
        assert!(rows[0].settling_msf > rows[1].settling_msf);
        assert!(rows[1].settling_msf > rows[2].settling_msf);
    }

    #[test]
    fn mc_chain_spends_most_time_in_band() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let dist = rand_distr::Poisson::new(5.0f64).unwrap();
        let frac = mc_in_band_fraction(
            |r: &mut ChaCha12Rng| rand::Rng::sample(r, dist) as u32,
            5.0,
            0.05,
            20_000,
            2_000,
            &mut rng,
        );
        assert!(frac > 0.97, "in-band fraction {frac}");
    }
}
