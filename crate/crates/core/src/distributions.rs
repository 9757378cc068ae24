//! Stay-time survival functions, their truncated supports and the
//! backwards-difference kernels used by the discrete flow recursions.

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::types::{grid_steps, TransitionId};

pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Exponential stay time with the given mean (days).
    Exponential { mean: f64 },
    /// Lognormal stay time parameterized by the mean and standard deviation
    /// of the stay time itself (not of the underlying normal).
    Lognormal { mean: f64, std: f64 },
    /// `0.5 * (1 + cos(pi * tau / support))` on `[0, support]`, zero after.
    /// Finite support makes it handy for tests.
    SmootherCosine { support: f64 },
}

/// A survival function `gamma(tau)` of the stay time in one compartment,
/// together with the threshold below which it is truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionDistribution {
    family: Family,
    epsilon: f64,
    // Cached underlying-normal parameters for the lognormal family.
    log_params: (f64, f64),
}

impl TransitionDistribution {
    pub fn new(family: Family, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let log_params = match family {
            Family::Exponential { mean } => {
                positive("exponential mean", mean)?;
                (0.0, 0.0)
            }
            Family::Lognormal { mean, std } => lognormal_underlying_params(mean, std)?,
            Family::SmootherCosine { support } => {
                positive("smoother-cosine support", support)?;
                (0.0, 0.0)
            }
        };
        Ok(TransitionDistribution {
            family,
            epsilon,
            log_params,
        })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(Family::Exponential { mean }, DEFAULT_EPSILON)
    }

    pub fn lognormal(mean: f64, std: f64) -> Result<Self> {
        Self::new(Family::Lognormal { mean, std }, DEFAULT_EPSILON)
    }

    pub fn smoother_cosine(support: f64) -> Result<Self> {
        Self::new(Family::SmootherCosine { support }, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(self.family, epsilon)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Expected proportion still in the compartment `tau` days after entry.
    pub fn survival(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Exponential { mean } => (-tau / mean).exp(),
            Family::Lognormal { .. } => {
                let (mu, sigma) = self.log_params;
                0.5 * erfc((tau.ln() - mu) / (sigma * SQRT_2))
            }
            Family::SmootherCosine { support } => {
                if tau >= support {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * tau / support).cos())
                }
            }
        }
    }

    /// Mean stay time `int_0^inf gamma(tau) dtau`.
    pub fn mean_stay_time(&self) -> f64 {
        match self.family {
            Family::Exponential { mean } | Family::Lognormal { mean, .. } => mean,
            Family::SmootherCosine { support } => {
                // Trapezoid on the (finite) support.
                let n = 10_000;
                let h = support / n as f64;
                let inner: f64 = (1..n).map(|i| self.survival(i as f64 * h)).sum();
                h * (0.5 * (self.survival(0.0) + self.survival(support)) + inner)
            }
        }
    }

    /// Continuous point where the survival function first drops to
    /// `epsilon`, by doubling then bisection.
    pub fn support_threshold(&self, epsilon: f64) -> f64 {
        let mut hi = self.mean_stay_time().max(1e-3);
        while self.survival(hi) > epsilon {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid) > epsilon {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Number of steps `K` such that `q = K * dt` is the smallest grid
    /// point with `survival(q) <= epsilon`.
    pub fn support_steps(&self, epsilon: f64, dt: f64) -> usize {
        let threshold = self.support_threshold(epsilon);
        let mut k = (threshold / dt).ceil().max(1.0) as usize;
        while k > 1 && self.survival((k - 1) as f64 * dt) <= epsilon {
            k -= 1;
        }
        while self.survival(k as f64 * dt) > epsilon {
            k += 1;
        }
        k
    }

    /// Truncated support `q` in days, a multiple of `dt`.
    pub fn truncated_support(&self, epsilon: f64, dt: f64) -> f64 {
        self.support_steps(epsilon, dt) as f64 * dt
    }

    /// Precomputes survival values and backwards differences on the grid.
    pub fn kernel(&self, dt: f64) -> DiscreteKernel {
        DiscreteKernel::new(self, dt)
    }
}

/// Underlying normal parameters `(mu, sigma)` of a lognormal stay time with
/// the given mean and standard deviation.
pub fn lognormal_underlying_params(mean: f64, std: f64) -> Result<(f64, f64)> {
    if !(mean.is_finite() && mean > 0.0 && std.is_finite() && std > 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "lognormal mean and std must be positive, got ({mean}, {std})"
        )));
    }
    let m2 = mean * mean;
    let mu = (m2 / (m2 + std * std).sqrt()).ln();
    let sigma = (1.0 + std * std / m2).ln().sqrt();
    Ok((mu, sigma))
}

/// Survival values and backwards-difference derivatives of one distribution
/// on a grid with step `dt`, truncated after `K` steps.
///
/// `survival[j] = gamma(t_j)` for `j = 0..=K`; `derivative[j - 1]` holds
/// `(gamma(t_j) - gamma(t_{j-1})) / dt` for `j = 1..=K`. All lags past `K`
/// are zero.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    dt: f64,
    survival: Vec<f64>,
    derivative: Vec<f64>,
}

impl DiscreteKernel {
    fn new(dist: &TransitionDistribution, dt: f64) -> Self {
        let k = dist.support_steps(dist.epsilon(), dt);
        let survival: Vec<f64> = (0..=k).map(|j| dist.survival(j as f64 * dt)).collect();
        let derivative = survival
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dt).min(0.0))
            .collect();
        DiscreteKernel {
            dt,
            survival,
            derivative,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Truncation length `K` in steps.
    pub fn len(&self) -> usize {
        self.derivative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derivative.is_empty()
    }

    /// `gamma'(t_lag)` approximated by the backwards difference, `lag >= 1`.
    pub fn derivative_at(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 0.0;
        }
        self.derivative.get(lag - 1).copied().unwrap_or(0.0)
    }

    /// `gamma(t_lag)` for lags inside the support, zero past it.
    pub fn survival_at(&self, lag: usize) -> f64 {
        self.survival.get(lag).copied().unwrap_or(0.0)
    }

    /// Derivatives for lags `1..=K`.
    pub fn derivatives(&self) -> &[f64] {
        &self.derivative
    }

    /// Survival values for lags `0..=K`.
    pub fn survivals(&self) -> &[f64] {
        &self.survival
    }

    /// `-dt * sum_j gamma'(t_j) = 1 - gamma(t_K)`.
    pub fn telescoped_mass(&self) -> f64 {
        -self.dt * self.derivative.iter().sum::<f64>()
    }
}

/// The nine stay-time distributions of the model, one per distributed
/// transition.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSet {
    pub exposed_to_carrier: TransitionDistribution,
    pub carrier_to_infected: TransitionDistribution,
    pub carrier_to_recovered: TransitionDistribution,
    pub infected_to_hospitalized: TransitionDistribution,
    pub infected_to_recovered: TransitionDistribution,
    pub hospitalized_to_icu: TransitionDistribution,
    pub hospitalized_to_recovered: TransitionDistribution,
    pub icu_to_dead: TransitionDistribution,
    pub icu_to_recovered: TransitionDistribution,
}

impl DistributionSet {
    /// Same distribution for every transition.
    pub fn uniform(dist: TransitionDistribution) -> Self {
        DistributionSet {
            exposed_to_carrier: dist,
            carrier_to_infected: dist,
            carrier_to_recovered: dist,
            infected_to_hospitalized: dist,
            infected_to_recovered: dist,
            hospitalized_to_icu: dist,
            hospitalized_to_recovered: dist,
            icu_to_dead: dist,
            icu_to_recovered: dist,
        }
    }

    /// `None` for `S -> E`, which has no stay-time distribution.
    pub fn get(&self, transition: TransitionId) -> Option<&TransitionDistribution> {
        use TransitionId::*;
        Some(match transition {
            SusceptibleToExposed => return None,
            ExposedToCarrier => &self.exposed_to_carrier,
            CarrierToInfected => &self.carrier_to_infected,
            CarrierToRecovered => &self.carrier_to_recovered,
            InfectedToHospitalized => &self.infected_to_hospitalized,
            InfectedToRecovered => &self.infected_to_recovered,
            HospitalizedToIntensiveCare => &self.hospitalized_to_icu,
            HospitalizedToRecovered => &self.hospitalized_to_recovered,
            IntensiveCareToDead => &self.icu_to_dead,
            IntensiveCareToRecovered => &self.icu_to_recovered,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (TransitionId, &TransitionDistribution)> {
        TransitionId::DISTRIBUTED
            .into_iter()
            .map(move |t| (t, self.get(t).expect("distributed transition")))
    }

    /// Longest truncated support over all nine distributions, in steps.
    pub fn max_support_steps(&self, dt: f64) -> usize {
        self.iter()
            .map(|(_, d)| d.support_steps(d.epsilon(), dt))
            .max()
            .unwrap_or(0)
    }
}

/// Rounds `t` to the nearest multiple of `dt` (ties away from zero) and
/// returns the number of steps.
pub fn round_to_grid(t: f64, dt: f64) -> i64 {
    if let Some(k) = grid_steps(t, dt) {
        return k;
    }
    (t / dt).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn survival_examples() {
        let exp2 = TransitionDistribution::exponential(2.0).unwrap();
        assert_eq!(exp2.survival(0.0), 1.0);
        assert_relative_eq!(exp2.survival(2.0), 0.36787944117144233, epsilon = 1e-15);
        let ln = TransitionDistribution::lognormal(4.5, 1.5).unwrap();
        assert_eq!(ln.survival(-1.0), 1.0);
        // scipy.stats.lognorm.sf(4.5, 0.32459284597450133, scale=exp(1.4513971389473608))
        assert_relative_eq!(ln.survival(4.5), 0.4355362156905487, epsilon = 1e-12);
    }

    #[test]
    fn kernel_first_entry_and_truncation() {
        let d = TransitionDistribution::exponential(1.0).unwrap();
        let k = d.kernel(0.5);
        assert_relative_eq!(k.derivative_at(1), -0.7869386805747332, epsilon = 1e-14);
        assert_eq!(k.derivative_at(k.len() + 1), 0.0);
        assert_eq!(k.derivative_at(k.len() + 1000), 0.0);
        assert!(k.derivatives().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn mean_stay_times() {
        assert_eq!(
            TransitionDistribution::exponential(1.4)
                .unwrap()
                .mean_stay_time(),
            1.4
        );
        assert_eq!(
            TransitionDistribution::lognormal(4.5, 1.5)
                .unwrap()
                .mean_stay_time(),
            4.5
        );
        let cos = TransitionDistribution::smoother_cosine(3.0).unwrap();
        assert_relative_eq!(cos.mean_stay_time(), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn exponential_mean_matches_trapezoid_on_truncated_support() {
        let d = TransitionDistribution::exponential(2.0).unwrap();
        let q = d.truncated_support(d.epsilon(), 1e-3);
        let n = (q / 1e-3).round() as usize;
        let h = q / n as f64;
        let inner: f64 = (1..n).map(|i| d.survival(i as f64 * h)).sum();
        let integral = h * (0.5 * (1.0 + d.survival(q)) + inner);
        // Trapezoid error h^2/12 * |f'| plus the truncated tail.
        assert!((integral - 2.0).abs() < 1e-6);
    }

    #[test]
    fn underlying_lognormal_parameters() {
        let (mu, sigma) = lognormal_underlying_params(4.5, 1.5).unwrap();
        // Moment-matching values; the resulting density integrates back to
        // mean 4.5 and std 1.5 (checked with scipy quadrature).
        assert_relative_eq!(mu, 1.4513971389473608, epsilon = 1e-14);
        assert_relative_eq!(sigma, 0.32459284597450133, epsilon = 1e-14);
        let (mu, sigma) = lognormal_underlying_params(1.1, 0.9).unwrap();
        assert_relative_eq!(mu, -0.16092839609790693, epsilon = 1e-14);
        assert_relative_eq!(sigma, 0.7158750951139896, epsilon = 1e-14);
        let (mu, sigma) = lognormal_underlying_params(3.0, 1e-9).unwrap();
        assert_relative_eq!(mu, 3.0f64.ln(), epsilon = 1e-12);
        assert!(sigma < 1e-8);
        assert!(lognormal_underlying_params(0.0, 1.0).is_err());
        assert!(lognormal_underlying_params(1.0, -1.0).is_err());
    }

    #[test]
    fn truncated_support_examples() {
        let d = TransitionDistribution::exponential(1.0).unwrap();
        let eps = (-10.0f64).exp();
        assert_relative_eq!(d.truncated_support(eps, 0.5), 10.0, epsilon = 1e-12);
        assert_relative_eq!(d.truncated_support(eps, 1.0), 10.0, epsilon = 1e-12);

        let dt = 0.1;
        let q = d.truncated_support(0.999, dt);
        let first = (1..)
            .map(|i| i as f64 * 1e-5)
            .find(|&t| d.survival(t) <= 0.999)
            .unwrap();
        assert!(q <= first + dt + 1e-12);

        let ln = TransitionDistribution::lognormal(4.5, 1.5).unwrap();
        let q = ln.truncated_support(1e-10, dt);
        assert!(ln.survival(q) <= 1e-10);
        assert!(ln.survival(q - dt) > 1e-10);
    }

    #[test]
    fn rounding_to_grid_ties_away_from_zero() {
        assert_eq!(round_to_grid(1.1, 0.5), 2);
        assert_eq!(round_to_grid(1.25, 0.5), 3);
        assert_eq!(round_to_grid(1.1, 0.01), 110);
        assert_eq!(round_to_grid(5.6, 0.01), 560);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(TransitionDistribution::exponential(0.0).is_err());
        assert!(TransitionDistribution::lognormal(1.0, 0.0).is_err());
        assert!(TransitionDistribution::smoother_cosine(-1.0).is_err());
        assert!(TransitionDistribution::exponential(1.0)
            .unwrap()
            .with_epsilon(0.0)
            .is_err());
    }
}
