//! Random forces: white Markovian kicks, the exponentially correlated
//! non-Markovian force, and the amplitude bookkeeping shared by the steppers.
//!
//! Conventions: a white force with amplitude `D` has
//! `<xi(t) xi(t')> = 2 D delta(t - t')`, so a sample held over a step `dt`
//! has variance `2 D / dt`. The colored force relaxes toward the white one at
//! rate `lambda`; its stationary correlation is `D lambda exp(-lambda |t|)`,
//! which integrates over the full time axis to `2 D`.

mod autocorr;
pub mod spectral;

pub use autocorr::{autocovariance, ou_autocorrelation_check, OuCheck, OuFit};
pub use spectral::{
    correlation_trace, fit_lorentzian, force_fluctuations, multi_peak_kernel, power_spectrum,
    CorrelationTrace, KernelPeak, SpectralEstimator, SpectralFit, Spectrum,
};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::model::System;

/// Draws one white-noise force for a step of length `dt`.
pub fn sample_white<R: Rng + ?Sized>(d_m: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(d_m >= 0.0) {
        return Err(invalid("d_m", format!("must be >= 0, got {d_m}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok((2.0 * d_m / dt).sqrt() * z)
}

/// Current value of the non-Markovian random force.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ColoredNoiseState {
    pub xi: f64,
}

impl ColoredNoiseState {
    /// Explicit Euler step of `d xi/dt = -lambda (xi - xi_white)`.
    pub fn ou_step(self, xi_white: f64, decay_rate: f64, dt: f64) -> Result<Self> {
        let a = decay_rate * dt;
        if !(a < 1.0) {
            return Err(Error::Stability {
                what: "decay_rate * dt",
                value: a,
                limit: 1.0,
            });
        }
        Ok(Self {
            xi: self.xi - a * (self.xi - xi_white),
        })
    }

    /// Draws from the stationary distribution of the discrete recursion.
    pub fn stationary<R: Rng + ?Sized>(
        d_m: f64,
        decay_rate: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let var = discrete_ou_variance(d_m, decay_rate, dt)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(Self { xi: var.sqrt() * z })
    }
}

/// Stationary variance of `xi <- (1 - a) xi + a w`, `Var(w) = 2 D / dt`, `a = lambda dt`.
///
/// Tends to `D lambda` as `a -> 0`.
pub fn discrete_ou_variance(d_m: f64, decay_rate: f64, dt: f64) -> Result<f64> {
    let a = decay_rate * dt;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Stability {
            what: "decay_rate * dt",
            value: a,
            limit: 1.0,
        });
    }
    Ok(a * a * (2.0 * d_m / dt) / (2.0 * a - a * a))
}

/// Where a noise amplitude comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmplitudeSource {
    /// Closed-form friction-model amplitude with decay rate `Gamma / hbar`.
    Analytic,
    /// Lorentzian fit to the power spectrum of the propagated force correlation.
    Fitted,
}

impl AmplitudeSource {
    pub fn name(self) -> &'static str {
        match self {
            AmplitudeSource::Analytic => "analytic",
            AmplitudeSource::Fitted => "fitted",
        }
    }
}

/// Markovian amplitude and kernel decay rate, with its provenance and age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAmplitude {
    pub d_m: f64,
    pub decay_rate: f64,
    pub source: AmplitudeSource,
    pub evaluated_at_x: f64,
    pub age_steps: u32,
}

impl NoiseAmplitude {
    pub fn is_stale(&self, update_stride: u32) -> bool {
        self.age_steps >= update_stride
    }

    pub fn aged(mut self) -> Self {
        self.age_steps += 1;
        self
    }
}

/// Evaluates [`NoiseAmplitude`]s for one system, analytically or through the
/// spectral route.
#[derive(Clone)]
pub struct AmplitudeEstimator {
    source: AmplitudeSource,
    spectral: Option<SpectralEstimator>,
}

impl AmplitudeEstimator {
    /// `dt` is the dynamics step; the fitted route samples its correlation
    /// trace no coarser than that.
    pub fn new(system: &System, source: AmplitudeSource, dt: f64) -> Result<Self> {
        let spectral = match source {
            AmplitudeSource::Analytic => None,
            AmplitudeSource::Fitted => Some(SpectralEstimator::for_system(system, dt)?),
        };
        Ok(Self { source, spectral })
    }

    pub fn source(&self) -> AmplitudeSource {
        self.source
    }

    pub fn evaluate(&self, system: &System, x: f64) -> Result<NoiseAmplitude> {
        let (d_m, decay_rate) = match &self.spectral {
            None => (system.noise_amplitude(x), system.electronic_rate()),
            Some(est) => match est.fit_at(system, x)? {
                Some(fit) => (fit.d_m, fit.decay_rate),
                // Nothing to fit: the level is pinned full or empty here.
                None => (0.0, system.electronic_rate()),
            },
        };
        Ok(NoiseAmplitude {
            d_m,
            decay_rate,
            source: self.source,
            evaluated_at_x: x,
            age_steps: 0,
        })
    }

    /// Returns `cached` aged by one step, or a fresh evaluation at `x` once it
    /// has been used `update_stride` times.
    pub fn refresh(
        &self,
        system: &System,
        cached: Option<NoiseAmplitude>,
        x: f64,
        update_stride: u32,
    ) -> Result<NoiseAmplitude> {
        match cached {
            Some(a) if !a.is_stale(update_stride) => Ok(a),
            _ => self.evaluate(system, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BathSpec, ModelParams};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_noise_zero_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_white(0.0, 1.0, &mut rng).unwrap(), 0.0);
        }
        assert!(sample_white(1.0, 0.0, &mut rng).is_err());
        assert!(sample_white(1.0, -1.0, &mut rng).is_err());
        assert!(sample_white(-1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn white_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d_m = 3.96e-5;
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_white(d_m, 1.0, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert_relative_eq!(var, 2.0 * d_m, max_relative = 0.01);
        assert!(mean.abs() < 4.0 * var.sqrt() / (n as f64).sqrt());
        let lag1 = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn ou_fixed_point_and_stability() {
        let s = ColoredNoiseState { xi: 0.7 };
        assert_eq!(s.ou_step(0.7, 0.3, 1.0).unwrap(), s);
        assert!(matches!(
            s.ou_step(0.0, 1.0, 1.0),
            Err(Error::Stability { .. })
        ));
        assert!(matches!(
            s.ou_step(0.0, 0.5, 3.0),
            Err(Error::Stability { .. })
        ));
    }

    #[test]
    fn discrete_variance_oracle() {
        let (d, lambda, dt) = (3.96e-5, 0.01, 1.0);
        let a = lambda * dt;
        // Sum of the geometric series a^2 (1 - a)^(2k) Var(w).
        let var_w = 2.0 * d / dt;
        let series: f64 = (0..20_000)
            .map(|k| a * a * (1.0f64 - a).powi(2 * k) * var_w)
            .sum();
        assert_relative_eq!(
            discrete_ou_variance(d, lambda, dt).unwrap(),
            series,
            max_relative = 1e-12
        );
        assert_relative_eq!(series, d * lambda, max_relative = 0.006);
    }

    #[test]
    fn ou_stationary_variance() {
        let (d, lambda, dt) = (3.96e-5, 0.01, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = ColoredNoiseState::stationary(d, lambda, dt, &mut rng).unwrap();
        let n = 10_000_000u64;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let w = sample_white(d, dt, &mut rng).unwrap();
            s = s.ou_step(w, lambda, dt).unwrap();
            sum += s.xi;
            sumsq += s.xi * s.xi;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert_relative_eq!(var, d * lambda, max_relative = 0.02);
    }

    #[test]
    fn fast_relaxation_tracks_white_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ColoredNoiseState::default();
        let (mut diff, mut norm) = (0.0, 0.0);
        for _ in 0..10_000 {
            let w = sample_white(1.0, 1.0, &mut rng).unwrap();
            s = s.ou_step(w, 0.999, 1.0).unwrap();
            diff += (s.xi - w).powi(2);
            norm += w * w;
        }
        assert!(diff / norm < 1e-5);
    }

    #[test]
    fn amplitude_stride_policy() {
        let sys = System::new(
            ModelParams::default(),
            BathSpec::single(0.01, 0.0, 0.05).unwrap(),
        )
        .unwrap();
        let est = AmplitudeEstimator::new(&sys, AmplitudeSource::Analytic, 1.0).unwrap();
        let mut amp = est.refresh(&sys, None, 0.0, 3).unwrap();
        assert_eq!(amp.evaluated_at_x, 0.0);
        assert_eq!(amp.decay_rate, 0.01);
        for step in 1..=7 {
            amp = est.refresh(&sys, Some(amp.aged()), step as f64, 3).unwrap();
            let expected_x = (step / 3 * 3) as f64;
            assert_eq!(amp.evaluated_at_x, expected_x);
            assert!(amp.age_steps < 3);
        }
    }

    #[test]
    fn fitted_amplitude_matches_analytic() {
        let sys = System::new(
            ModelParams::default(),
            BathSpec::single(0.01, 0.0, 0.05).unwrap(),
        )
        .unwrap();
        let analytic = AmplitudeEstimator::new(&sys, AmplitudeSource::Analytic, 1.0).unwrap();
        let fitted = AmplitudeEstimator::new(&sys, AmplitudeSource::Fitted, 1.0).unwrap();
        for x in [-60.0, -9.4, 0.0, 25.0] {
            let a = analytic.evaluate(&sys, x).unwrap();
            let f = fitted.evaluate(&sys, x).unwrap();
            assert_eq!(f.source, AmplitudeSource::Fitted);
            assert_relative_eq!(f.d_m, a.d_m, max_relative = 0.01);
            assert_relative_eq!(f.decay_rate, a.decay_rate, max_relative = 0.01);
        }
    }
}
