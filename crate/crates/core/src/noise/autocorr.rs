use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// Sample autocovariance for lags `0..=max_lag`, mean removed, each lag
/// normalized by its own number of pairs.
///
/// Long series are processed in blocks with FFT cross-correlation so memory
/// stays bounded by a few block lengths.
pub fn autocovariance(samples: &[f64], max_lag: usize) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let max_lag = max_lag.min(n - 1);
    let mean = samples.iter().sum::<f64>() / n as f64;
    let block = (8 * (max_lag + 1)).next_power_of_two().max(1 << 12);
    let len = (block + max_lag).next_power_of_two() * 2;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut acc = vec![0.0; max_lag + 1];
    let mut a = vec![Complex::new(0.0, 0.0); len];
    let mut b = vec![Complex::new(0.0, 0.0); len];
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let tail = (end + max_lag).min(n);
        a.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        b.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, &v) in samples[start..end].iter().enumerate() {
            a[i].re = v - mean;
        }
        for (i, &v) in samples[start..tail].iter().enumerate() {
            b[i].re = v - mean;
        }
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x = x.conj() * y;
        }
        inv.process(&mut a);
        for (k, s) in acc.iter_mut().enumerate() {
            *s += a[k].re / len as f64;
        }
        start = end;
    }
    acc.iter()
        .enumerate()
        .map(|(k, s)| s / (n - k) as f64)
        .collect()
}

/// Exponential fit of a colored-noise autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuFit {
    /// Fitted decay rate (1/time).
    pub rate: f64,
    /// Fitted zero-lag value of the exponential.
    pub zero_lag: f64,
    /// `dt * sum_k c_k` over all lags out to six correlation times on both sides.
    pub integrated_power: f64,
    /// The explicit update was run with `decay_rate * dt >= 0.5`.
    pub near_stability_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuCheck {
    /// Zero amplitude: the trace is identically zero and nothing was fitted.
    Skipped,
    Fitted(OuFit),
}

/// Checks that `samples` of the colored force, spaced by `dt`, decay
/// exponentially at a single rate.
///
/// The log of the autocovariance is regressed on lag over the first two
/// expected correlation times. The trace must be stationary: the means of
/// its two halves may not differ by more than five standard errors.
pub fn ou_autocorrelation_check(
    samples: &[f64],
    dt: f64,
    decay_rate: f64,
    d_m: f64,
) -> Result<OuCheck> {
    if !(dt > 0.0) || !(decay_rate > 0.0) {
        return Err(invalid("dt, decay_rate", "must be > 0"));
    }
    if d_m == 0.0 {
        if samples.iter().any(|&v| v != 0.0) {
            return Err(invalid("samples", "non-zero force with zero amplitude"));
        }
        return Ok(OuCheck::Skipped);
    }
    let a = decay_rate * dt;
    if a >= 1.0 {
        return Err(Error::Stability {
            what: "decay_rate * dt",
            value: a,
            limit: 1.0,
        });
    }
    let corr_steps = 1.0 / a;
    let min_len = (100.0 * corr_steps).max(1e5) as usize;
    if samples.len() < min_len {
        return Err(invalid(
            "samples",
            format!("need at least {min_len} samples, got {}", samples.len()),
        ));
    }

    let n = samples.len();
    let half = n / 2;
    let mean_of = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m1, m2) = (mean_of(&samples[..half]), mean_of(&samples[half..]));
    let mean = mean_of(samples);
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    // Integrated autocorrelation time of an AR(1) with coefficient 1 - a, in steps.
    let phi = 1.0 - a;
    let tau_int = (1.0 + phi) / (1.0 - phi);
    let bound = 5.0 * (2.0 * var * tau_int / half as f64).sqrt();
    let drift = (m1 - m2).abs();
    if drift > bound {
        return Err(Error::NonStationary { drift, bound });
    }

    let power_lags = (6.0 * corr_steps).ceil() as usize;
    let acov = autocovariance(samples, power_lags);
    let fit_lags = (2.0 * corr_steps).ceil().max(2.0) as usize;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &c) in acov.iter().enumerate().take(fit_lags + 1) {
        if c <= 0.0 {
            break;
        }
        let t = k as f64 * dt;
        let y = c.ln();
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        cnt += 1.0;
    }
    if cnt < 2.0 {
        return Err(invalid(
            "samples",
            "autocovariance is not positive at short lags",
        ));
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let intercept = (sy - slope * sx) / cnt;
    let integrated_power = dt * (acov[0] + 2.0 * acov[1..].iter().sum::<f64>());
    Ok(OuCheck::Fitted(OuFit {
        rate: -slope,
        zero_lag: intercept.exp(),
        integrated_power,
        near_stability_boundary: a >= 0.5,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{discrete_ou_variance, sample_white, ColoredNoiseState};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ou_series(d_m: f64, rate: f64, dt: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ColoredNoiseState::stationary(d_m, rate, dt, &mut rng).unwrap();
        (0..n)
            .map(|_| {
                let w = sample_white(d_m, dt, &mut rng).unwrap();
                s = s.ou_step(w, rate, dt).unwrap();
                s.xi
            })
            .collect()
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let xs = ou_series(1.0, 0.05, 1.0, 20_000, 5);
        let acov = autocovariance(&xs, 40);
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        for k in [0, 1, 7, 40] {
            let direct = (0..n - k)
                .map(|i| (xs[i] - mean) * (xs[i + k] - mean))
                .sum::<f64>()
                / (n - k) as f64;
            assert_relative_eq!(acov[k], direct, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn generate_then_fit_round_trip() {
        let (d_m, rate, dt) = (3.96e-5, 0.01, 1.0);
        let xs = ou_series(d_m, rate, dt, 2_000_000, 21);
        let OuCheck::Fitted(fit) = ou_autocorrelation_check(&xs, dt, rate, d_m).unwrap() else {
            panic!("expected a fit");
        };
        assert!((0.009..=0.011).contains(&fit.rate), "{fit:?}");
        let var = discrete_ou_variance(d_m, rate, dt).unwrap();
        assert_relative_eq!(fit.zero_lag, var, max_relative = 0.1);
        assert!(!fit.near_stability_boundary);
    }

    #[test]
    fn flags_boundary_and_zero_amplitude() {
        let xs = ou_series(1.0, 0.9, 1.0, 200_000, 2);
        let OuCheck::Fitted(fit) = ou_autocorrelation_check(&xs, 1.0, 0.9, 1.0).unwrap() else {
            panic!("expected a fit");
        };
        assert!(fit.near_stability_boundary);
        assert_eq!(
            ou_autocorrelation_check(&vec![0.0; 200_000], 1.0, 0.01, 0.0).unwrap(),
            OuCheck::Skipped
        );
    }

    #[test]
    fn detects_drift() {
        let mut xs = ou_series(1.0, 0.05, 1.0, 200_000, 4);
        let sd = (discrete_ou_variance(1.0, 0.05, 1.0).unwrap()).sqrt();
        let n = xs.len();
        for (i, v) in xs.iter_mut().enumerate() {
            *v += sd * i as f64 / n as f64;
        }
        assert!(matches!(
            ou_autocorrelation_check(&xs, 1.0, 0.05, 1.0),
            Err(Error::NonStationary { .. })
        ));
    }

    #[test]
    fn rejects_short_traces() {
        assert!(ou_autocorrelation_check(&[1.0; 100], 1.0, 0.01, 1.0).is_err());
    }
}
