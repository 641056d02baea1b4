//! Numerical route to the random-force kernel.
//!
//! The force fluctuation on each surface is weighted by the steady-state
//! populations and propagated with the two-state master equation at frozen
//! `x`. The resulting correlation function is even-extended, Fourier
//! transformed, and fitted with a Lorentzian `2 D G^2 / (w^2 + G^2)` whose
//! parameters are the Markovian amplitude and the kernel decay rate.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::model::System;

/// Force fluctuations `(dF_0, dF_1)` on the neutral and charged surfaces
/// about the steady-state mean force.
pub fn force_fluctuations(system: &System, x: f64) -> (f64, f64) {
    let slope = system.params.level_slope();
    let f = system.occupation(x);
    (slope * f, -slope * (1.0 - f))
}

/// Symmetrized force autocorrelation `C(tau)` on a uniform grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub dtau: f64,
    pub values: Vec<f64>,
}

impl CorrelationTrace {
    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.dtau
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.tau(i)).collect()
    }
}

/// Propagates the population-weighted fluctuations `G_z = dF_z rho_z` under
/// the master-equation rates at frozen `x` and returns
/// `C(tau) = sum_z dF_z(0) G_z(tau)`.
pub fn correlation_trace(
    system: &System,
    x: f64,
    tau_max: f64,
    dtau: f64,
) -> Result<CorrelationTrace> {
    if !(dtau > 0.0) || !(tau_max >= dtau) {
        return Err(invalid(
            "tau grid",
            format!("need 0 < dtau <= tau_max, got dtau={dtau}, tau_max={tau_max}"),
        ));
    }
    let electronic_time = 1.0 / system.electronic_rate();
    if dtau > electronic_time / 10.0 {
        return Err(Error::UnderResolved {
            dt: dtau,
            limit: electronic_time / 10.0,
        });
    }
    let (k_up, k_down) = system.hop_rates(x);
    let f = system.occupation(x);
    let (df0, df1) = force_fluctuations(system, x);
    let deriv = |g: [f64; 2]| {
        let flux = k_up * g[0] - k_down * g[1];
        [-flux, flux]
    };
    let n = (tau_max / dtau).round() as usize + 1;
    let mut g = [df0 * (1.0 - f), df1 * f];
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(df0 * g[0] + df1 * g[1]);
        let k1 = deriv(g);
        let k2 = deriv([g[0] + 0.5 * dtau * k1[0], g[1] + 0.5 * dtau * k1[1]]);
        let k3 = deriv([g[0] + 0.5 * dtau * k2[0], g[1] + 0.5 * dtau * k2[1]]);
        let k4 = deriv([g[0] + dtau * k3[0], g[1] + dtau * k3[1]]);
        for i in 0..2 {
            g[i] += dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(CorrelationTrace { dtau, values })
}

/// One-sided power spectrum on `omega >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
}

/// Fourier transform of the even extension of `trace`, sampled up to Nyquist.
pub fn power_spectrum(trace: &CorrelationTrace) -> Spectrum {
    let len = padded_len(trace.values.len());
    let fft = FftPlanner::new().plan_fft_forward(len);
    spectrum_with(&*fft, trace)
}

fn padded_len(n: usize) -> usize {
    (2 * n).next_power_of_two().max(256)
}

fn spectrum_with(fft: &dyn Fft<f64>, trace: &CorrelationTrace) -> Spectrum {
    let len = fft.len();
    let n = trace.values.len().min(len / 2);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    buf[0].re = trace.values[0];
    for k in 1..n {
        buf[k].re = trace.values[k];
        buf[len - k].re = trace.values[k];
    }
    fft.process(&mut buf);
    let dw = 2.0 * std::f64::consts::PI / (len as f64 * trace.dtau);
    let half = len / 2 + 1;
    Spectrum {
        omega: (0..half).map(|j| j as f64 * dw).collect(),
        values: buf[..half].iter().map(|c| c.re * trace.dtau).collect(),
    }
}

/// Lorentzian parameters recovered from a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFit {
    /// Markovian amplitude `D'`.
    pub d_m: f64,
    /// Half width `G'` of the Lorentzian, a rate (1/time).
    pub decay_rate: f64,
    /// RMS of the log-domain residuals over the fitted window.
    pub residual: f64,
}

impl SpectralFit {
    /// Fitted width expressed as an energy, `hbar G'`.
    pub fn gamma(&self, hbar: f64) -> f64 {
        hbar * self.decay_rate
    }

    pub fn evaluate(&self, omega: f64) -> f64 {
        lorentzian(self.d_m, self.decay_rate, omega)
    }
}

fn lorentzian(d_m: f64, width: f64, omega: f64) -> f64 {
    2.0 * d_m * width * width / (omega * omega + width * width)
}

/// Points below this fraction of the peak are left out of the fit; there the
/// truncation ripple of the finite trace is comparable to the signal.
const FIT_FLOOR: f64 = 1e-2;

/// Damped Gauss-Newton fit of `ln K` to `ln(2 D G^2 / (w^2 + G^2))`.
///
/// The unknowns are written as `D = D0 a^2`, `G = G0 b^2` around the
/// initial guesses `D0 = K(0)/2` and `G0 = ` half width at half maximum.
pub fn fit_lorentzian(spectrum: &Spectrum) -> Result<SpectralFit> {
    let peak = *spectrum
        .values
        .first()
        .ok_or_else(|| invalid("spectrum", "empty"))?;
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(invalid("spectrum", format!("K(0) must be > 0, got {peak}")));
    }
    let mut pts = Vec::new();
    for (&w, &k) in spectrum.omega.iter().zip(&spectrum.values) {
        if k < FIT_FLOOR * peak || k <= 0.0 {
            break;
        }
        pts.push((w, k.ln()));
    }
    if pts.len() < 3 {
        return Err(invalid(
            "spectrum",
            format!(
                "only {} points above 1% of the peak; refine the frequency grid",
                pts.len()
            ),
        ));
    }

    let d0 = 0.5 * peak;
    let g0 = half_width(spectrum).unwrap_or(pts[pts.len() - 1].0);
    let resid = |a: f64, b: f64| -> f64 {
        let (d, g) = (d0 * a * a, g0 * b * b);
        pts.iter()
            .map(|&(w, y)| (y - lorentzian(d, g, w).ln()).powi(2))
            .sum()
    };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut cost = resid(a, b);
    let mut damping = 1e-3;
    for _ in 0..200 {
        let (d, g) = (d0 * a * a, g0 * b * b);
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(w, y) in &pts {
            let r = y - lorentzian(d, g, w).ln();
            // d(model)/da and d(model)/db of the log model.
            let ja = 2.0 / a;
            let jb = 4.0 / b - 4.0 * g * g / (b * (w * w + g * g));
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        jtj[1][0] = jtj[0][1];
        let mut improved = false;
        while damping < 1e12 {
            let m00 = jtj[0][0] * (1.0 + damping);
            let m11 = jtj[1][1] * (1.0 + damping);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            let da = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let db = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nb) = (a + da, b + db);
            let trial = resid(na, nb);
            if trial.is_finite() && trial <= cost && na != 0.0 && nb != 0.0 {
                let converged = (da.abs() + db.abs()) < 1e-14 * (a.abs() + b.abs());
                a = na;
                b = nb;
                cost = trial;
                damping = (damping * 0.3).max(1e-12);
                improved = !converged;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let residual = (cost / pts.len() as f64).sqrt();
    if residual > 0.1 {
        return Err(Error::NonLorentzian { residual });
    }
    Ok(SpectralFit {
        d_m: d0 * a * a,
        decay_rate: g0 * b * b,
        residual,
    })
}

/// Frequency where the spectrum first drops to half its zero-frequency value,
/// linearly interpolated.
fn half_width(spectrum: &Spectrum) -> Option<f64> {
    let half = 0.5 * spectrum.values[0];
    spectrum
        .values
        .windows(2)
        .zip(spectrum.omega.windows(2))
        .find(|(k, _)| k[1] <= half)
        .map(|(k, w)| w[0] + (w[1] - w[0]) * (k[0] - half) / (k[0] - k[1]))
}

/// One resonance of the multi-peak kernel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPeak {
    pub omega: f64,
    pub width: f64,
    pub d_m: f64,
}

/// Sum of damped-oscillator peaks `2 D G w_n^3 / ((w^2 - w_n^2)^2 + (w G)^2)`.
pub fn multi_peak_kernel(omega: f64, peaks: &[KernelPeak]) -> Result<f64> {
    let mut total = 0.0;
    for p in peaks {
        if !(p.omega > 0.0) || !(p.width > 0.0) {
            return Err(invalid(
                "peak",
                format!(
                    "omega and width must be > 0, got {} and {}",
                    p.omega, p.width
                ),
            ));
        }
        let detune = omega * omega - p.omega * p.omega;
        total +=
            2.0 * p.d_m * p.width * p.omega.powi(3) / (detune * detune + (omega * p.width).powi(2));
    }
    Ok(total)
}

/// Reusable fitted-amplitude pipeline for one system and time step.
///
/// The trace runs to `8 hbar/Gamma` sampled at `min(dt, (hbar/Gamma)/50)`.
#[derive(Clone)]
pub struct SpectralEstimator {
    tau_max: f64,
    dtau: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectralEstimator {
    pub fn for_system(system: &System, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        let electronic_time = 1.0 / system.electronic_rate();
        let dtau = dt.min(electronic_time / 50.0);
        let tau_max = 8.0 * electronic_time;
        let n = (tau_max / dtau).round() as usize + 1;
        let fft = FftPlanner::new().plan_fft_forward(padded_len(n));
        Ok(Self { tau_max, dtau, fft })
    }

    pub fn trace(&self, system: &System, x: f64) -> Result<CorrelationTrace> {
        correlation_trace(system, x, self.tau_max, self.dtau)
    }

    pub fn spectrum(&self, trace: &CorrelationTrace) -> Spectrum {
        spectrum_with(&*self.fft, trace)
    }

    /// Fitted amplitude at `x`, or `None` where the force does not fluctuate.
    pub fn fit_at(&self, system: &System, x: f64) -> Result<Option<SpectralFit>> {
        let trace = self.trace(system, x)?;
        if !(trace.values[0] > 0.0) {
            return Ok(None);
        }
        fit_lorentzian(&self.spectrum(&trace)).map(Some)
    }
}
