//! Per-trajectory time steppers.
//!
//! Deterministic drift is advanced with classical RK4; random forces enter as
//! a single additive momentum kick `xi * dt` after the drift step.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{SurfaceIndex, System};
use crate::noise::{
    sample_white, AmplitudeEstimator, AmplitudeSource, ColoredNoiseState, NoiseAmplitude,
};

/// The five dynamics methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Plain Ehrenfest dynamics.
    Ed,
    /// Electronic-friction Langevin dynamics.
    EfLd,
    /// Ehrenfest dynamics with a Markovian random force.
    Med,
    /// Ehrenfest dynamics with a non-Markovian random force.
    NmEd,
    /// Master-equation surface hopping.
    Sh,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ed,
        Method::EfLd,
        Method::Med,
        Method::NmEd,
        Method::Sh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ed => "ed",
            Method::EfLd => "efld",
            Method::Med => "med",
            Method::NmEd => "nmed",
            Method::Sh => "sh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
    }

    fn electronic_kind(self) -> &'static str {
        match self {
            Method::Ed | Method::Med | Method::NmEd => "population",
            Method::EfLd => "adiabatic",
            Method::Sh => "surface",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub dt: f64,
    pub amplitude_source: AmplitudeSource,
    /// Steps between re-evaluations of the noise amplitude.
    pub update_stride: u32,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            dt: 1.0,
            amplitude_source: AmplitudeSource::Analytic,
            update_stride: 1,
        }
    }

    pub fn validate(&self, system: &System) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.update_stride == 0 {
            return Err(invalid("update_stride", "must be >= 1"));
        }
        let a = system.electronic_rate() * self.dt;
        let limit = match self.method {
            Method::Sh => Some(0.1),
            Method::NmEd => Some(1.0),
            _ => None,
        };
        match limit {
            Some(limit) if a >= limit => Err(Error::Stability {
                what: "Gamma * dt / hbar",
                value: a,
                limit,
            }),
            _ => Ok(()),
        }
    }
}

/// Electronic degree of freedom carried by a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Electronic {
    /// Occupation of the charged state (Ehrenfest family).
    Population(f64),
    /// Electrons slaved to the nuclei (friction dynamics).
    Adiabatic,
    /// Active surface (surface hopping).
    Surface(SurfaceIndex),
}

impl Electronic {
    fn kind(&self) -> &'static str {
        match self {
            Electronic::Population(_) => "population",
            Electronic::Adiabatic => "adiabatic",
            Electronic::Surface(_) => "surface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
    pub electronic: Electronic,
    pub noise: ColoredNoiseState,
    /// Cached amplitude for the stochastic Ehrenfest methods.
    pub amplitude: Option<NoiseAmplitude>,
}

impl TrajectoryState {
    pub fn new(x: f64, p: f64, electronic: Electronic) -> Self {
        Self {
            x,
            p,
            t: 0.0,
            electronic,
            noise: ColoredNoiseState::default(),
            amplitude: None,
        }
    }
}

pub fn kinetic_energy(state: &TrajectoryState, mass: f64) -> f64 {
    state.p * state.p / (2.0 * mass)
}

/// Impurity occupation as seen by `method`: `rho_1`, `f(h(x))`, or the
/// surface indicator.
pub fn population(state: &TrajectoryState, method: Method, system: &System) -> Result<f64> {
    match (method, state.electronic) {
        (Method::Ed | Method::Med | Method::NmEd, Electronic::Population(rho)) => Ok(rho),
        (Method::EfLd, Electronic::Adiabatic) => Ok(system.occupation(state.x)),
        (Method::Sh, Electronic::Surface(s)) => Ok(s.occupation()),
        (m, e) => Err(mismatch(m, e)),
    }
}

/// Per-trajectory estimator of the current into the first lead,
/// `(Gamma_L/hbar) [f_L (1 - n) - (1 - f_L) n]`.
pub fn current_contribution(
    state: &TrajectoryState,
    system: &System,
    method: Method,
) -> Result<f64> {
    if system.bath.leads().len() < 2 {
        return Err(Error::SingleLead(system.bath.leads().len()));
    }
    let n = population(state, method, system)?;
    let left = system.bath.left();
    let f_left = crate::model::fermi(system.params.level(state.x), left.mu, system.bath.kt());
    Ok(left.gamma / system.params.hbar * (f_left * (1.0 - n) - (1.0 - f_left) * n))
}

fn mismatch(method: Method, found: Electronic) -> Error {
    Error::MethodMismatch {
        method: method.name(),
        expected: method.electronic_kind(),
        found: found.kind(),
    }
}

fn rk4<const N: usize>(y: [f64; N], dt: f64, deriv: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let shift = |y: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = deriv(&y);
    let k2 = deriv(&shift(&y, &k1, 0.5 * dt));
    let k3 = deriv(&shift(&y, &k2, 0.5 * dt));
    let k4 = deriv(&shift(&y, &k3, dt));
    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Mean-field step of `(x, p, rho_1)`: population-weighted force and
/// master-equation relaxation of `rho_1` toward `f(h(x))`.
fn ehrenfest_drift(
    state: &TrajectoryState,
    system: &System,
    method: Method,
    dt: f64,
) -> Result<TrajectoryState> {
    let Electronic::Population(rho) = state.electronic else {
        return Err(mismatch(method, state.electronic));
    };
    let p = &system.params;
    let slope = p.level_slope();
    let rate = system.electronic_rate();
    let [x, mom, rho] = rk4([state.x, state.p, rho], dt, |y| {
        [
            y[1] / p.mass,
            -(p.neutral_potential_gradient(y[0]) + y[2] * slope),
            rate * (system.occupation(y[0]) - y[2]),
        ]
    });
    debug_assert!((0.0..=1.0).contains(&rho), "population left [0, 1]: {rho}");
    Ok(TrajectoryState {
        x,
        p: mom,
        t: state.t + dt,
        electronic: Electronic::Population(rho),
        ..*state
    })
}

pub fn step_ed(
    state: &TrajectoryState,
    system: &System,
    cfg: &MethodConfig,
) -> Result<TrajectoryState> {
    ehrenfest_drift(state, system, Method::Ed, cfg.dt)
}

pub fn step_efld<R: Rng + ?Sized>(
    state: &TrajectoryState,
    system: &System,
    cfg: &MethodConfig,
    rng: &mut R,
) -> Result<TrajectoryState> {
    if state.electronic != Electronic::Adiabatic {
        return Err(mismatch(Method::EfLd, state.electronic));
    }
    let m = system.params.mass;
    let [x, p] = rk4([state.x, state.p], cfg.dt, |y| {
        let (force, friction) = system.mean_force_and_friction(y[0]);
        [y[1] / m, force - friction * y[1] / m]
    });
    let xi = sample_white(system.noise_amplitude(state.x), cfg.dt, rng)?;
    Ok(TrajectoryState {
        x,
        p: p + xi * cfg.dt,
        t: state.t + cfg.dt,
        ..*state
    })
}

pub fn step_med<R: Rng + ?Sized>(
    state: &TrajectoryState,
    system: &System,
    cfg: &MethodConfig,
    estimator: &AmplitudeEstimator,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let amp = estimator.refresh(system, state.amplitude, state.x, cfg.update_stride)?;
    let mut next = ehrenfest_drift(state, system, Method::Med, cfg.dt)?;
    let xi = sample_white(amp.d_m, cfg.dt, rng)?;
    next.p += xi * cfg.dt;
    next.amplitude = Some(amp.aged());
    Ok(next)
}

pub fn step_nmed<R: Rng + ?Sized>(
    state: &TrajectoryState,
    system: &System,
    cfg: &MethodConfig,
    estimator: &AmplitudeEstimator,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let amp = estimator.refresh(system, state.amplitude, state.x, cfg.update_stride)?;
    let mut next = ehrenfest_drift(state, system, Method::NmEd, cfg.dt)?;
    let xi_white = sample_white(amp.d_m, cfg.dt, rng)?;
    next.noise = state.noise.ou_step(xi_white, amp.decay_rate, cfg.dt)?;
    next.p += next.noise.xi * cfg.dt;
    next.amplitude = Some(amp.aged());
    Ok(next)
}

pub fn step_sh<R: Rng + ?Sized>(
    state: &TrajectoryState,
    system: &System,
    cfg: &MethodConfig,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let Electronic::Surface(surface) = state.electronic else {
        return Err(mismatch(Method::Sh, state.electronic));
    };
    let p = &system.params;
    let [x, mom] = rk4([state.x, state.p], cfg.dt, |y| {
        [y[1] / p.mass, -p.potential_gradient(surface, y[0])]
    });
    let (up, down) = system.hop_rates(x);
    let rate = match surface {
        SurfaceIndex::Neutral => up,
        SurfaceIndex::Charged => down,
    };
    let u: f64 = rng.random();
    let surface = if u < rate * cfg.dt {
        surface.flipped()
    } else {
        surface
    };
    Ok(TrajectoryState {
        x,
        p: mom,
        t: state.t + cfg.dt,
        electronic: Electronic::Surface(surface),
        ..*state
    })
}

/// A method bound to a system, ready to initialize and advance trajectories.
#[derive(Clone)]
pub struct Stepper {
    pub system: System,
    pub cfg: MethodConfig,
    estimator: AmplitudeEstimator,
}

impl Stepper {
    pub fn new(system: System, cfg: MethodConfig) -> Result<Self> {
        cfg.validate(&system)?;
        let estimator = AmplitudeEstimator::new(&system, cfg.amplitude_source, cfg.dt)?;
        Ok(Self {
            system,
            cfg,
            estimator,
        })
    }

    pub fn method(&self) -> Method {
        self.cfg.method
    }

    /// State at `(x, p)` with the electronic variable at instantaneous
    /// equilibrium: `rho_1 = f(h(x))`, or the charged surface drawn with that
    /// probability; the colored force starts from its stationary law.
    pub fn initial_state<R: Rng + ?Sized>(
        &self,
        x: f64,
        p: f64,
        rng: &mut R,
    ) -> Result<TrajectoryState> {
        let f = self.system.occupation(x);
        let electronic = match self.cfg.method {
            Method::Ed | Method::Med | Method::NmEd => Electronic::Population(f),
            Method::EfLd => Electronic::Adiabatic,
            Method::Sh => {
                let u: f64 = rng.random();
                Electronic::Surface(if u < f {
                    SurfaceIndex::Charged
                } else {
                    SurfaceIndex::Neutral
                })
            }
        };
        let mut state = TrajectoryState::new(x, p, electronic);
        if self.cfg.method == Method::NmEd {
            let amp = self.estimator.evaluate(&self.system, x)?;
            state.noise = ColoredNoiseState::stationary(amp.d_m, amp.decay_rate, self.cfg.dt, rng)?;
            state.amplitude = Some(amp);
        }
        Ok(state)
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &TrajectoryState,
        rng: &mut R,
    ) -> Result<TrajectoryState> {
        let (sys, cfg) = (&self.system, &self.cfg);
        match cfg.method {
            Method::Ed => step_ed(state, sys, cfg),
            Method::EfLd => step_efld(state, sys, cfg, rng),
            Method::Med => step_med(state, sys, cfg, &self.estimator, rng),
            Method::NmEd => step_nmed(state, sys, cfg, &self.estimator, rng),
            Method::Sh => step_sh(state, sys, cfg, rng),
        }
    }

    pub fn population(&self, state: &TrajectoryState) -> Result<f64> {
        population(state, self.cfg.method, &self.system)
    }
}
