//! Trajectory ensembles: thermal initial conditions, parallel propagation,
//! and reduction to time series of observables with standard errors.
//!
//! Trajectory `i` draws from a ChaCha8 stream selected by `(seed, i)`, and
//! trajectories are reduced in fixed-size blocks merged in index order, so
//! the output does not depend on how many worker threads run.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{current_contribution, kinetic_energy, Stepper, TrajectoryState};
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;

/// Trajectories per reduction block.
const BLOCK: u64 = 32;

/// Upper bound on frames produced by [`EnsembleConfig::default_record_stride`].
pub const MAX_FRAMES: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: u64,
    pub t_final: f64,
    /// Steps between recorded frames.
    pub record_stride: u64,
    pub seed: u64,
    /// Temperature (energy) of the initial Boltzmann distribution.
    pub init_temperature: f64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(invalid("n_traj", "must be >= 1"));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(invalid(
                "t_final",
                format!("must be > 0, got {}", self.t_final),
            ));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        if !(self.init_temperature > 0.0) {
            return Err(invalid(
                "init_temperature",
                format!("must be > 0, got {}", self.init_temperature),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self, dt: f64) -> u64 {
        (self.t_final / dt).round() as u64
    }

    /// Smallest stride keeping the run at or below [`MAX_FRAMES`] frames.
    pub fn default_record_stride(t_final: f64, dt: f64) -> u64 {
        let steps = (t_final / dt).round() as u64;
        steps.div_ceil(MAX_FRAMES).max(1)
    }
}

/// Ensemble averages at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableFrame {
    pub t: f64,
    pub mean_ke: f64,
    pub sem_ke: f64,
    pub mean_pop: f64,
    pub sem_pop: f64,
    /// Current into the first lead; present for two-lead baths.
    pub mean_current: Option<f64>,
    pub sem_current: Option<f64>,
    /// `p^2/2m + U0(x)`, the nuclear energy on the neutral surface.
    pub mean_nuclear_energy: f64,
}

/// Thermal draw of `(x, p)` at `init_temperature` plus the method's
/// equilibrium electronic state.
pub fn sample_initial<R: Rng + ?Sized>(
    stepper: &Stepper,
    init_temperature: f64,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let (x, p) = thermal_phase_point(&stepper.system.params, init_temperature, rng);
    stepper.initial_state(x, p, rng)
}

fn thermal_phase_point<R: Rng + ?Sized>(
    params: &ModelParams,
    temperature: f64,
    rng: &mut R,
) -> (f64, f64) {
    let sx = (temperature / (params.mass * params.omega * params.omega)).sqrt();
    let sp = (params.mass * temperature).sqrt();
    let zx: f64 = rng.sample(StandardNormal);
    let zp: f64 = rng.sample(StandardNormal);
    (sx * zx, sp * zp)
}

/// Random stream for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const N_OBS: usize = 4;

/// Running sums and sums of squares of the recorded observables.
#[derive(Clone)]
struct Accumulator {
    n: u64,
    sums: Vec<[f64; N_OBS]>,
    squares: Vec<[f64; N_OBS]>,
}

impl Accumulator {
    fn new(frames: usize) -> Self {
        Self {
            n: 0,
            sums: vec![[0.0; N_OBS]; frames],
            squares: vec![[0.0; N_OBS]; frames],
        }
    }

    fn add(&mut self, frame: usize, obs: [f64; N_OBS]) {
        for (k, v) in obs.into_iter().enumerate() {
            self.sums[frame][k] += v;
            self.squares[frame][k] += v * v;
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for k in 0..N_OBS {
                a[k] += b[k];
            }
        }
        for (a, b) in self.squares.iter_mut().zip(&other.squares) {
            for k in 0..N_OBS {
                a[k] += b[k];
            }
        }
    }
}

fn mean_sem(sum: f64, square: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((square - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn observe(stepper: &Stepper, state: &TrajectoryState, with_current: bool) -> Result<[f64; N_OBS]> {
    let params = &stepper.system.params;
    let ke = kinetic_energy(state, params.mass);
    let pop = stepper.population(state)?;
    let current = if with_current {
        current_contribution(state, &stepper.system, stepper.method())?
    } else {
        0.0
    };
    Ok([ke, pop, current, ke + params.neutral_potential(state.x)])
}

fn run_trajectory(
    stepper: &Stepper,
    cfg: &EnsembleConfig,
    index: u64,
    n_steps: u64,
    with_current: bool,
    acc: &mut Accumulator,
) -> Result<()> {
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut state = sample_initial(stepper, cfg.init_temperature, &mut rng)?;
    acc.add(0, observe(stepper, &state, with_current)?);
    for step in 1..=n_steps {
        state = stepper.step(&state, &mut rng)?;
        if step % cfg.record_stride == 0 {
            acc.add(
                (step / cfg.record_stride) as usize,
                observe(stepper, &state, with_current)?,
            );
        }
    }
    acc.n += 1;
    Ok(())
}

/// Runs `cfg.n_traj` trajectories and returns one frame every
/// `record_stride` steps, starting at `t = 0`.
///
/// The current columns are filled when the bath has two leads.
pub fn run_ensemble(stepper: &Stepper, cfg: &EnsembleConfig) -> Result<Vec<ObservableFrame>> {
    cfg.validate()?;
    let dt = stepper.cfg.dt;
    let n_steps = cfg.n_steps(dt);
    let n_frames = (n_steps / cfg.record_stride + 1) as usize;
    let with_current = stepper.system.bath.leads().len() == 2;
    let n_blocks = cfg.n_traj.div_ceil(BLOCK);

    let blocks: Vec<Result<Accumulator>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accumulator::new(n_frames);
            let end = ((b + 1) * BLOCK).min(cfg.n_traj);
            for index in b * BLOCK..end {
                run_trajectory(stepper, cfg, index, n_steps, with_current, &mut acc).map_err(
                    |e| Error::Trajectory {
                        index,
                        source: Box::new(e),
                    },
                )?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = Accumulator::new(n_frames);
    for block in blocks {
        total.merge(&block?);
    }

    Ok((0..n_frames)
        .map(|i| {
            let (s, q) = (total.sums[i], total.squares[i]);
            let (mean_ke, sem_ke) = mean_sem(s[0], q[0], total.n);
            let (mean_pop, sem_pop) = mean_sem(s[1], q[1], total.n);
            let (mean_current, sem_current) = mean_sem(s[2], q[2], total.n);
            ObservableFrame {
                t: (i as u64 * cfg.record_stride) as f64 * dt,
                mean_ke,
                sem_ke,
                mean_pop,
                sem_pop,
                mean_current: with_current.then_some(mean_current),
                sem_current: with_current.then_some(sem_current),
                mean_nuclear_energy: s[3] / total.n as f64,
            }
        })
        .collect())
}

/// Exponential relaxation `KE(t) = KE_inf + (KE_0 - KE_inf) exp(-t / tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationFit {
    pub tau: f64,
    pub plateau: f64,
    pub initial: f64,
}

/// Least-squares relaxation fit of the mean kinetic energy.
///
/// For each trial `tau` the plateau and amplitude follow from linear least
/// squares; `tau` itself is found by a log-spaced scan refined with golden
/// section search. Runs whose energy grows past its start or fits a
/// growing amplitude are rejected.
pub fn relaxation_time(frames: &[ObservableFrame]) -> Result<RelaxationFit> {
    if frames.len() < 4 {
        return Err(invalid("frames", "need at least 4 frames"));
    }
    let t0 = frames[0].t;
    let ts: Vec<f64> = frames.iter().map(|f| f.t - t0).collect();
    let ys: Vec<f64> = frames.iter().map(|f| f.mean_ke).collect();
    let start = ys[0];
    let peak = ys.iter().cloned().fold(f64::MIN, f64::max);
    if peak > start * 1.1 {
        return Err(Error::NonDecaying(format!(
            "kinetic energy rises from {start:.4} to {peak:.4}"
        )));
    }

    let solve = |tau: f64| -> (f64, f64, f64) {
        // y = c + a e^{-t/tau}
        let n = ts.len() as f64;
        let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in ts.iter().zip(&ys) {
            let e = (-t / tau).exp();
            se += e;
            see += e * e;
            sy += y;
            sey += e * y;
        }
        let det = n * see - se * se;
        let a = (n * sey - se * sy) / det;
        let c = (sy - a * se) / n;
        let sse = ts
            .iter()
            .zip(&ys)
            .map(|(&t, &y)| (y - c - a * (-t / tau).exp()).powi(2))
            .sum();
        (sse, c, a)
    };

    let span = ts[ts.len() - 1];
    let dt_min = ts[1];
    let (lo, hi) = ((0.1 * dt_min).ln(), (100.0 * span).ln());
    let grid = 400;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=grid {
        let u = lo + (hi - lo) * i as f64 / grid as f64;
        let sse = solve(u.exp()).0;
        if sse < best.0 {
            best = (sse, u);
        }
    }
    let step = (hi - lo) / grid as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if solve(c.exp()).0 < solve(d.exp()).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (_, plateau, amplitude) = solve(tau);
    if amplitude <= 0.0 {
        return Err(Error::NonDecaying(format!(
            "fitted amplitude {amplitude:.3e} is not positive"
        )));
    }
    Ok(RelaxationFit {
        tau,
        plateau,
        initial: plateau + amplitude,
    })
}
