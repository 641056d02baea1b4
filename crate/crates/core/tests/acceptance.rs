//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! fails. Desk scale is 5000 trajectories with dt = 1 and the default model
//! (`hbar w = 0.003`, `kT = 0.05`, `g = 0.02`, `E_d = g^2 / 2 hbar w`).
//!
//! Run alone with `cargo test -p esigma-core --test acceptance`; append
//! `-- 3 10` to run only criteria 3 and 10.

use std::process::ExitCode;
use std::time::Instant;

use esigma_core::dynamics::{Electronic, Method, MethodConfig, Stepper};
use esigma_core::ensemble::{run_ensemble, trajectory_rng, EnsembleConfig, ObservableFrame};
use esigma_core::model::{BathSpec, ModelParams, SurfaceIndex, System};
use esigma_core::noise::{ou_autocorrelation_check, OuCheck, SpectralEstimator};
use esigma_core::table::{frames_csv, Observable};
use rayon::prelude::*;

const N_TRAJ: u64 = 5000;
const KT: f64 = 0.05;
const HALF_KT: f64 = 0.5 * KT;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn single(gamma: f64) -> System {
    System::new(
        ModelParams::default(),
        BathSpec::single(gamma, 0.0, KT).unwrap(),
    )
    .unwrap()
}

fn biased(gamma: f64, mu: f64) -> System {
    System::new(
        ModelParams::default(),
        BathSpec::symmetric_pair(gamma, mu, -mu, KT).unwrap(),
    )
    .unwrap()
}

fn ensemble(system: &System, method: Method, stride: u32, t_final: f64) -> Vec<ObservableFrame> {
    let cfg = MethodConfig {
        update_stride: stride,
        ..MethodConfig::new(method)
    };
    let stepper = Stepper::new(system.clone(), cfg).unwrap();
    let ens = EnsembleConfig {
        n_traj: N_TRAJ,
        t_final,
        record_stride: EnsembleConfig::default_record_stride(t_final, 1.0),
        seed: SEED,
        init_temperature: 5.0 * KT,
    };
    run_ensemble(&stepper, &ens).unwrap()
}

/// Mean of `value` over frames with `t >= from`.
fn late_mean(
    frames: &[ObservableFrame],
    from: f64,
    value: impl Fn(&ObservableFrame) -> f64,
) -> f64 {
    let late: Vec<f64> = frames.iter().filter(|f| f.t >= from).map(value).collect();
    late.iter().sum::<f64>() / late.len() as f64
}

fn rms_diff(
    a: &[ObservableFrame],
    b: &[ObservableFrame],
    value: impl Fn(&ObservableFrame) -> f64,
) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (value(x) - value(y)).powi(2))
        .sum();
    (sum / a.len() as f64).sqrt()
}

/// Infinite-mass copy with the same level slope, so `x` stays put.
fn frozen(mut sys: System) -> System {
    sys.params.mass = 1e30;
    sys.params.coupling /= 1e15;
    sys
}

fn fluctuation_dissipation() -> Outcome {
    let mut worst: f64 = 0.0;
    for gamma in [0.001, 0.01] {
        let sys = single(gamma);
        for i in 0..200 {
            let x = -300.0 + 600.0 * i as f64 / 199.0;
            let d = sys.noise_amplitude(x);
            worst = worst.max((d - sys.friction(x) * KT).abs() / d.max(1e-30));
        }
    }
    outcome(
        worst < 1e-10,
        format!("max relative |D_M - gamma kT| = {worst:.2e} (bound 1e-10)"),
    )
}

fn detailed_balance(method: Method, tol: f64) -> Outcome {
    let frames = ensemble(&single(0.01), method, 1, 30_000.0);
    let ke = late_mean(&frames, 20_000.0, |f| f.mean_ke);
    let rel = (ke - HALF_KT).abs() / HALF_KT;
    outcome(
        rel < tol,
        format!(
            "{method} Gamma=0.01 <KE>(t>=2e4) = {ke:.5}, off kT/2 by {:.1}% (bound {:.0}%)",
            100.0 * rel,
            100.0 * tol
        ),
    )
}

fn ed_cools() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [0.001, 0.01] {
        let frames = ensemble(&single(gamma), Method::Ed, 1, 30_000.0);
        let last = frames.last().unwrap().mean_ke;
        pass &= last < 0.005;
        parts.push(format!("Gamma={gamma}: {last:.5}"));
    }
    outcome(
        pass,
        format!("ED final <KE> {} (bound 0.005)", parts.join(", ")),
    )
}

fn med_heats() -> Outcome {
    let frames = ensemble(&single(0.0001), Method::Med, 1, 20_000.0);
    let peak = frames.iter().map(|f| f.mean_ke).fold(f64::MIN, f64::max);
    outcome(
        peak > 0.125,
        format!(
            "M-ED Gamma=0.0001 peak <KE> = {peak:.4}, start {:.4} (must exceed 0.125)",
            frames[0].mean_ke
        ),
    )
}

fn weak_coupling() -> Outcome {
    let sys = single(0.0001);
    let nm = ensemble(&sys, Method::NmEd, 1, 100_000.0);
    let sh = ensemble(&sys, Method::Sh, 1, 100_000.0);
    let bound = 0.15 * HALF_KT;
    let ke = rms_diff(&nm, &sh, |f| f.mean_ke);
    let pop = rms_diff(&nm, &sh, |f| f.mean_pop);
    let sem_sh = late_mean(&sh, 0.0, |f| f.sem_pop);
    outcome(
        ke < bound && pop < bound,
        format!(
            "NM-ED vs SH Gamma=0.0001 t<=1e5: RMS dKE = {ke:.5}, RMS dpop = {pop:.5} (bound {bound:.5}; mean SH pop sem {sem_sh:.4})"
        ),
    )
}

fn spectral_route() -> Outcome {
    let (mut worst_d, mut worst_g, mut missing) = (0.0f64, 0.0f64, 0);
    for gamma in [0.001, 0.01] {
        let sys = single(gamma);
        let est = SpectralEstimator::for_system(&sys, 1.0).unwrap();
        for i in 0..50 {
            let x = -200.0 + 400.0 * i as f64 / 49.0;
            match est.fit_at(&sys, x).unwrap() {
                Some(fit) => {
                    let d = sys.noise_amplitude(x);
                    worst_d = worst_d.max((fit.d_m - d).abs() / d);
                    worst_g = worst_g.max((fit.gamma(sys.params.hbar) - gamma).abs() / gamma);
                }
                None => missing += 1,
            }
        }
    }
    outcome(
        worst_d < 0.05 && worst_g < 0.10 && missing == 0,
        format!(
            "worst D_M error {:.2}% (bound 5%), worst Gamma error {:.2}% (bound 10%), {missing} unfitted points",
            100.0 * worst_d,
            100.0 * worst_g
        ),
    )
}

fn stride_economy() -> Outcome {
    let sys = single(0.01);
    let every = ensemble(&sys, Method::NmEd, 1, 30_000.0);
    let sparse = ensemble(&sys, Method::NmEd, 50, 30_000.0);
    let mut worst = f64::MIN;
    for (a, b) in every.iter().zip(&sparse) {
        let bound = 0.02 * a.mean_ke + 2.0 * a.sem_ke;
        worst = worst.max((a.mean_ke - b.mean_ke).abs() / bound);
    }
    outcome(
        worst < 1.0,
        format!(
            "NM-ED Gamma=0.01 stride 1 vs 50: max |dKE| / (2% + 2 sem) = {worst:.3} (must be < 1)"
        ),
    )
}

fn surface_hopping_rates() -> Outcome {
    const CHAINS: u64 = 64;
    const STEPS: u64 = 1_000_000;
    let mut pass = true;
    let mut parts = Vec::new();
    // Both positions put the nuclear force at zero, so the frozen copy stays at x = 0.
    for level_energy in [ModelParams::default().level_energy, 0.0] {
        let params = ModelParams {
            level_energy,
            ..ModelParams::default()
        };
        let sys = frozen(System::new(params, BathSpec::single(0.01, 0.0, KT).unwrap()).unwrap());
        let stepper = Stepper::new(sys.clone(), MethodConfig::new(Method::Sh)).unwrap();
        // (up hops, time empty, down hops, time full)
        let counts: Vec<[f64; 4]> = (0..CHAINS)
            .into_par_iter()
            .map(|c| {
                let mut rng = trajectory_rng(SEED, c);
                let mut state = stepper.initial_state(0.0, 0.0, &mut rng).unwrap();
                let mut k = [0.0; 4];
                for _ in 0..STEPS {
                    let before = state.electronic;
                    state = stepper.step(&state, &mut rng).unwrap();
                    match (before, state.electronic) {
                        (Electronic::Surface(SurfaceIndex::Neutral), after) => {
                            k[1] += 1.0;
                            if after == Electronic::Surface(SurfaceIndex::Charged) {
                                k[0] += 1.0;
                            }
                        }
                        (_, after) => {
                            k[3] += 1.0;
                            if after == Electronic::Surface(SurfaceIndex::Neutral) {
                                k[2] += 1.0;
                            }
                        }
                    }
                }
                k
            })
            .collect();
        let tot = counts.iter().fold([0.0; 4], |mut acc, k| {
            (0..4).for_each(|i| acc[i] += k[i]);
            acc
        });
        let (up, down) = sys.hop_rates(0.0);
        let (up_est, down_est) = (tot[0] / tot[1], tot[2] / tot[3]);
        let (eu, ed) = ((up_est - up).abs() / up, (down_est - down).abs() / down);
        let f = sys.occupation(0.0);
        let n = tot[1] + tot[3];
        let occ = tot[3] / n;
        // Two-state chain: lag-one correlation 1 - Gamma dt / hbar.
        let phi = 1.0 - sys.electronic_rate();
        let sigma = (f * (1.0 - f) / n * (1.0 + phi) / (1.0 - phi)).sqrt();
        let z = (occ - f).abs() / sigma;
        pass &= eu < 0.01 && ed < 0.01 && z < 3.0;
        parts.push(format!(
            "f={f:.4}: up {:.2}%, down {:.2}%, occupancy {occ:.4} ({z:.1} sigma)",
            100.0 * eu,
            100.0 * ed
        ));
    }
    outcome(
        pass,
        format!(
            "SH {CHAINS}x{STEPS} frozen steps, Gamma=0.01: {} (bounds 1%, 3 sigma)",
            parts.join("; ")
        ),
    )
}

fn current_sanity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    // With symmetric leads the current into the left lead is -dN/dt / 2, which
    // rings with the nuclear period while the hot start relaxes, so it is
    // checked once the ensemble is stationary.
    for method in [Method::NmEd, Method::Sh] {
        let frames = ensemble(&biased(0.01, 0.0), method, 1, 30_000.0);
        let last = frames.last().unwrap();
        let (i, sem) = (last.mean_current.unwrap(), last.sem_current.unwrap());
        pass &= i.abs() < 3.0 * sem;
        parts.push(format!("{method} mu=0 I(3e4) = {i:.2e} +- {sem:.1e}"));
    }

    let mut steady = Vec::new();
    let mut rms = Vec::new();
    for gamma in [0.001, 0.01] {
        for mu in [0.05, 0.2] {
            let sys = biased(gamma, mu);
            let nm = ensemble(&sys, Method::NmEd, 1, 30_000.0);
            let sh = ensemble(&sys, Method::Sh, 1, 30_000.0);
            let cur = |f: &ObservableFrame| f.mean_current.unwrap();
            steady.push([late_mean(&nm, 20_000.0, cur), late_mean(&sh, 20_000.0, cur)]);
            if gamma == 0.001 {
                let scale =
                    (sh.iter().map(|f| cur(f).powi(2)).sum::<f64>() / sh.len() as f64).sqrt();
                rms.push((mu, rms_diff(&nm, &sh, cur) / scale));
            }
        }
    }
    // steady[0..4] = (0.001, 0.05), (0.001, 0.2), (0.01, 0.05), (0.01, 0.2)
    for (m, name) in [(0, "NM-ED"), (1, "SH")] {
        let s: Vec<f64> = steady.iter().map(|p| p[m]).collect();
        let monotone = s[0] < s[1] && s[2] < s[3] && s[0] < s[2] && s[1] < s[3];
        pass &= monotone;
        parts.push(format!(
            "{name} steady I (G,mu)=(.001,.05) {:.2e} (.001,.2) {:.2e} (.01,.05) {:.2e} (.01,.2) {:.2e}",
            s[0], s[1], s[2], s[3]
        ));
    }
    for (mu, r) in rms {
        pass &= r < 0.15;
        parts.push(format!(
            "Gamma=0.001 mu={mu} NM-ED vs SH relative RMS {:.1}% (bound 15%)",
            100.0 * r
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ou_contract() -> Outcome {
    let sys = frozen(single(0.01));
    let stepper = Stepper::new(sys.clone(), MethodConfig::new(Method::NmEd)).unwrap();
    let mut rng = trajectory_rng(SEED, 0);
    let mut state = stepper.initial_state(0.0, 0.0, &mut rng).unwrap();
    let xi: Vec<f64> = (0..10_000_000)
        .map(|_| {
            state = stepper.step(&state, &mut rng).unwrap();
            state.noise.xi
        })
        .collect();
    let rate = sys.electronic_rate();
    let d_m = sys.noise_amplitude(0.0);
    match ou_autocorrelation_check(&xi, 1.0, rate, d_m) {
        Ok(OuCheck::Fitted(fit)) => {
            let er = (fit.rate - rate).abs() / rate;
            let ep = (fit.integrated_power - 2.0 * d_m).abs() / (2.0 * d_m);
            outcome(
                er < 0.10 && ep < 0.05,
                format!(
                    "1e7 NM-ED noise samples: rate {:.5} vs {rate} ({:.1}%, bound 10%), power vs 2 D_M off {:.1}% (bound 5%)",
                    fit.rate,
                    100.0 * er,
                    100.0 * ep
                ),
            )
        }
        other => outcome(
            false,
            format!("autocorrelation check did not fit: {other:?}"),
        ),
    }
}

fn determinism() -> Outcome {
    let run = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut text = String::new();
            for (sys, method) in [
                (single(0.01), Method::NmEd),
                (biased(0.001, 0.2), Method::Sh),
            ] {
                let stepper = Stepper::new(sys, MethodConfig::new(method)).unwrap();
                let cfg = EnsembleConfig {
                    n_traj: 200,
                    t_final: 3000.0,
                    record_stride: 10,
                    seed: SEED,
                    init_temperature: 5.0 * KT,
                };
                let frames = run_ensemble(&stepper, &cfg).unwrap();
                for obs in Observable::ALL {
                    if let Ok(csv) = frames_csv(&frames, obs) {
                        text.push_str(&csv);
                    }
                }
            }
            text
        })
    };
    let one = run(1);
    let (three, eight) = (run(3), run(8));
    outcome(
        one == three && one == eight,
        format!(
            "{} CSV bytes identical across 1, 3 and 8 workers: {}",
            one.len(),
            one == three && one == eight
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 12] = [
        ("fluctuation-dissipation identity", fluctuation_dissipation),
        ("detailed balance, EF-LD", || {
            detailed_balance(Method::EfLd, 0.10)
        }),
        ("detailed balance, NM-ED", || {
            detailed_balance(Method::NmEd, 0.15)
        }),
        ("ED cools to zero", ed_cools),
        ("M-ED heats at weak coupling", med_heats),
        ("weak-coupling NM-ED/SH agreement", weak_coupling),
        ("spectral route fidelity", spectral_route),
        ("amplitude stride economy", stride_economy),
        ("SH micro-rates", surface_hopping_rates),
        ("current sanity", current_sanity),
        ("OU noise contract", ou_contract),
        ("determinism across workers", determinism),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.0} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria pass", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
