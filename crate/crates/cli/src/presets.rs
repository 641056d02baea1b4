//! Built-in experiments reproducing the relaxation, population, current,
//! spectrum and amplitude studies.
//!
//! Run lengths: at `Gamma = 0.01` every corrected method reaches its plateau
//! by `t ~ 1.5e4`, so the `Gamma >= 0.001` presets stop at `3e4`. The weak
//! coupling preset runs ten electronic lifetimes, `t = 10 hbar / Gamma = 1e5`.

use crate::config::{Experiment, Kind};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Experiment,
}

impl Preset {
    pub fn experiment(&self) -> Experiment {
        Experiment {
            name: self.name.to_string(),
            ..(self.build)()
        }
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "eq_ke",
        summary: "kinetic energy, one lead, Gamma in {0.001, 0.01}, E_d in {g^2/hw, g^2/2hw}, five methods",
        build: || equilibrium(&["ke"]),
    },
    Preset {
        name: "eq_pop",
        summary: "impurity population for the eq_ke panels",
        build: || equilibrium(&["pop"]),
    },
    Preset {
        name: "small_gamma",
        summary: "kinetic energy and population at Gamma = 0.0001, five methods",
        build: || {
            let mut e = Experiment::default();
            e.bath.gamma = 0.0001;
            e.ensemble.t_final = 100_000.0;
            e
        },
    },
    Preset {
        name: "neq_ke",
        summary: "kinetic energy, two leads with mu_L = -mu_R in {0.05, 0.2}, Gamma in {0.001, 0.01}",
        build: || biased(&["ke"]),
    },
    Preset {
        name: "neq_pop",
        summary: "impurity population for the neq_ke panels",
        build: || biased(&["pop"]),
    },
    Preset {
        name: "current",
        summary: "current into the left lead for the neq_ke panels",
        build: || biased(&["current"]),
    },
    Preset {
        name: "spectrum",
        summary: "force correlation and power spectrum at x = -sqrt(2) g/hw, Gamma in {0.001, 0.01}",
        build: || Experiment {
            kind: Kind::Spectrum,
            sweep: gamma_sweep(),
            ..Experiment::default()
        },
    },
    Preset {
        name: "dm_compare",
        summary: "analytic and fitted Markovian amplitude over x, Gamma in {0.001, 0.01}",
        build: || Experiment {
            kind: Kind::DmCompare,
            sweep: gamma_sweep(),
            ..Experiment::default()
        },
    },
    Preset {
        name: "stride_study",
        summary: "NM-ED kinetic energy with fitted amplitudes refreshed every 1, 10, 50 steps, Gamma = 0.01",
        build: || {
            let mut e = Experiment {
                observables: vec!["ke".into()],
                ..Experiment::default()
            };
            e.dynamics.methods = vec!["nmed".into()];
            e.dynamics.amplitude_source = "fitted".into();
            e.sweep.update_stride = vec![1, 10, 50];
            e
        },
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn gamma_sweep() -> crate::config::SweepSection {
    crate::config::SweepSection {
        gamma: vec![0.001, 0.01],
        ..Default::default()
    }
}

fn equilibrium(observables: &[&str]) -> Experiment {
    let mut e = Experiment {
        observables: observables.iter().map(|s| s.to_string()).collect(),
        ..Experiment::default()
    };
    e.sweep = gamma_sweep();
    e.sweep.level_ratio = vec![1.0, 0.5];
    e
}

fn biased(observables: &[&str]) -> Experiment {
    let mut e = Experiment {
        observables: observables.iter().map(|s| s.to_string()).collect(),
        ..Experiment::default()
    };
    e.bath.leads = 2;
    e.sweep = gamma_sweep();
    e.sweep.bias = vec![0.05, 0.2];
    e
}
