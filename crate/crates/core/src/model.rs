//! Anderson-Holstein impurity model in the classical master equation limit.
//!
//! One nuclear coordinate `x` moves on the neutral surface
//! `U0(x) = m w^2 x^2 / 2` or the charged surface `U1(x) = U0(x) + h(x)`,
//! with the impurity level `h(x) = E_d + g x sqrt(2 m w / hbar)`. The level
//! exchanges electrons with one or two wide-band leads.
//!
//! When two leads are present every Fermi factor entering forces, rates,
//! friction and noise is the coupling-weighted effective one; the
//! lead-resolved Fermi function is only used for the current.

use crate::error::{invalid, Error, Result};

/// Nuclear and electronic parameters of the impurity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
    pub omega: f64,
    /// Electron-phonon coupling `g` (energy).
    pub coupling: f64,
    /// Bare level energy `E_d`.
    pub level_energy: f64,
    pub hbar: f64,
}

impl Default for ModelParams {
    /// `hbar w = 0.003`, `g = 0.02`, `E_d = g^2 / (2 hbar w)`.
    fn default() -> Self {
        let omega = 0.003;
        let coupling = 0.02;
        Self {
            mass: 1.0,
            omega,
            coupling,
            level_energy: coupling * coupling / (2.0 * omega),
            hbar: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("omega", self.omega)?;
        positive("hbar", self.hbar)?;
        finite("coupling", self.coupling)?;
        finite("level_energy", self.level_energy)?;
        Ok(())
    }

    /// `g^2 / (hbar w)`, the level shift scale used by the displaced-level presets.
    pub fn reorganization_scale(&self) -> f64 {
        self.coupling * self.coupling / (self.hbar * self.omega)
    }

    pub fn neutral_potential(&self, x: f64) -> f64 {
        0.5 * self.mass * self.omega * self.omega * x * x
    }

    pub fn neutral_potential_gradient(&self, x: f64) -> f64 {
        self.mass * self.omega * self.omega * x
    }

    pub fn potential(&self, surface: SurfaceIndex, x: f64) -> f64 {
        match surface {
            SurfaceIndex::Neutral => self.neutral_potential(x),
            SurfaceIndex::Charged => self.neutral_potential(x) + self.level(x),
        }
    }

    pub fn potential_gradient(&self, surface: SurfaceIndex, x: f64) -> f64 {
        self.neutral_potential_gradient(x) + surface.occupation() * self.level_slope()
    }

    /// Impurity level `h(x)`.
    pub fn level(&self, x: f64) -> f64 {
        self.level_energy + self.level_slope() * x
    }

    /// `dh/dx = g sqrt(2 m w / hbar)`, constant in `x`.
    pub fn level_slope(&self) -> f64 {
        self.coupling * (2.0 * self.mass * self.omega / self.hbar).sqrt()
    }
}

/// One electronic lead: hybridization `gamma` and chemical potential `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    pub gamma: f64,
    pub mu: f64,
}

/// One or two wide-band leads at a common temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    leads: Vec<Lead>,
    kt: f64,
}

impl BathSpec {
    pub fn new(leads: Vec<Lead>, kt: f64) -> Result<Self> {
        if leads.is_empty() || leads.len() > 2 {
            return Err(invalid(
                "leads",
                format!("expected one or two leads, got {}", leads.len()),
            ));
        }
        for lead in &leads {
            positive("gamma", lead.gamma)?;
            finite("mu", lead.mu)?;
        }
        positive("kt", kt)?;
        Ok(Self { leads, kt })
    }

    pub fn single(gamma: f64, mu: f64, kt: f64) -> Result<Self> {
        Self::new(vec![Lead { gamma, mu }], kt)
    }

    /// Two leads sharing `gamma` equally with chemical potentials `mu_left` and `mu_right`.
    pub fn symmetric_pair(gamma: f64, mu_left: f64, mu_right: f64, kt: f64) -> Result<Self> {
        Self::new(
            vec![
                Lead {
                    gamma: 0.5 * gamma,
                    mu: mu_left,
                },
                Lead {
                    gamma: 0.5 * gamma,
                    mu: mu_right,
                },
            ],
            kt,
        )
    }

    pub fn leads(&self) -> &[Lead] {
        &self.leads
    }

    /// The first lead; the current is measured into this one.
    pub fn left(&self) -> Lead {
        self.leads[0]
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn total_gamma(&self) -> f64 {
        self.leads.iter().map(|l| l.gamma).sum()
    }

    /// Coupling-weighted Fermi function of all leads at energy `energy`.
    pub fn fermi_effective(&self, energy: f64) -> f64 {
        match self.leads.as_slice() {
            [lead] => fermi(energy, lead.mu, self.kt),
            leads => {
                let weighted: f64 = leads
                    .iter()
                    .map(|l| l.gamma * fermi(energy, l.mu, self.kt))
                    .sum();
                weighted / self.total_gamma()
            }
        }
    }

    /// `d f_eff / d energy`, always `<= 0`.
    pub fn fermi_effective_derivative(&self, energy: f64) -> f64 {
        let gamma = self.total_gamma();
        -self
            .leads
            .iter()
            .map(|l| {
                let f = fermi(energy, l.mu, self.kt);
                l.gamma * f * (1.0 - f)
            })
            .sum::<f64>()
            / (gamma * self.kt)
    }
}

/// Surface label: neutral (`d^+ d = 0`) or charged (`d^+ d = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceIndex {
    Neutral,
    Charged,
}

impl SurfaceIndex {
    pub fn occupation(self) -> f64 {
        match self {
            SurfaceIndex::Neutral => 0.0,
            SurfaceIndex::Charged => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            SurfaceIndex::Neutral => SurfaceIndex::Charged,
            SurfaceIndex::Charged => SurfaceIndex::Neutral,
        }
    }
}

impl From<SurfaceIndex> for u8 {
    fn from(s: SurfaceIndex) -> u8 {
        match s {
            SurfaceIndex::Neutral => 0,
            SurfaceIndex::Charged => 1,
        }
    }
}

impl TryFrom<u8> for SurfaceIndex {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(SurfaceIndex::Neutral),
            1 => Ok(SurfaceIndex::Charged),
            _ => Err(invalid("surface", format!("{v} is not 0 or 1"))),
        }
    }
}

/// Fermi-Dirac occupation `1 / (exp((energy - mu)/kT) + 1)`.
///
/// The exponent is only ever evaluated with a non-positive argument.
pub fn fermi(energy: f64, mu: f64, kt: f64) -> f64 {
    let z = (energy - mu) / kt;
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Model parameters and bath bundled together, the unit every stepper works on.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub params: ModelParams,
    pub bath: BathSpec,
}

impl System {
    pub fn new(params: ModelParams, bath: BathSpec) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, bath })
    }

    /// Electronic relaxation rate `Gamma / hbar`.
    pub fn electronic_rate(&self) -> f64 {
        self.bath.total_gamma() / self.params.hbar
    }

    /// Occupation the level relaxes toward at `x`.
    pub fn occupation(&self, x: f64) -> f64 {
        self.bath.fermi_effective(self.params.level(x))
    }

    /// Adiabatic mean force `-dU0/dx - (dh/dx) f(h)`.
    pub fn mean_force(&self, x: f64) -> f64 {
        -self.params.neutral_potential_gradient(x) - self.params.level_slope() * self.occupation(x)
    }

    /// Electronic friction `-(hbar/Gamma) (df(h)/dx) (dh/dx)`.
    pub fn friction(&self, x: f64) -> f64 {
        let slope = self.params.level_slope();
        let df_dx = self.bath.fermi_effective_derivative(self.params.level(x)) * slope;
        -(self.params.hbar / self.bath.total_gamma()) * df_dx * slope
    }

    /// Mean force and friction at `x` from a single pass over the leads.
    pub fn mean_force_and_friction(&self, x: f64) -> (f64, f64) {
        let slope = self.params.level_slope();
        let h = self.params.level(x);
        let kt = self.bath.kt;
        let gamma = self.bath.total_gamma();
        let (mut occ, mut spread) = (0.0, 0.0);
        for lead in &self.bath.leads {
            let f = fermi(h, lead.mu, kt);
            occ += lead.gamma * f;
            spread += lead.gamma * f * (1.0 - f);
        }
        let force = -self.params.neutral_potential_gradient(x) - slope * occ / gamma;
        let friction = self.params.hbar / gamma * spread / (gamma * kt) * slope * slope;
        (force, friction)
    }

    /// Markovian noise amplitude `(hbar/Gamma) f (1 - f) (dh/dx)^2`.
    ///
    /// For a single lead this equals `friction(x) * kT`.
    pub fn noise_amplitude(&self, x: f64) -> f64 {
        let f = self.occupation(x);
        let slope = self.params.level_slope();
        (self.params.hbar / self.bath.total_gamma()) * f * (1.0 - f) * slope * slope
    }

    /// Zero-order hop rates `(0 -> 1, 1 -> 0)` at `x`.
    pub fn hop_rates(&self, x: f64) -> (f64, f64) {
        let rate = self.electronic_rate();
        let f = self.occupation(x);
        (rate * f, rate * (1.0 - f))
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}
