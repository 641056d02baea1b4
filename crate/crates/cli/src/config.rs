//! Experiment configuration: the TOML schema, unknown-key detection, and
//! expansion into concrete panels.
//!
//! Every field has a default, so an empty file describes the symmetric
//! single-lead run with `hbar w = 0.003`, `kT = 0.05`, `g = 0.02`,
//! `E_d = g^2 / (2 hbar w)` and `Gamma = 0.01`.

use esigma_core::{
    AmplitudeSource, BathSpec, Method, MethodConfig, ModelParams, Observable, Stepper, System,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Trajectory ensembles, one `t,mean,sem` file per panel, method and observable.
    Dynamics,
    /// Force correlation trace and power spectrum at fixed positions.
    Spectrum,
    /// Analytic against fitted Markovian amplitude over a position grid.
    DmCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub kind: Kind,
    /// Any of `ke`, `pop`, `current`.
    pub observables: Vec<String>,
    pub model: ModelSection,
    pub bath: BathSection,
    pub dynamics: DynamicsSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub omega: f64,
    pub coupling: f64,
    pub level_energy: f64,
    pub mass: f64,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathSection {
    /// 1, or 2 for a biased junction with the coupling split evenly.
    pub leads: u8,
    /// Total coupling `Gamma`.
    pub gamma: f64,
    pub kt: f64,
    pub mu_left: f64,
    /// Only used with two leads.
    pub mu_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub methods: Vec<String>,
    pub dt: f64,
    /// `analytic` or `fitted`.
    pub amplitude_source: String,
    pub update_stride: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: u64,
    pub t_final: f64,
    /// Steps between frames; 0 picks a stride giving at most 2000 frames.
    pub record_stride: u64,
    pub seed: u64,
    pub init_temperature: f64,
}

/// Axes expanded as a cartesian product; an empty list means "not swept".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gamma: Vec<f64>,
    /// `E_d` in units of `g^2 / (hbar w)`.
    pub level_ratio: Vec<f64>,
    /// Sets `mu_left = bias`, `mu_right = -bias`; needs two leads.
    pub bias: Vec<f64>,
    pub update_stride: Vec<u32>,
}

/// Positions probed by the spectrum and amplitude-comparison kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Explicit positions. When empty, spectra use `x = -sqrt(2) g / (hbar w)`
    /// and amplitude comparisons the `x_min..=x_max` grid.
    pub x: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            kind: Kind::Dynamics,
            observables: vec!["ke".into(), "pop".into()],
            model: ModelSection::default(),
            bath: BathSection::default(),
            dynamics: DynamicsSection::default(),
            ensemble: EnsembleSection::default(),
            sweep: SweepSection::default(),
            probe: ProbeSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            omega: p.omega,
            coupling: p.coupling,
            level_energy: p.level_energy,
            mass: p.mass,
            hbar: p.hbar,
        }
    }
}

impl Default for BathSection {
    fn default() -> Self {
        Self {
            leads: 1,
            gamma: 0.01,
            kt: 0.05,
            mu_left: 0.0,
            mu_right: 0.0,
        }
    }
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            dt: 1.0,
            amplitude_source: "analytic".into(),
            update_stride: 1,
        }
    }
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_traj: 5000,
            t_final: 30_000.0,
            record_stride: 0,
            seed: 1,
            init_temperature: 0.25,
        }
    }
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            x: Vec::new(),
            x_min: -150.0,
            x_max: 150.0,
            points: 61,
        }
    }
}

/// Parses TOML text, rejecting keys the schema does not know.
pub fn parse_toml(text: &str) -> Result<Experiment, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("malformed config: {e}")))?;
    let known =
        toml::Table::try_from(Experiment::default()).expect("default experiment serializes");
    check_keys(&table, &known, "")?;
    Experiment::deserialize(table).map_err(|e| CliError::Config(e.to_string()))
}

pub fn to_toml(experiment: &Experiment) -> String {
    toml::to_string(experiment).expect("experiment serializes")
}

fn check_keys(table: &toml::Table, known: &toml::Table, prefix: &str) -> Result<(), CliError> {
    for (key, value) in table {
        let path = format!("{prefix}{key}");
        match known.get(key) {
            None => {
                let nearest = known
                    .keys()
                    .min_by_key(|k| strsim::levenshtein(k, key))
                    .expect("schema has keys");
                return Err(CliError::Config(format!(
                    "unknown key `{path}`; did you mean `{prefix}{nearest}`?"
                )));
            }
            Some(toml::Value::Table(inner)) => {
                if let toml::Value::Table(given) = value {
                    check_keys(given, inner, &format!("{path}."))?;
                }
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// One point of the sweep with everything needed to build steppers.
#[derive(Debug, Clone)]
pub struct Panel {
    /// Sweep coordinates joined by `_`, empty without a sweep.
    pub label: String,
    pub system: System,
    pub update_stride: u32,
}

impl Experiment {
    pub fn methods(&self) -> Vec<Method> {
        self.dynamics
            .methods
            .iter()
            .filter_map(|m| Method::from_name(m))
            .collect()
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.observables
            .iter()
            .filter_map(|o| Observable::from_name(o))
            .collect()
    }

    pub fn amplitude_source(&self) -> AmplitudeSource {
        match self.dynamics.amplitude_source.as_str() {
            "fitted" => AmplitudeSource::Fitted,
            _ => AmplitudeSource::Analytic,
        }
    }

    /// Every field-level problem, each prefixed with its path.
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, path: &str, what: String| {
            if !ok {
                out.push(format!("{path}: {what}"));
            }
        };
        let pos = |v: f64| v > 0.0 && v.is_finite();

        need(!self.name.is_empty(), "name", "must not be empty".into());
        for o in &self.observables {
            need(
                Observable::from_name(o).is_some(),
                "observables",
                format!("unknown observable `{o}`, expected ke, pop or current"),
            );
        }
        if self.kind == Kind::Dynamics {
            need(
                !self.observables.is_empty(),
                "observables",
                "must list at least one".into(),
            );
        }
        let two_leads = self.bath.leads == 2 || !self.sweep.bias.is_empty();
        if self.observables.iter().any(|o| o == "current") {
            need(
                self.bath.leads == 2,
                "observables",
                "`current` needs bath.leads = 2".into(),
            );
        }

        let m = &self.model;
        for (name, v) in [("omega", m.omega), ("mass", m.mass), ("hbar", m.hbar)] {
            need(
                pos(v),
                &format!("model.{name}"),
                format!("must be > 0, got {v}"),
            );
        }
        need(
            m.coupling.is_finite(),
            "model.coupling",
            "must be finite".into(),
        );
        need(
            m.level_energy.is_finite(),
            "model.level_energy",
            "must be finite".into(),
        );

        let b = &self.bath;
        need(
            b.leads == 1 || b.leads == 2,
            "bath.leads",
            format!("must be 1 or 2, got {}", b.leads),
        );
        need(
            pos(b.gamma),
            "bath.gamma",
            format!("must be > 0, got {}", b.gamma),
        );
        need(pos(b.kt), "bath.kt", format!("must be > 0, got {}", b.kt));
        need(
            b.leads == 2 || b.mu_right == 0.0,
            "bath.mu_right",
            "only applies with bath.leads = 2".into(),
        );
        need(
            two_leads == (b.leads == 2),
            "sweep.bias",
            "needs bath.leads = 2".into(),
        );

        let d = &self.dynamics;
        need(
            !d.methods.is_empty(),
            "dynamics.methods",
            "must list at least one".into(),
        );
        for name in &d.methods {
            need(
                Method::from_name(name).is_some(),
                "dynamics.methods",
                format!("unknown method `{name}`, expected one of ed, efld, med, nmed, sh"),
            );
        }
        need(
            pos(d.dt),
            "dynamics.dt",
            format!("must be > 0, got {}", d.dt),
        );
        need(
            matches!(d.amplitude_source.as_str(), "analytic" | "fitted"),
            "dynamics.amplitude_source",
            format!("expected analytic or fitted, got `{}`", d.amplitude_source),
        );
        need(
            d.update_stride >= 1,
            "dynamics.update_stride",
            "must be >= 1".into(),
        );

        let e = &self.ensemble;
        need(e.n_traj >= 1, "ensemble.n_traj", "must be >= 1".into());
        need(
            pos(e.t_final),
            "ensemble.t_final",
            format!("must be > 0, got {}", e.t_final),
        );
        need(
            pos(e.init_temperature),
            "ensemble.init_temperature",
            format!("must be > 0, got {}", e.init_temperature),
        );
        if pos(e.t_final) && pos(d.dt) {
            need(
                e.t_final >= d.dt,
                "ensemble.t_final",
                "must cover at least one step".into(),
            );
        }

        let s = &self.sweep;
        for (i, &g) in s.gamma.iter().enumerate() {
            need(
                pos(g),
                &format!("sweep.gamma[{i}]"),
                format!("must be > 0, got {g}"),
            );
        }
        for (i, &r) in s.level_ratio.iter().enumerate() {
            need(
                pos(r),
                &format!("sweep.level_ratio[{i}]"),
                format!("must be > 0, got {r}"),
            );
        }
        for (i, &v) in s.bias.iter().enumerate() {
            need(
                pos(v),
                &format!("sweep.bias[{i}]"),
                format!("must be > 0, got {v}"),
            );
        }
        for (i, &k) in s.update_stride.iter().enumerate() {
            need(
                k >= 1,
                &format!("sweep.update_stride[{i}]"),
                "must be >= 1".into(),
            );
        }

        let p = &self.probe;
        for (i, &x) in p.x.iter().enumerate() {
            need(
                x.is_finite(),
                &format!("probe.x[{i}]"),
                "must be finite".into(),
            );
        }
        if self.kind == Kind::DmCompare && p.x.is_empty() {
            need(p.points >= 2, "probe.points", "must be >= 2".into());
            need(
                p.x_min < p.x_max,
                "probe.x_min",
                "must be below probe.x_max".into(),
            );
        }
        out
    }

    /// Checks every field, then the stability limits of each panel and method.
    pub fn validate(&self) -> Result<Vec<Panel>, CliError> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(CliError::Config(problems.join("\n")));
        }
        let panels = self.panels()?;
        if self.kind == Kind::Dynamics {
            for panel in &panels {
                for method in self.methods() {
                    self.stepper(panel, method).map_err(|e| match e {
                        CliError::Stability(msg) => CliError::Stability(format!(
                            "{}{}{}: {msg}",
                            method,
                            if panel.label.is_empty() { "" } else { " at " },
                            panel.label
                        )),
                        other => other,
                    })?;
                }
            }
        }
        Ok(panels)
    }

    pub fn stepper(&self, panel: &Panel, method: Method) -> Result<Stepper, CliError> {
        let cfg = MethodConfig {
            method,
            dt: self.dynamics.dt,
            amplitude_source: self.amplitude_source(),
            update_stride: panel.update_stride,
        };
        Ok(Stepper::new(panel.system.clone(), cfg)?)
    }

    /// Positions probed by the non-dynamics kinds.
    pub fn probe_positions(&self) -> Vec<f64> {
        let p = &self.probe;
        if !p.x.is_empty() {
            return p.x.clone();
        }
        match self.kind {
            Kind::DmCompare => {
                let step = (p.x_max - p.x_min) / (p.points - 1) as f64;
                (0..p.points).map(|i| p.x_min + step * i as f64).collect()
            }
            _ => {
                let m = &self.model;
                vec![-(2.0f64).sqrt() * m.coupling / (m.hbar * m.omega)]
            }
        }
    }

    fn panels(&self) -> Result<Vec<Panel>, CliError> {
        let s = &self.sweep;
        let gammas = axis(&s.gamma, self.bath.gamma);
        let ratios: Vec<Option<f64>> = axis_opt(&s.level_ratio);
        let biases: Vec<Option<f64>> = axis_opt(&s.bias);
        let strides: Vec<Option<u32>> = if s.update_stride.is_empty() {
            vec![None]
        } else {
            s.update_stride.iter().copied().map(Some).collect()
        };

        let mut panels = Vec::new();
        for &gamma in &gammas {
            for &ratio in &ratios {
                for &bias in &biases {
                    for &stride in &strides {
                        let mut parts = Vec::new();
                        if !s.gamma.is_empty() {
                            parts.push(format!("gamma{gamma}"));
                        }
                        let m = &self.model;
                        let mut params = ModelParams {
                            mass: m.mass,
                            omega: m.omega,
                            coupling: m.coupling,
                            level_energy: m.level_energy,
                            hbar: m.hbar,
                        };
                        if let Some(r) = ratio {
                            params.level_energy = r * params.reorganization_scale();
                            parts.push(format!("ratio{r}"));
                        }
                        let (mu_l, mu_r) = match bias {
                            Some(v) => {
                                parts.push(format!("bias{v}"));
                                (v, -v)
                            }
                            None => (self.bath.mu_left, self.bath.mu_right),
                        };
                        if let Some(k) = stride {
                            parts.push(format!("stride{k}"));
                        }
                        let bath = if self.bath.leads == 2 {
                            BathSpec::symmetric_pair(gamma, mu_l, mu_r, self.bath.kt)?
                        } else {
                            BathSpec::single(gamma, mu_l, self.bath.kt)?
                        };
                        panels.push(Panel {
                            label: parts.join("_"),
                            system: System::new(params, bath)?,
                            update_stride: stride.unwrap_or(self.dynamics.update_stride),
                        });
                    }
                }
            }
        }
        Ok(panels)
    }
}

fn axis(values: &[f64], fallback: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

fn axis_opt(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}
