//! Loading experiments, rendering their CSV outputs, and writing a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use esigma_core::ensemble::EnsembleConfig;
use esigma_core::noise::SpectralEstimator;
use esigma_core::run_ensemble;
use esigma_core::table::{columns_csv, frames_csv};
use serde::{Deserialize, Serialize};

use crate::config::{parse_toml, Experiment, Kind, Panel};
use crate::error::CliError;
use crate::presets;

/// Trajectory count restored by `--paper-scale`.
pub const PAPER_SCALE: u64 = 50_000;

pub const MANIFEST: &str = "manifest.json";

/// `<crate version> (<git describe>)`, fixed at build time.
pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("ESIGMA_GIT_DESCRIBE"),
    ")"
);

/// Command-line overrides applied on top of a loaded experiment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_traj: Option<u64>,
    pub paper_scale: bool,
    pub methods: Option<Vec<String>>,
    /// Replaces both the fixed stride and any stride sweep.
    pub update_stride: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, e: &mut Experiment) {
        if let Some(seed) = self.seed {
            e.ensemble.seed = seed;
        }
        if self.paper_scale {
            e.ensemble.n_traj = PAPER_SCALE;
        }
        if let Some(n) = self.n_traj {
            e.ensemble.n_traj = n;
        }
        if let Some(m) = &self.methods {
            e.dynamics.methods = m.clone();
        }
        if let Some(k) = self.update_stride {
            e.dynamics.update_stride = k;
            e.sweep.update_stride.clear();
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub experiment: Experiment,
}

/// Resolves a preset name, a manifest (`.json`) or a TOML config file.
pub fn load(target: &str) -> Result<Experiment, CliError> {
    if let Some(p) = presets::find(target) {
        return Ok(p.experiment());
    }
    let path = Path::new(target);
    if !path.exists() {
        let nearest = presets::PRESETS
            .iter()
            .min_by_key(|p| strsim::levenshtein(p.name, target))
            .expect("presets exist");
        return Err(CliError::Config(format!(
            "`{target}` is neither a preset nor a file; nearest preset is `{}`",
            nearest.name
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|x| x == "json") {
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed manifest {target}: {e}")))?;
        Ok(manifest.experiment)
    } else {
        parse_toml(&text)
    }
}

/// One output file, named relative to the run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

/// Computes every output of `e` in memory.
pub fn render(e: &Experiment) -> Result<Vec<Output>, CliError> {
    let panels = e.validate()?;
    let mut out = Vec::new();
    for panel in &panels {
        match e.kind {
            Kind::Dynamics => render_dynamics(e, panel, &mut out)?,
            Kind::Spectrum => render_spectrum(e, panel, &mut out)?,
            Kind::DmCompare => render_dm(e, panel, &mut out)?,
        }
    }
    Ok(out)
}

fn file_name(parts: &[&str]) -> String {
    let parts: Vec<&str> = parts.iter().copied().filter(|p| !p.is_empty()).collect();
    format!("{}.csv", parts.join("_"))
}

fn render_dynamics(e: &Experiment, panel: &Panel, out: &mut Vec<Output>) -> Result<(), CliError> {
    let record_stride = match e.ensemble.record_stride {
        0 => EnsembleConfig::default_record_stride(e.ensemble.t_final, e.dynamics.dt),
        k => k,
    };
    let cfg = EnsembleConfig {
        n_traj: e.ensemble.n_traj,
        t_final: e.ensemble.t_final,
        record_stride,
        seed: e.ensemble.seed,
        init_temperature: e.ensemble.init_temperature,
    };
    for method in e.methods() {
        let stepper = e.stepper(panel, method)?;
        let frames = run_ensemble(&stepper, &cfg)?;
        for obs in e.observables() {
            out.push(Output {
                name: file_name(&[obs.name(), &panel.label, method.name()]),
                contents: frames_csv(&frames, obs)?,
            });
        }
    }
    Ok(())
}

fn render_spectrum(e: &Experiment, panel: &Panel, out: &mut Vec<Output>) -> Result<(), CliError> {
    let est = SpectralEstimator::for_system(&panel.system, e.dynamics.dt)?;
    let several = e.probe_positions().len() > 1;
    for x in e.probe_positions() {
        let trace = est.trace(&panel.system, x)?;
        let spectrum = est.spectrum(&trace);
        let at = if several {
            format!("x{x}")
        } else {
            String::new()
        };
        out.push(Output {
            name: file_name(&["trace", &panel.label, &at]),
            contents: columns_csv(&["tau", "C"], &[&trace.tau_grid(), &trace.values])?,
        });
        out.push(Output {
            name: file_name(&["spectrum", &panel.label, &at]),
            contents: columns_csv(&["omega", "K"], &[&spectrum.omega, &spectrum.values])?,
        });
    }
    Ok(())
}

fn render_dm(e: &Experiment, panel: &Panel, out: &mut Vec<Output>) -> Result<(), CliError> {
    let est = SpectralEstimator::for_system(&panel.system, e.dynamics.dt)?;
    let xs = e.probe_positions();
    let analytic: Vec<f64> = xs
        .iter()
        .map(|&x| panel.system.noise_amplitude(x))
        .collect();
    let fitted = xs
        .iter()
        .map(|&x| Ok(est.fit_at(&panel.system, x)?.map_or(0.0, |f| f.d_m)))
        .collect::<Result<Vec<f64>, CliError>>()?;
    out.push(Output {
        name: file_name(&["dm", &panel.label]),
        contents: columns_csv(&["x", "analytic", "fitted"], &[&xs, &analytic, &fitted])?,
    });
    Ok(())
}

/// Renders `e`, writes its outputs and manifest into `out_dir`.
pub fn run(e: &Experiment, out_dir: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let outputs = render(e)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    fs::create_dir_all(out_dir).map_err(|err| CliError::io(out_dir, err))?;
    for o in &outputs {
        let path = out_dir.join(&o.name);
        fs::write(&path, &o.contents).map_err(|err| CliError::io(&path, err))?;
    }
    let manifest = Manifest {
        version: VERSION.to_string(),
        seed: e.ensemble.seed,
        threads: rayon::current_num_threads(),
        wall_time_s,
        outputs: outputs.into_iter().map(|o| o.name).collect(),
        experiment: e.clone(),
    };
    let path: PathBuf = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|err| CliError::io(&path, err))?;
    Ok(manifest)
}
