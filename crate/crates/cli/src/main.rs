use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use esigma_cli::presets::PRESETS;
use esigma_cli::{load, run, to_toml, CliError, Overrides};

/// Ehrenfest dynamics with random forces for a molecule near a metal surface.
#[derive(Parser)]
#[command(name = "esigma", version = esigma_cli::run::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset, a TOML config, or a previous run's manifest.json.
    Run {
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, conflicts_with = "paper_scale")]
        n_traj: Option<u64>,
        /// Use 50,000 trajectories.
        #[arg(long)]
        paper_scale: bool,
        /// Comma-separated subset of ed, efld, med, nmed, sh.
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<String>>,
        /// Steps between amplitude refreshes; replaces any stride sweep.
        #[arg(long)]
        update_stride: Option<u32>,
        /// Defaults to out/<experiment name>.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads; all cores by default. Output does not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List built-in presets.
    ListPresets,
    /// Check a config (or preset) and print it with all defaults filled in.
    Validate { target: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esigma: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::ListPresets => {
            for p in PRESETS {
                println!("{:<13} {}", p.name, p.summary);
            }
            Ok(())
        }
        Command::Validate { target } => {
            let e = load(&target)?;
            e.validate()?;
            print!("{}", to_toml(&e));
            Ok(())
        }
        Command::Run {
            target,
            seed,
            n_traj,
            paper_scale,
            method,
            update_stride,
            out_dir,
            threads,
        } => {
            let mut e = load(&target)?;
            Overrides {
                seed,
                n_traj,
                paper_scale,
                methods: method,
                update_stride,
            }
            .apply(&mut e);
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("out").join(&e.name));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|err| CliError::Config(format!("thread pool: {err}")))?;
            let manifest = pool.install(|| run(&e, &out_dir))?;
            eprintln!(
                "wrote {} files to {} in {:.1} s",
                manifest.outputs.len() + 1,
                out_dir.display(),
                manifest.wall_time_s
            );
            Ok(())
        }
    }
}
