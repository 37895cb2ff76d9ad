use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavnl::experiments::config::{resolve_output_dir, ExperimentKind, RunConfig, WignerConfig};
use cavnl::experiments::{presets, run};

/// Particle-cavity quantum dynamics runs.
#[derive(Parser)]
#[command(name = "cavnl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble (trajectory_ensemble, decay_squeezing or custom)
    Simulate(Common),
    /// Stationary states of the conditional field Hamiltonians
    Steady(Common),
    /// Subspace counts, spectra and basis exports
    Subspace(Common),
    /// Wigner grids of the conditional stationary states
    Wigner {
        #[command(flatten)]
        common: Common,
        /// Half-width of the square grid in both quadratures
        #[arg(long)]
        extent: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run or print a canonical preset
    Presets {
        #[arg(value_parser = presets::NAMES)]
        name: String,
        /// Print the resolved config(s) as TOML instead of running
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run config
    #[arg(long, short, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Start from a preset's config instead of a file
    #[arg(long, value_parser = presets::NAMES)]
    preset: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Output directory (beats the config's output_dir and $CAVNL_OUTPUT_DIR)
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_fock: Option<usize>,
    #[arg(long)]
    m_levels: Option<usize>,
    /// Skip the rerun at enlarged truncation
    #[arg(long)]
    no_convergence: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.n_traj {
            cfg.n_traj = n;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = self.n_fock {
            cfg.model.trunc.n_fock = n;
        }
        if let Some(m) = self.m_levels {
            cfg.model.trunc.m_levels = m;
        }
        if self.no_convergence {
            cfg.convergence.enabled = false;
        }
    }
}

fn load(common: &Common) -> cavnl::Result<Vec<(String, RunConfig)>> {
    let mut runs = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let cfg = RunConfig::load(path)?;
            vec![(cfg.name.clone(), cfg)]
        }
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => unreachable!("clap requires one of --config/--preset"),
    };
    for (_, cfg) in &mut runs {
        common.overrides.apply(cfg);
    }
    Ok(runs)
}

fn execute(runs: Vec<(String, RunConfig)>, out: Option<&Path>) -> cavnl::Result<()> {
    let several = runs.len() > 1;
    for (label, cfg) in runs {
        cfg.validate()?;
        let base = resolve_output_dir(out, cfg.output_dir.as_deref());
        let dir = if several { base.join(&label) } else { base };
        eprintln!("[{label}] {:?} -> {}", cfg.experiment, dir.display());
        let manifest = run(&cfg, &dir)?;
        for w in &manifest.warnings {
            eprintln!("[{label}] warning: {w}");
        }
        match manifest.convergence.converged {
            Some(true) => eprintln!("[{label}] converged under enlarged truncation"),
            Some(false) => eprintln!("[{label}] NOT converged under enlarged truncation"),
            None => {}
        }
        println!("{}", dir.join("manifest.toml").display());
    }
    Ok(())
}

fn force(runs: &mut [(String, RunConfig)], kind: ExperimentKind) {
    for (_, cfg) in runs {
        cfg.experiment = kind;
    }
}

fn main_inner(cli: Cli) -> cavnl::Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let runs = load(&common)?;
            if let Some((label, cfg)) = runs.iter().find(|(_, c)| !c.experiment.uses_trajectories()) {
                return Err(cavnl::Error::Parse {
                    path: "experiment".into(),
                    message: format!("`{label}` is {:?}; use the steady or subspace subcommand", cfg.experiment),
                });
            }
            execute(runs, common.overrides.out.as_deref())
        }
        Command::Steady(common) => {
            let mut runs = load(&common)?;
            force(&mut runs, ExperimentKind::EffectiveSteady);
            execute(runs, common.overrides.out.as_deref())
        }
        Command::Subspace(common) => {
            let mut runs = load(&common)?;
            force(&mut runs, ExperimentKind::SubspaceDiagnostic);
            execute(runs, common.overrides.out.as_deref())
        }
        Command::Wigner { common, extent, points } => {
            let mut runs = load(&common)?;
            force(&mut runs, ExperimentKind::EffectiveSteady);
            for (_, cfg) in &mut runs {
                if let Some(steady) = cfg.steady.as_mut() {
                    let mut w = steady.wigner.unwrap_or(WignerConfig {
                        x_min: -5.0,
                        x_max: 5.0,
                        p_min: -5.0,
                        p_max: 5.0,
                        points: 101,
                    });
                    if let Some(e) = extent {
                        (w.x_min, w.x_max, w.p_min, w.p_max) = (-e, e, -e, e);
                    }
                    if let Some(n) = points {
                        w.points = n;
                    }
                    steady.wigner = Some(w);
                }
            }
            execute(runs, common.overrides.out.as_deref())
        }
        Command::Presets { name, print, overrides } => {
            let mut runs = presets::preset(&name)?;
            for (_, cfg) in &mut runs {
                overrides.apply(cfg);
            }
            if print {
                for (label, cfg) in &runs {
                    println!("# {label}\n{}", cfg.to_toml()?);
                }
                return Ok(());
            }
            let out = overrides.out.as_deref().map(Path::to_path_buf);
            let base = out.unwrap_or_else(|| resolve_output_dir(None, None).join(&name));
            let several = runs.len() > 1;
            for (label, cfg) in runs {
                let dir = if several { base.join(&label) } else { base.clone() };
                execute(vec![(label, cfg)], Some(&dir))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
