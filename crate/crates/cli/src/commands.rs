use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpd_core::analysis::{
    chaos_experiment, homogenization_experiment, occupation_experiment, ChaosConfig, ExperimentReport,
    HomogenizationConfig, OccupationConfig,
};
use dpd_core::{
    build_lattice, init_matching, init_spatial, Initial, InitialMeasure, LatticeParams, MatchingInitial, MeanFieldModel,
};
use serde::Serialize;

use crate::config::{parse_config, ConfigError, DefaultUsed, EngineKind, Resolved, RunConfig};
use crate::output::{self, IoError};

pub const WORKERS_ENV: &str = "DPD_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "dpd", version, about = "Demographic prisoner's dilemma simulator and convergence checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a configuration without running anything.
    Validate { config: PathBuf },
    /// Run one spatial or random-matching trajectory and write its snapshots.
    Simulate(RunArgs),
    /// Integrate the mean-field equation and write the law at each snapshot time.
    Solve(RunArgs),
    /// Run a convergence experiment and judge its verdicts.
    Experiment {
        name: ExperimentName,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    pub config: PathBuf,
    /// Master seed, replacing the configured one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, replacing the configured one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for experiments; takes precedence over DPD_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Homogenization,
    Chaos,
    Occupation,
}

impl ExperimentName {
    fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Homogenization => "homogenization",
            ExperimentName::Chaos => "chaos",
            ExperimentName::Occupation => "occupation",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] dpd_core::Error),
    #[error("io error: {0}")]
    Io(#[from] IoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                dpd_core::Error::Config(_) | dpd_core::Error::Usage(_) | dpd_core::Error::LatticeTooLarge { .. } => 2,
                dpd_core::Error::Integration(_) | dpd_core::Error::Overflow(_) => 1,
            },
            CliError::Io(_) => 3,
        }
    }
}

/// What a successful command reports: a summary line and whether every
/// verdict held.
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Versions {
    dpd: &'static str,
    output_format: u32,
}

#[derive(Serialize)]
struct Truncation {
    epsilon: f64,
    k_max: usize,
    bound: f64,
    lattice_states: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated_mass: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    seed: u64,
    versions: Versions,
    scale: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<Truncation>,
    defaults: &'a [DefaultUsed],
    config: &'a RunConfig,
}

impl<'a> Metadata<'a> {
    fn new(command: &'a str, cfg: &'a RunConfig, defaults: &'a [DefaultUsed], resolved: &Resolved) -> Self {
        Metadata {
            command,
            seed: cfg.seed,
            versions: Versions { dpd: env!("CARGO_PKG_VERSION"), output_format: 1 },
            scale: resolved.scale.q(),
            kappa: None,
            truncation: None,
            defaults,
            config: cfg,
        }
    }
}

fn read_config(path: &Path) -> Result<(RunConfig, Vec<DefaultUsed>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError { path: path.to_path_buf(), source })?;
    Ok(parse_config(&text)?)
}

/// Applies flag and environment overrides: flags win over the environment,
/// which wins over the file.
fn load(args: &RunArgs, env_workers: Option<&str>) -> Result<(RunConfig, Vec<DefaultUsed>), CliError> {
    let (mut cfg, defaults) = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = out.to_string_lossy().into_owned();
    }
    if let Some(n) = args.workers {
        cfg.workers = Some(n);
    } else if let Some(text) = env_workers {
        let n = text
            .trim()
            .parse::<usize>()
            .map_err(|_| ConfigError { path: WORKERS_ENV.into(), message: format!("not a worker count: {text:?}") })?;
        cfg.workers = Some(n);
    }
    if cfg.workers == Some(0) {
        return Err(ConfigError { path: "workers".into(), message: "must be at least 1".into() }.into());
    }
    Ok((cfg, defaults))
}

fn measure(resolved: &Resolved) -> Result<InitialMeasure, CliError> {
    resolved.measure.clone().ok_or_else(|| {
        ConfigError { path: "initial.atoms".into(), message: "this command needs an initial product measure".into() }
            .into()
    })
}

fn kappa(cfg: &RunConfig, resolved: &Resolved) -> Result<f64, CliError> {
    Ok(cfg.lambda * resolved.space.collision_mass()?)
}

pub fn execute(command: Command, env_workers: Option<&str>) -> Result<Outcome, CliError> {
    match command {
        Command::Validate { config } => {
            let (cfg, defaults) = read_config(&config)?;
            Ok(Outcome {
                summary: format!(
                    "{}: valid ({} defaults applied, engine {})",
                    config.display(),
                    defaults.len(),
                    format!("{:?}", cfg.engine).to_lowercase()
                ),
                passed: true,
            })
        }
        Command::Simulate(args) => {
            let (cfg, defaults) = load(&args, env_workers)?;
            simulate(&cfg, &defaults)
        }
        Command::Solve(args) => {
            let (cfg, defaults) = load(&args, env_workers)?;
            solve(&cfg, &defaults)
        }
        Command::Experiment { name, run } => {
            let (cfg, defaults) = load(&run, env_workers)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers.unwrap_or(0))
                .build()
                .map_err(|e| ConfigError { path: "workers".into(), message: e.to_string() })?;
            pool.install(|| experiment(name, &cfg, &defaults))
        }
    }
}

fn simulate(cfg: &RunConfig, defaults: &[DefaultUsed]) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let (traj, engine) = match cfg.engine {
        EngineKind::Spatial => {
            let initial = match (&resolved.measure, &resolved.particles) {
                (Some(m), _) => Initial::Product { measure: m.clone(), positions: resolved.positions.clone() },
                (None, Some(ps)) => Initial::Particles(ps.clone()),
                (None, None) => unreachable!("resolve requires an initial condition"),
            };
            let mut sys = init_spatial(
                resolved.game.clone(),
                resolved.space.clone(),
                cfg.n,
                cfg.d,
                cfg.lambda,
                initial,
                cfg.seed,
            )?;
            (sys.run(cfg.horizon, &cfg.snapshot_times)?, "spatial")
        }
        EngineKind::Matching => {
            let initial = match (&resolved.measure, &resolved.particles) {
                (Some(m), _) => MatchingInitial::Product(m.clone()),
                (None, Some(ps)) => MatchingInitial::Particles(ps.clone()),
                (None, None) => unreachable!("resolve requires an initial condition"),
            };
            let base = kappa(cfg, &resolved)?;
            let mut sys = init_matching(resolved.game.clone(), cfg.n, base, cfg.slowed, initial, cfg.seed)?;
            (sys.run(cfg.horizon, &cfg.snapshot_times)?, "matching")
        }
        other => {
            return Err(ConfigError {
                path: "engine".into(),
                message: format!("simulate runs \"spatial\" or \"matching\", not {other:?}").to_lowercase(),
            }
            .into())
        }
    };
    let dir = PathBuf::from(&cfg.output);
    output::create_dir(&dir)?;
    output::write_file(&dir, "snapshots.csv", &output::snapshots_csv(&traj.snapshots, resolved.scale))?;
    let mut meta = Metadata::new("simulate", cfg, defaults, &resolved);
    if cfg.engine == EngineKind::Matching {
        meta.kappa = Some(kappa(cfg, &resolved)?);
    }
    output::write_file(&dir, "metadata.json", &output::json(&meta))?;
    let alive = traj.snapshots.last().map_or(0, |s| s.particles.iter().filter(|p| p.alive).count());
    Ok(Outcome {
        summary: format!(
            "simulate {engine}: N={} t={} moves={} games={} alive_at_last_snapshot={} -> {}",
            cfg.n,
            cfg.horizon,
            traj.counts.moves,
            traj.counts.total_games(),
            alive,
            dir.join("snapshots.csv").display()
        ),
        passed: true,
    })
}

fn lattice_params(cfg: &RunConfig, kappa: f64) -> LatticeParams {
    LatticeParams { horizon: cfg.horizon, kappa, epsilon: cfg.epsilon, max_states: cfg.max_states }
}

fn solve(cfg: &RunConfig, defaults: &[DefaultUsed]) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let nu = measure(&resolved)?;
    let kappa = kappa(cfg, &resolved)?;
    let model = MeanFieldModel::new(resolved.game.clone(), &nu, lattice_params(cfg, kappa))?;
    let state0 = model.initial_state(&nu)?;
    let states = model.integrate(&state0, cfg.dt, &cfg.snapshot_times)?;

    let dir = PathBuf::from(&cfg.output);
    output::create_dir(&dir)?;
    output::write_file(&dir, "meanfield.csv", &output::meanfield_csv(&model, &states, resolved.scale))?;
    let strategies = resolved.game.strategy_count();
    let truncated: Option<Vec<f64>> =
        states.last().map(|s| (0..strategies).map(|z| model.truncated_mass(s, z)).collect());
    let mut meta = Metadata::new("solve", cfg, defaults, &resolved);
    meta.kappa = Some(kappa);
    meta.truncation = Some(Truncation {
        epsilon: cfg.epsilon,
        k_max: model.lattice().k_max(),
        bound: model.lattice().truncation_bound(),
        lattice_states: model.lattice().len(),
        truncated_mass: truncated.clone(),
    });
    output::write_file(&dir, "metadata.json", &output::json(&meta))?;
    Ok(Outcome {
        summary: format!(
            "solve: kappa={kappa} states={} snapshots={} truncated_mass={} -> {}",
            model.lattice().len(),
            states.len(),
            truncated.map_or(0.0, |t| t.iter().sum::<f64>()),
            dir.join("meanfield.csv").display()
        ),
        passed: true,
    })
}

fn experiment(name: ExperimentName, cfg: &RunConfig, defaults: &[DefaultUsed]) -> Result<Outcome, CliError> {
    let resolved = cfg.resolve()?;
    let e = &cfg.experiment;
    let mut meta = Metadata::new(name.as_str(), cfg, defaults, &resolved);
    let report: ExperimentReport = match name {
        ExperimentName::Homogenization => homogenization_experiment(&HomogenizationConfig {
            game: resolved.game.clone(),
            space: resolved.space.clone(),
            initial: measure(&resolved)?,
            scale: resolved.scale,
            n: cfg.n,
            lambda: cfg.lambda,
            horizon: cfg.horizon,
            d_grid: e.d_grid.clone(),
            replicas: cfg.replicas,
            bootstrap: e.bootstrap,
            z: e.z,
            seed: cfg.seed,
        })?,
        ExperimentName::Chaos => {
            let nu = measure(&resolved)?;
            let kappa = kappa(cfg, &resolved)?;
            let lattice = build_lattice(&resolved.game, &nu, lattice_params(cfg, kappa))?;
            meta.kappa = Some(kappa);
            meta.truncation = Some(Truncation {
                epsilon: cfg.epsilon,
                k_max: lattice.k_max(),
                bound: lattice.truncation_bound(),
                lattice_states: lattice.len(),
                truncated_mass: None,
            });
            let threshold = resolved.threshold.expect("threshold defaults from the atoms");
            chaos_experiment(&ChaosConfig {
                game: resolved.game.clone(),
                initial: nu,
                scale: resolved.scale,
                kappa,
                horizon: cfg.horizon,
                n_grid: e.n_grid.clone(),
                replicas: cfg.replicas,
                threshold,
                dt: cfg.dt,
                epsilon: cfg.epsilon,
                max_states: cfg.max_states,
                spot: cfg.spot(),
                slope_range: (e.slope_range[0], e.slope_range[1]),
                bootstrap: e.bootstrap,
                z: e.z,
                seed: cfg.seed,
            })?
        }
        ExperimentName::Occupation => {
            let sites =
                e.sites.clone().unwrap_or_else(|| (0..resolved.space.vertex_count()).map(|v| vec![v]).collect());
            occupation_experiment(&OccupationConfig {
                space: resolved.space.clone(),
                d: cfg.d,
                horizon: cfg.horizon,
                sites,
                tolerance: e.tolerance,
                batches: e.batches,
                seed: cfg.seed,
            })?
        }
    };

    let dir = PathBuf::from(&cfg.output);
    output::create_dir(&dir)?;
    let csv_name = format!("{}.csv", name.as_str());
    output::write_file(&dir, &csv_name, &output::report_csv(&report))?;
    output::write_file(&dir, "report.json", &output::json(&report))?;
    output::write_file(&dir, "metadata.json", &output::json(&meta))?;
    let failed: Vec<&str> = report.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
    let status = if failed.is_empty() { "PASS".to_string() } else { format!("FAIL ({})", failed.join(", ")) };
    Ok(Outcome {
        summary: format!(
            "experiment {}: {} cells, {} verdicts, {status} -> {}",
            name.as_str(),
            report.cells.len(),
            report.verdicts.len(),
            dir.join(csv_name).display()
        ),
        passed: report.passed(),
    })
}
