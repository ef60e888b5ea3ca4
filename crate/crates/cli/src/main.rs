//! `mahb`: run single solves, Monte-Carlo sweeps and grid-search bounds for
//! movable sub-array hybrid beamforming.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ma_hybrid::baselines::{
    run_scheme, solve_fpa_full_observed, BaselineKind, SearchMode,
};
use ma_hybrid::channel::{sample_scenario, ChannelScenario, GainVariance, PreparedScenario};
use ma_hybrid::harness::{
    emit_results, emit_trials, run_experiment, trial_seeds, write_results, ExperimentConfig,
    OutputFormat, Sweep, TrialStatus,
};
use ma_hybrid::orchestrator::{solve_prepared, IterationRecord, RunResult, SolverConfig};
use ma_hybrid::units::dbm_to_watts;
use ma_hybrid::Error;

#[derive(Parser, Debug)]
#[command(name = "mahb", version, about = "Movable sub-array hybrid beamforming simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent). Sweeps also write `<stem>.trials.<ext>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Comma-separated schemes: fpa-sub, fpa-full, ma-sub, upper-bound.
    #[arg(long, global = true, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Per-iteration JSON lines for `solve` and `replay`.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Random restarts per solve; the best final rate is kept.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Transmit power budget when power is not swept (dBm).
    #[arg(long, global = true, allow_hyphen_values = true)]
    power_dbm: Option<f64>,
    /// Path-gain variance convention.
    #[arg(long, global = true, value_enum)]
    gain_variance: Option<Variance>,
    /// Record wall-clock seconds (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one sampled scenario and print the result as JSON.
    Solve {
        #[arg(long, default_value = "ma-sub")]
        scheme: String,
        /// Also save the sampled scenario.
        #[arg(long)]
        scenario_out: Option<PathBuf>,
    },
    /// Sum rate against the power budget.
    SweepPower {
        /// Comma-separated budgets in dBm.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        powers: Option<Vec<f64>>,
    },
    /// Sum rate against the frame size.
    SweepRegion {
        /// Comma-separated frame sizes in wavelengths.
        #[arg(long, value_delimiter = ',')]
        regions: Option<Vec<f64>>,
    },
    /// Grid-search bound next to the proposed scheme.
    UpperBound {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run a scheme on a saved scenario and print the result as JSON.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "ma-sub")]
        scheme: String,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid points per axis in each region.
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, value_enum)]
    grid_mode: Option<Mode>,
    /// Maximum number of inner solves.
    #[arg(long)]
    grid_budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variance {
    AmplitudeSquared,
    PowerGain,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Joint,
    CoordinateWise,
}

fn parse_scheme(s: &str) -> Result<BaselineKind, Error> {
    s.trim().parse()
}

fn build_config(g: &Global) -> Result<ExperimentConfig, Error> {
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = g.seed {
        c.master_seed = v;
    }
    if let Some(v) = g.trials {
        c.trials = v;
    }
    if let Some(v) = &g.out {
        c.out = Some(v.clone());
    }
    if let Some(f) = g.format {
        c.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(list) = &g.schemes {
        c.schemes = list.iter().map(|s| parse_scheme(s)).collect::<Result<_, _>>()?;
    }
    if let Some(v) = g.workers {
        c.workers = v;
    }
    if let Some(v) = g.restarts {
        c.solver.restarts = v;
    }
    if let Some(v) = g.power_dbm {
        c.power_dbm = v;
    }
    if let Some(v) = g.gain_variance {
        c.scenario.gain_variance = match v {
            Variance::AmplitudeSquared => GainVariance::AmplitudeSquared,
            Variance::PowerGain => GainVariance::PowerGain,
        };
    }
    c.timing |= g.timing;
    Ok(c)
}

struct TraceSink {
    out: Option<BufWriter<File>>,
    path: PathBuf,
    error: Option<std::io::Error>,
}

impl TraceSink {
    fn open(path: Option<&Path>) -> Result<Self, Error> {
        let out = match path {
            Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?)),
            None => None,
        };
        Ok(TraceSink {
            out,
            path: path.map(Path::to_path_buf).unwrap_or_default(),
            error: None,
        })
    }

    fn record(&mut self, rec: &IterationRecord) {
        if let (Some(w), None) = (&mut self.out, &self.error) {
            let line = serde_json::to_string(rec).expect("records serialize");
            if let Err(e) = writeln!(w, "{line}") {
                self.error = Some(e);
            }
        }
    }

    fn finish(self) -> Result<(), Error> {
        let io = |e| Error::Io {
            path: self.path.clone(),
            source: e,
        };
        if let Some(e) = self.error {
            return Err(io(e));
        }
        if let Some(mut w) = self.out {
            w.flush().map_err(io)?;
        }
        Ok(())
    }
}

fn solve_one(
    kind: BaselineKind,
    scenario: &ChannelScenario,
    config: &ExperimentConfig,
    solver_seed: u64,
    trace: Option<&Path>,
) -> Result<RunResult, Error> {
    let prepared: PreparedScenario = scenario.prepare()?;
    let solver = SolverConfig {
        max_power: dbm_to_watts(config.power_dbm),
        seed: solver_seed,
        ..config.solver.clone()
    };
    let mut sink = TraceSink::open(trace)?;
    let res = match kind {
        BaselineKind::MaSub | BaselineKind::FpaSub => {
            let cfg = SolverConfig {
                move_subarrays: kind == BaselineKind::MaSub,
                ..solver
            };
            solve_prepared(&prepared, &cfg, &mut |r| sink.record(r))?
        }
        BaselineKind::FpaFull => solve_fpa_full_observed(&prepared, &solver, &mut |r| sink.record(r))?,
        BaselineKind::UpperBound => {
            if trace.is_some() {
                return Err(Error::Config("tracing is not available for upper-bound".into()));
            }
            run_scheme(kind, &prepared, &solver, &config.grid)?
        }
    };
    sink.finish()?;
    Ok(res)
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn result_json(kind: BaselineKind, scenario: &ChannelScenario, res: &RunResult) -> Result<serde_json::Value, Error> {
    Ok(serde_json::json!({
        "scheme": kind,
        "scenario_hash": scenario.content_hash(),
        "result": serde_json::to_value(res)?,
    }))
}

fn trials_path(out: &Path, format: OutputFormat) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    out.with_file_name(format!("{stem}.trials.{ext}"))
}

fn run_sweep(config: &ExperimentConfig) -> Result<(), Error> {
    let res = run_experiment(config)?;
    for r in res.trials.iter().filter(|r| r.status == TrialStatus::Failed) {
        eprintln!(
            "warning: {} trial {} at {} failed: {}",
            r.scheme, r.trial, r.sweep_value, r.error
        );
    }
    match &config.out {
        Some(p) => {
            emit_results(&res.aggregate, config.format, p)?;
            emit_trials(&res.trials, config.format, &trials_path(p, config.format))?;
        }
        None => write_results(&res.aggregate, config.format, std::io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = build_config(&cli.global)?;
    let trace = cli.global.trace.as_deref();
    match cli.command {
        Command::Solve { scheme, scenario_out } => {
            let kind = parse_scheme(&scheme)?;
            config.validate()?;
            let seeds = trial_seeds(config.master_seed, 0);
            let scenario = sample_scenario(&config.scenario, seeds.scenario)?;
            if let Some(p) = &scenario_out {
                scenario.save(p)?;
            }
            let res = solve_one(kind, &scenario, &config, seeds.solver, trace)?;
            write_json(&result_json(kind, &scenario, &res)?, config.out.as_deref())
        }
        Command::Replay { scenario, scheme } => {
            let kind = parse_scheme(&scheme)?;
            config.validate()?;
            let sc = ChannelScenario::load(&scenario)?;
            let seeds = trial_seeds(config.master_seed, 0);
            let res = solve_one(kind, &sc, &config, seeds.solver, trace)?;
            write_json(&result_json(kind, &sc, &res)?, config.out.as_deref())
        }
        Command::SweepPower { powers } => {
            config.sweep = match (powers, &config.sweep) {
                (Some(v), _) => Sweep::Power(v),
                (None, Sweep::Power(v)) => Sweep::Power(v.clone()),
                (None, _) => Sweep::Power(vec![0.0, 5.0, 10.0, 15.0]),
            };
            run_sweep(&config)
        }
        Command::SweepRegion { regions } => {
            config.sweep = match (regions, &config.sweep) {
                (Some(v), _) => Sweep::Region(v),
                (None, Sweep::Region(v)) => Sweep::Region(v.clone()),
                (None, _) => Sweep::Region(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]),
            };
            run_sweep(&config)
        }
        Command::UpperBound { grid } => {
            if cli.global.schemes.is_none() {
                config.schemes = vec![BaselineKind::MaSub, BaselineKind::UpperBound];
            }
            if let Some(p) = grid.grid_points {
                config.grid.points_per_axis = p;
            }
            if let Some(m) = grid.grid_mode {
                config.grid.mode = match m {
                    Mode::Joint => SearchMode::Joint,
                    Mode::CoordinateWise => SearchMode::CoordinateWise,
                };
            }
            if let Some(b) = grid.grid_budget {
                config.grid.budget = b;
            }
            config.sweep = Sweep::None;
            run_sweep(&config)
        }
    }
}

/// 0 on success, 1 for configuration and I/O errors, 2 for runtime failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TrialFailures { .. } | Error::Solver(_) => 2,
        Error::Iteration { .. } if !e.is_config() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
