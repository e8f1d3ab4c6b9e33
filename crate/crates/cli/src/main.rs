use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use worknet::runner::{
    execute, figure_preset, parse_config, parse_values, run_single, ExecOptions, ExecReport,
    Parsed, RunnerError,
};

/// Simulate reinforcement-learned work distribution on a layered lattice.
#[derive(Parser, Debug)]
#[command(name = "worknet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One simulation; writes timeseries, profile and snapshot CSVs.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "worknet-out")]
        out_dir: PathBuf,
    },
    /// A parameter grid over several seeds; list values (`0.1,0.2`,
    /// `logspace(0.01,1,20)`, `1..10`) turn a parameter into an axis.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Seed list, e.g. `1..10`.
        #[arg(long)]
        seeds: Option<String>,
        /// Observables to aggregate, e.g. `depth,failure_fraction`.
        #[arg(long)]
        observables: Option<String>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// The data behind one of the figures (1 to 8).
    Figure {
        n: u32,
        /// Iterations per run instead of the preset's.
        #[arg(long)]
        iters: Option<u64>,
        #[arg(long)]
        seeds: Option<String>,
        /// Collapse exponents `a,b,c`: x = β·Q^a·Lz^b, y = depth / Lz^c.
        #[arg(long)]
        rescale: Option<String>,
        #[command(flatten)]
        exec: ExecArgs,
    },
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Flat `key = value` file; flags given here win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "d")]
    d: Option<String>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long = "Lz")]
    lz: Option<String>,
    #[arg(long = "Q")]
    q: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `working-managers` or `non-working-managers`.
    #[arg(long)]
    variant: Option<String>,
    /// `per-unit` or `batch`.
    #[arg(long)]
    update_mode: Option<String>,
    /// Trailing iterations used for profiles and depth statistics.
    #[arg(long)]
    window: Option<String>,
}

impl ModelArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        [
            ("d", &self.d),
            ("L", &self.l),
            ("Lz", &self.lz),
            ("Q", &self.q),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("iters", &self.iters),
            ("seed", &self.seed),
            ("variant", &self.variant),
            ("update_mode", &self.update_mode),
            ("window", &self.window),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

#[derive(Args, Debug)]
struct ExecArgs {
    #[arg(long, default_value = "worknet-out")]
    out_dir: PathBuf,
    /// Grid points run at once; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl ExecArgs {
    fn options(&self) -> ExecOptions {
        ExecOptions::new(&self.out_dir).with_workers(self.workers)
    }
}

fn seed_list(text: &str) -> Result<Vec<u64>, RunnerError> {
    let bad = |message: String| RunnerError::Value {
        key: "seeds".into(),
        message,
    };
    let (items, _) = parse_values(text).map_err(bad)?;
    items
        .iter()
        .map(|s| s.parse().map_err(|_| bad(format!("`{s}` is not a seed"))))
        .collect()
}

fn report(report: &ExecReport, dir: &Path) {
    println!(
        "{} runs over {} grid points in {:.2?}; {} errored; output in {}",
        report.runs.len(),
        report.rows.len(),
        report.wall_time,
        report.n_errors(),
        dir.display()
    );
}

fn dispatch(command: Command) -> Result<(), RunnerError> {
    match command {
        Command::Run { model, out_dir } => {
            let config = match parse_config(model.config.as_deref(), &model.overrides())? {
                Parsed::Run(config) => config,
                Parsed::Sweep(_) => {
                    return Err(RunnerError::Value {
                        key: "run".into(),
                        message: "list values describe a sweep; use `worknet sweep`".into(),
                    })
                }
            };
            let summary = run_single(&config, &out_dir)?;
            let depth = summary.depth_stats();
            println!(
                "{} iterations; final flow {}; mean depth {:.3}; failure fraction {:.3}; output in {}",
                summary.iterations(),
                summary.flow.last().copied().unwrap_or(0.0),
                depth.mean_depth,
                depth.failure_fraction,
                out_dir.display()
            );
        }
        Command::Sweep {
            model,
            seeds,
            observables,
            exec,
        } => {
            let mut overrides = model.overrides();
            if let Some(seeds) = seeds {
                overrides.push(("seeds".into(), seeds));
            }
            if let Some(observables) = observables {
                overrides.push(("observables".into(), observables));
            }
            let spec = parse_config(model.config.as_deref(), &overrides)?.into_sweep();
            let result = execute(&spec, &exec.options())?;
            report(&result, &exec.out_dir);
        }
        Command::Figure {
            n,
            iters,
            seeds,
            rescale,
            exec,
        } => {
            let mut spec = figure_preset(n)?;
            if let Some(iters) = iters {
                spec.base.iterations = iters;
            }
            if let Some(seeds) = seeds {
                spec.seeds = seed_list(&seeds)?;
            }
            if let Some(text) = rescale {
                let exps: Vec<f64> = text
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| RunnerError::Value {
                        key: "rescale".into(),
                        message: format!("expected a,b,c, got `{text}`"),
                    })?;
                let [a, b, c] = exps[..] else {
                    return Err(RunnerError::Value {
                        key: "rescale".into(),
                        message: format!("expected three exponents, got {}", exps.len()),
                    });
                };
                spec.rescale = Some(worknet::measures::Rescale { a, b, c });
            }
            let result = execute(&spec, &exec.options())?;
            report(&result, &exec.out_dir);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
