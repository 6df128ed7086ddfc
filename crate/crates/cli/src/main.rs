use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tobitm::ErrorFamily;
use tobitm_cli::{
    bootstrap_command, fit_command, simulate_command, BootstrapRequest, CliError, CliResult, DataSource, FitRequest,
    OptimizerOverrides, Roles, SimulateRequest, THREADS_ENV,
};

#[derive(Parser)]
#[command(name = "tobitm", version, about = "Two-stage robust M-estimation for censored regression with an endogenous regressor")]
struct Cli {
    /// Worker threads (default: $TOBITM_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV file and print a JSON report.
    Fit(FitArgs),
    /// Run the simulation design and write a bias/MSE table.
    Simulate(SimulateArgs),
    /// Pairs-bootstrap mean squared error on a CSV file.
    Bootstrap(BootstrapArgs),
}

#[derive(Args)]
struct OptArgs {
    /// Relative tolerance on simplex function values.
    #[arg(long = "nm-ftol")]
    nm_ftol: Option<f64>,
    /// Iteration cap per simplex search.
    #[arg(long = "nm-maxit")]
    nm_maxit: Option<usize>,
    /// Restarts after the first simplex search.
    #[arg(long = "nm-restarts")]
    nm_restarts: Option<usize>,
}

impl OptArgs {
    fn overrides(&self) -> OptimizerOverrides {
        OptimizerOverrides { f_tol: self.nm_ftol, max_iters: self.nm_maxit, restarts: self.nm_restarts }
    }
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    /// Exogenous regressors, comma separated; an intercept is always added.
    #[arg(long, value_delimiter = ',', required = true)]
    exog: Vec<String>,
    #[arg(long)]
    endog: String,
    #[arg(long)]
    instrument: String,
    /// Censoring threshold of the response.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Standardize regressors and scale the response by its standard deviation.
    #[arg(long)]
    standardize: bool,
}

impl DataArgs {
    fn source(&self) -> DataSource {
        let roles = Roles {
            response: self.response.clone(),
            exogenous: self.exog.clone(),
            endogenous: self.endog.clone(),
            instrument: self.instrument.clone(),
        };
        DataSource::new(self.data.clone(), &roles, self.threshold, self.standardize)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// clad | wme:d=<v> | logcosh
    #[arg(long, default_value = "clad")]
    loss: String,
    #[arg(long = "ci-level", default_value_t = 0.95)]
    ci_level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    opt: OptArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Loss specs (repeatable, or `all`).
    #[arg(long, default_value = "all")]
    loss: Vec<String>,
    /// Error families (comma separated, or `all`).
    #[arg(long, value_delimiter = ',', default_value = "all")]
    family: Vec<String>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also report Wald coverage at this level.
    #[arg(long = "ci-level")]
    ci_level: Option<f64>,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Loss specs (repeatable, or `all`).
    #[arg(long, default_value = "clad")]
    loss: Vec<String>,
    /// Resample counts, comma separated.
    #[arg(long = "B", value_delimiter = ',', default_value = "500")]
    b: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn expand_losses(specs: &[String]) -> Vec<String> {
    if specs.iter().any(|s| s == "all") {
        vec!["clad".into(), "wme:d=1.35".into(), "logcosh".into()]
    } else {
        specs.to_vec()
    }
}

fn families(names: &[String]) -> CliResult<Vec<ErrorFamily>> {
    if names.iter().any(|s| s == "all") {
        return Ok(ErrorFamily::ALL.to_vec());
    }
    names.iter().map(|s| s.parse::<ErrorFamily>().map_err(CliError::from)).collect()
}

fn emit(output: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Fit(a) => {
            let req = FitRequest {
                data: a.data.source(),
                loss: a.loss,
                ci_level: a.ci_level,
                optimizer: a.opt.overrides(),
                seed: a.seed,
            };
            let report = fit_command(&req)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            emit(&a.output, &text)
        }
        Command::Simulate(a) => {
            let req = SimulateRequest {
                losses: expand_losses(&a.loss),
                families: families(&a.family)?,
                ns: a.n,
                reps: a.reps,
                seed: a.seed,
                optimizer: a.opt.overrides(),
                ci_level: a.ci_level,
            };
            emit(&a.output, &simulate_command(&req)?)
        }
        Command::Bootstrap(a) => {
            let req = BootstrapRequest {
                data: a.data.source(),
                losses: expand_losses(&a.loss),
                resamples: a.b,
                seed: a.seed,
                optimizer: a.opt.overrides(),
            };
            emit(&a.output, &bootstrap_command(&req)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
