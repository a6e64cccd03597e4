use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use archfit::diagnostics::{stationarity_report, DiagnosticOptions};
use archfit::estimators::{fit_ef, fit_ef_from, fit_ls, fit_ml, fit_qml};
use archfit::influence::{influence_report, Contamination};
use archfit::io::{read_series, to_json, write_output, write_series};
use archfit::montecarlo::{run_experiment, McReport};
use archfit::{
    ArchError, ArchParams64, Estimate64, EstimatorKind, ExperimentConfig64, InnovationDist, OptimOptions, Series64,
    SimSpec,
};

#[derive(Parser)]
#[command(name = "archfit", version, about = "Estimation and diagnostics for ARCH(p) models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ARCH(p) series and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit one or all estimators to a series file.
    Fit(FitArgs),
    /// Stationarity and moment-condition checks for a parameter vector.
    Diagnose(DiagnoseArgs),
    /// Influence functions of LS and EF under a contamination.
    Influence(InfluenceArgs),
    /// Replicated simulation study of the estimators.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    omega: f64,
    /// Comma-separated `alpha_1,...,alpha_p`.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    alpha: Vec<f64>,
    /// normal, t<nu>, laplace, logistic or gamma:<shape>.
    #[arg(long, default_value = "normal")]
    dist: InnovationDist,
}

impl ParamArgs {
    fn params(&self) -> archfit::Result<ArchParams64> {
        ArchParams64::new(self.omega, self.alpha.clone())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, env = "ARCHFIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = archfit::model::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorChoice {
    Ls,
    Ef,
    Qml,
    Ml,
    All,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = OptimOptions::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = OptimOptions::default().grad_tol)]
    grad_tol: f64,
    #[arg(long, default_value_t = OptimOptions::default().param_tol)]
    param_tol: f64,
    #[arg(long, default_value_t = OptimOptions::default().multistart)]
    multistart: usize,
}

impl OptimArgs {
    fn options(&self) -> OptimOptions {
        OptimOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            param_tol: self.param_tol,
            multistart: self.multistart,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long, default_value_t = 1)]
    p: usize,
    #[arg(long, value_enum, default_value = "all")]
    estimator: EstimatorChoice,
    /// Innovation law assumed by ML.
    #[arg(long, default_value = "normal")]
    dist: InnovationDist,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    model: ParamArgs,
    #[arg(long, default_value_t = DiagnosticOptions::default().horizon)]
    horizon: usize,
    #[arg(long, default_value_t = DiagnosticOptions::default().reps)]
    reps: usize,
    #[arg(long, default_value_t = DiagnosticOptions::default().mc_samples)]
    mc_samples: usize,
    #[arg(long, env = "ARCHFIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InfluenceArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long, default_value_t = 1)]
    p: usize,
    /// JSON file with a contamination `{"v": [[...], ...], "description": ...}`.
    #[arg(long, conflicts_with_all = ["point", "self_scaling"])]
    contamination: Option<PathBuf>,
    /// Index (from 0) of a single contaminated response.
    #[arg(long)]
    point: Option<usize>,
    /// Size of the point contamination.
    #[arg(long, default_value_t = 100.0, allow_hyphen_values = true)]
    magnitude: f64,
    /// Contaminate with the data itself (`V = S`).
    #[arg(long = "self", conflicts_with = "point")]
    self_scaling: bool,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON or TOML experiment configuration; replaces the design flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long = "n", value_delimiter = ',', default_value = "50,500")]
    n_values: Vec<usize>,
    /// Slope values; each gives an ARCH(1) design cell with `omega0`.
    #[arg(long, value_delimiter = ',', conflicts_with = "theta0")]
    alpha0: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    /// Full `omega,alpha_1,...,alpha_p` for a single parameter cell.
    #[arg(long, value_delimiter = ',')]
    theta0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "normal")]
    dist: Vec<InnovationDist>,
    #[arg(long, value_delimiter = ',', default_value = "ls,ml,qml,ef")]
    estimators: Vec<EstimatorKind>,
    #[arg(long, env = "ARCHFIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = archfit::model::DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Drop QML/ML replications that did not converge.
    #[arg(long)]
    exclude_nonconverged: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<ArchError> for Failure {
    fn from(e: ArchError) -> Self {
        let code = match e {
            ArchError::Domain(_) | ArchError::Parse(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Influence(a) => influence_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit<V: Serialize + ?Sized>(output: Option<&std::path::Path>, value: &V) -> CliResult {
    let mut text = to_json(value)?;
    text.push('\n');
    Ok(write_output(output, &text)?)
}

fn simulate_cmd(a: SimulateArgs) -> CliResult {
    let spec = SimSpec::new(a.model.params()?, a.model.dist, a.n, a.seed).with_burn_in(a.burn_in);
    let series: Series64 = archfit::model::simulate(&spec)?;
    match a.output {
        Some(path) => write_series(&path, &series)?,
        None => write_output(None, &archfit::io::series_to_csv(&series))?,
    }
    Ok(())
}

fn fit_cmd(a: FitArgs) -> CliResult {
    let series: Series64 = read_series(&a.input)?;
    let opts = a.optim.options();
    let one = |kind: EstimatorKind| -> archfit::Result<Estimate64> {
        match kind {
            EstimatorKind::Ls => fit_ls(&series, a.p),
            EstimatorKind::Ef => fit_ef(&series, a.p),
            EstimatorKind::Qml => fit_qml(&series, a.p, &opts),
            EstimatorKind::Ml => fit_ml(&series, a.p, &a.dist, &opts),
        }
    };
    let chosen = match a.estimator {
        EstimatorChoice::Ls => EstimatorKind::Ls,
        EstimatorChoice::Ef => EstimatorKind::Ef,
        EstimatorChoice::Qml => EstimatorKind::Qml,
        EstimatorChoice::Ml => EstimatorKind::Ml,
        EstimatorChoice::All => {
            let ls = fit_ls(&series, a.p)?;
            let ef = fit_ef_from(&series, &ls.params())?;
            let records = vec![ls, one(EstimatorKind::Ml)?, one(EstimatorKind::Qml)?, ef];
            return emit(a.output.as_deref(), &records);
        }
    };
    emit(a.output.as_deref(), &one(chosen)?)
}

fn diagnose_cmd(a: DiagnoseArgs) -> CliResult {
    let opts = DiagnosticOptions { horizon: a.horizon, reps: a.reps, mc_samples: a.mc_samples, seed: a.seed };
    let report = stationarity_report(&a.model.params()?, &a.model.dist, &opts)?;
    emit(a.output.as_deref(), &report)
}

fn influence_cmd(a: InfluenceArgs) -> CliResult {
    let series: Series64 = read_series(&a.input)?;
    let c: Contamination<f64> = if let Some(path) = &a.contamination {
        let text = std::fs::read_to_string(path).map_err(ArchError::from)?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    } else if a.self_scaling {
        Contamination::self_scaling(&series, a.p)
    } else if let Some(k) = a.point {
        if k < a.p || k >= series.len() {
            return Err(usage(format!("--point must lie in {}..{}", a.p, series.len())));
        }
        Contamination::point_mass(series.len(), a.p, k, a.magnitude)
    } else {
        return Err(usage("one of --contamination, --point or --self is required"));
    };
    emit(a.output.as_deref(), &influence_report(&series, &c, a.p, a.delta)?)
}

fn experiment_cmd(a: ExperimentArgs) -> CliResult {
    let cells = experiment_cells(&a)?;
    let started = Instant::now();
    let mut reports: Vec<McReport<f64>> = Vec::new();
    let mut failed_cells = Vec::new();
    for cfg in &cells {
        match run_experiment(cfg) {
            Ok(r) => {
                for f in &r.failures {
                    eprintln!(
                        "note: {} {} n={}: {} failed, {} not converged",
                        cfg.dist, f.estimator, f.n, f.failed, f.nonconverged
                    );
                }
                reports.push(r);
            }
            Err(e) => {
                eprintln!("error: cell dist={} theta0={:?}: {e}", cfg.dist, cfg.theta0.theta());
                failed_cells.push(e);
            }
        }
    }
    eprintln!("experiment: {} of {} cells done in {:.2}s", reports.len(), cells.len(), started.elapsed().as_secs_f64());

    let text = match a.format {
        Format::Json if cells.len() == 1 && !reports.is_empty() => to_json(&reports[0])? + "\n",
        Format::Json => to_json(&reports)? + "\n",
        Format::Csv if cells.len() == 1 => reports.first().map(McReport::to_csv).unwrap_or_default(),
        Format::Csv => merged_csv(&reports),
    };
    write_output(a.output.as_deref(), &text)?;
    match failed_cells.len() {
        0 => Ok(()),
        k => Err(Failure { code: 1, message: format!("{k} of {} cells failed", cells.len()) }),
    }
}

fn experiment_cells(a: &ExperimentArgs) -> std::result::Result<Vec<ExperimentConfig64>, Failure> {
    let optim = a.optim.options();
    let with_flags = |mut cfg: ExperimentConfig64| {
        cfg.workers = a.workers.or(cfg.workers);
        cfg
    };
    if let Some(path) = &a.config {
        return Ok(vec![with_flags(ExperimentConfig64::from_path(path)?)]);
    }
    let thetas: Vec<ArchParams64> = if !a.theta0.is_empty() {
        if a.theta0.len() < 2 {
            return Err(usage("--theta0 needs omega and at least one alpha"));
        }
        vec![ArchParams64::from_theta(&a.theta0)?]
    } else if !a.alpha0.is_empty() {
        a.alpha0.iter().map(|&al| ArchParams64::new(a.omega0, vec![al])).collect::<archfit::Result<_>>()?
    } else {
        return Err(usage("one of --theta0, --alpha0 or --config is required"));
    };
    let mut cells = Vec::new();
    for dist in &a.dist {
        for theta in &thetas {
            let mut cfg = ExperimentConfig64::new(theta.clone(), *dist, a.n_values.clone(), a.reps, a.seed)
                .with_estimators(a.estimators.clone())
                .with_workers(a.workers);
            cfg.burn_in = a.burn_in;
            cfg.include_nonconverged = !a.exclude_nonconverged;
            cfg.optim = optim.clone();
            cfg.validate()?;
            cells.push(cfg);
        }
    }
    Ok(cells)
}

/// One CSV for several cells, prefixed with the cell's law and `theta0`.
fn merged_csv(reports: &[McReport<f64>]) -> String {
    let mut out = format!("dist,theta0,{}\n", McReport::<f64>::CSV_HEADER);
    for r in reports {
        let theta: Vec<String> = r.config.theta0.theta().iter().map(|v| v.to_string()).collect();
        for line in r.csv_rows() {
            out.push_str(&format!("{},{},{}\n", r.config.dist, theta.join(";"), line));
        }
    }
    out
}
