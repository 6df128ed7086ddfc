//! The `fit`, `simulate` and `bootstrap` commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tobitm::covariance::{self, standard_errors};
use tobitm::monte_carlo::{grid_seed, PARAM_NAMES};
use tobitm::{
    bootstrap_bmse, fit, run_experiment, DgpConfig, ErrorFamily, LossRegistry, LossSpec64, SimOptions,
    SimplexConfig64,
};

use crate::error::{CliError, CliResult};
use crate::io::{dataset_from_columns, read_columns, standardize, Roles};
use crate::SCHEMA_VERSION;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Optional overrides of the simplex defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OptimizerOverrides {
    pub f_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub restarts: Option<usize>,
}

impl OptimizerOverrides {
    pub fn config(&self) -> CliResult<SimplexConfig64> {
        let mut cfg = SimplexConfig64::default();
        if let Some(v) = self.f_tol {
            cfg.f_tol = v;
        }
        if self.max_iters.is_some() {
            cfg.max_iters = self.max_iters;
        }
        if let Some(v) = self.restarts {
            cfg.n_restarts = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_loss(spec: &str) -> CliResult<LossSpec64> {
    Ok(LossRegistry::new().parse(spec)?)
}

/// Hex SHA-256 of the request's JSON form, truncated to 16 characters.
pub fn config_hash<S: Serialize>(request: &S) -> String {
    let json = serde_json::to_vec(request).expect("requests serialize");
    Sha256::digest(&json).iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `# tobitm <version> seed=<seed> config=<hash>`.
pub fn metadata_line<S: Serialize>(seed: u64, request: &S) -> String {
    format!("# tobitm {VERSION} seed={seed} config={}", config_hash(request))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSource {
    pub csv_path: PathBuf,
    pub roles: RolesJson,
    pub threshold: f64,
    /// Z-score the regressors and divide the response by its standard deviation.
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolesJson {
    pub response: String,
    pub exogenous: Vec<String>,
    pub endogenous: String,
    pub instrument: String,
}

impl From<&Roles> for RolesJson {
    fn from(r: &Roles) -> Self {
        Self {
            response: r.response.clone(),
            exogenous: r.exogenous.clone(),
            endogenous: r.endogenous.clone(),
            instrument: r.instrument.clone(),
        }
    }
}

impl DataSource {
    pub fn new(csv_path: PathBuf, roles: &Roles, threshold: f64, standardize: bool) -> Self {
        Self { csv_path, roles: roles.into(), threshold, standardize }
    }

    pub fn roles(&self) -> Roles {
        Roles {
            response: self.roles.response.clone(),
            exogenous: self.roles.exogenous.clone(),
            endogenous: self.roles.endogenous.clone(),
            instrument: self.roles.instrument.clone(),
        }
    }

    /// Loads the dataset; also returns the scales when standardizing.
    pub fn load(&self) -> CliResult<(tobitm::Dataset64, Option<Vec<f64>>)> {
        let file = std::fs::File::open(&self.csv_path)
            .map_err(|e| CliError::Io { path: self.csv_path.display().to_string(), message: e.to_string() })?;
        let mut cols = read_columns(file, &self.roles(), &self.csv_path)?;
        let mut c = self.threshold;
        let scales = if self.standardize { Some(standardize(&mut cols, &mut c)?) } else { None };
        Ok((dataset_from_columns(&cols, c)?, scales))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRequest {
    pub data: DataSource,
    pub loss: String,
    pub ci_level: f64,
    pub optimizer: OptimizerOverrides,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub path: String,
    pub n: usize,
    pub censored: usize,
    pub censoring_fraction: f64,
    pub threshold: f64,
    pub standardized: bool,
    /// Standard deviations used for scaling, response first.
    pub scales: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct LossSummary {
    pub name: String,
    pub label: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Estimate {
    pub name: String,
    pub estimate: f64,
}

#[derive(Debug, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Standard error ignoring first-stage estimation.
    pub se_unadjusted: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CovarianceSummary {
    pub beta_cov: Vec<Vec<f64>>,
    pub adjustment: Vec<Vec<f64>>,
    pub bandwidth: Option<f64>,
    pub joint_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct OptimizerSummary {
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub starts: usize,
    pub failed_starts: usize,
    pub searches: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub restarts: usize,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub data: DataSummary,
    pub loss: LossSummary,
    pub first_stage: Vec<Estimate>,
    pub coefficients: Vec<Coefficient>,
    pub ci_level: f64,
    pub objective: f64,
    pub score_norm: f64,
    pub covariance: Option<CovarianceSummary>,
    pub covariance_error: Option<String>,
    pub optimizer: OptimizerSummary,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn fit_command(req: &FitRequest) -> CliResult<FitReport> {
    covariance::normal_quantile(req.ci_level).map_err(|e| CliError::Usage(e.to_string()))?;
    let loss = parse_loss(&req.loss)?;
    let cfg = req.optimizer.config()?;
    let (ds, scales) = req.data.load()?;
    let roles = req.data.roles();
    let f = fit(&ds, &loss, &cfg, None)?;
    let beta = f.beta();

    let (cov, cov_err) = match covariance::covariance(&f, None) {
        Ok(c) => (Some(c), None),
        Err(e) => {
            log::warn!("covariance unavailable: {e}");
            (None, Some(e.to_string()))
        }
    };
    let names = roles.coefficient_names();
    let coefficients = match &cov {
        Some(c) => {
            let ci = covariance::wald_intervals(c, req.ci_level)?;
            let se_u = standard_errors(&c.unadjusted);
            names
                .iter()
                .enumerate()
                .map(|(j, name)| Coefficient {
                    name: name.clone(),
                    estimate: beta[j],
                    se: Some(c.se[j]),
                    ci_lower: Some(ci[j].0),
                    ci_upper: Some(ci[j].1),
                    se_unadjusted: Some(se_u[j]),
                })
                .collect()
        }
        None => names
            .iter()
            .enumerate()
            .map(|(j, name)| Coefficient {
                name: name.clone(),
                estimate: beta[j],
                se: None,
                ci_lower: None,
                ci_upper: None,
                se_unadjusted: None,
            })
            .collect(),
    };
    let first_stage = roles
        .first_stage_names()
        .into_iter()
        .zip(&f.first_stage.delta_hat.delta)
        .map(|(name, &estimate)| Estimate { name, estimate })
        .collect();

    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        version: VERSION,
        command: "fit",
        seed: req.seed,
        config_hash: config_hash(req),
        data: DataSummary {
            path: req.data.csv_path.display().to_string(),
            n: ds.n(),
            censored: ds.censored_count(),
            censoring_fraction: ds.censored_count() as f64 / ds.n() as f64,
            threshold: req.data.threshold,
            standardized: req.data.standardize,
            scales,
        },
        loss: LossSummary {
            name: loss.name().to_string(),
            label: loss.label(),
            params: loss.params().iter().cloned().collect(),
        },
        first_stage,
        coefficients,
        ci_level: req.ci_level,
        objective: f.objective_value,
        score_norm: f.score_norm,
        covariance: cov.as_ref().map(|c| CovarianceSummary {
            beta_cov: rows(&c.beta_cov),
            adjustment: rows(&c.adjustment),
            bandwidth: c.bandwidth_h,
            joint_deviation: c.joint_deviation,
        }),
        covariance_error: cov_err,
        optimizer: OptimizerSummary {
            converged: f.opt.converged,
            iterations: f.opt.iters,
            evaluations: f.opt.evaluations,
            starts: f.opt.restart_history.iter().filter(|h| h.restart == 0).count() + f.opt.failed_starts.len(),
            failed_starts: f.opt.failed_starts.len(),
            searches: f.opt.restart_history.len(),
            f_tol: cfg.f_tol,
            x_tol: cfg.x_tol,
            restarts: cfg.n_restarts,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRequest {
    pub losses: Vec<String>,
    #[serde(serialize_with = "family_names")]
    pub families: Vec<ErrorFamily>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub optimizer: OptimizerOverrides,
    /// Also report Wald coverage at this level.
    pub ci_level: Option<f64>,
}

fn family_names<S: serde::Serializer>(families: &[ErrorFamily], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(families.iter().map(|f| f.as_str()))
}

/// One row of the simulation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub estimator: String,
    pub family: String,
    pub n: usize,
    pub parameter: &'static str,
    pub bias: f64,
    pub mse: f64,
    pub censoring_probability: f64,
    pub reps: usize,
    pub failures: usize,
    pub coverage: Option<f64>,
    pub coverage_unadjusted: Option<f64>,
}

pub fn simulate_rows(req: &SimulateRequest) -> CliResult<Vec<SimRow>> {
    if req.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if req.losses.is_empty() || req.families.is_empty() || req.ns.is_empty() {
        return Err(CliError::Usage("need at least one loss, family and sample size".into()));
    }
    if let Some(level) = req.ci_level {
        covariance::normal_quantile(level).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let losses: Vec<LossSpec64> = req.losses.iter().map(|l| parse_loss(l)).collect::<CliResult<_>>()?;
    let opts = SimOptions { simplex: req.optimizer.config()?, coverage_level: req.ci_level };
    let mut out = Vec::new();
    for loss in &losses {
        for &family in &req.families {
            for &n in &req.ns {
                let cfg = DgpConfig::new(n, family, grid_seed(req.seed, family, n));
                let rep = run_experiment(&cfg, loss, req.reps, &opts)?;
                for (j, parameter) in PARAM_NAMES.iter().enumerate() {
                    out.push(SimRow {
                        estimator: loss.label(),
                        family: family.as_str().to_string(),
                        n,
                        parameter,
                        bias: rep.bias[j],
                        mse: rep.mse[j],
                        censoring_probability: rep.censoring,
                        reps: rep.r,
                        failures: rep.failures,
                        coverage: rep.coverage.as_ref().map(|c| c.adjusted[j]),
                        coverage_unadjusted: rep.coverage.as_ref().map(|c| c.unadjusted[j]),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Simulation table as CSV, preceded by the metadata line.
pub fn simulate_command(req: &SimulateRequest) -> CliResult<String> {
    let rows = simulate_rows(req)?;
    let mut out = metadata_line(req.seed, req);
    out.push('\n');
    out.push_str("estimator,family,n,parameter,bias,mse,censoring_probability,reps,failures,coverage,coverage_unadjusted\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.estimator,
            r.family,
            r.n,
            r.parameter,
            r.bias,
            r.mse,
            r.censoring_probability,
            r.reps,
            r.failures,
            opt_cell(r.coverage),
            opt_cell(r.coverage_unadjusted)
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapRequest {
    pub data: DataSource,
    pub losses: Vec<String>,
    pub resamples: Vec<usize>,
    pub seed: u64,
    pub optimizer: OptimizerOverrides,
}

/// BMSE for one `(loss, B)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BootColumn {
    pub estimator: String,
    pub b: usize,
    pub theta_hat: Vec<f64>,
    pub bmse: Vec<f64>,
    pub failures: usize,
    pub estimates: nalgebra::DMatrix<f64>,
}

pub fn bootstrap_columns(req: &BootstrapRequest) -> CliResult<(Vec<String>, Vec<BootColumn>)> {
    if req.resamples.is_empty() || req.resamples.contains(&0) {
        return Err(CliError::Usage("--B values must be positive".into()));
    }
    if req.losses.is_empty() {
        return Err(CliError::Usage("need at least one loss".into()));
    }
    let losses: Vec<LossSpec64> = req.losses.iter().map(|l| parse_loss(l)).collect::<CliResult<_>>()?;
    let cfg = req.optimizer.config()?;
    let (ds, _) = req.data.load()?;
    let mut cols = Vec::new();
    for loss in &losses {
        for &b in &req.resamples {
            let rep = bootstrap_bmse(&ds, loss, b, req.seed, &cfg)?;
            cols.push(BootColumn {
                estimator: loss.label(),
                b,
                theta_hat: rep.theta_hat,
                bmse: rep.bmse,
                failures: rep.failures,
                estimates: rep.boot_estimates,
            });
        }
    }
    Ok((req.data.roles().coefficient_names(), cols))
}

/// Parameters in rows, one BMSE column per `(loss, B)`, headed `<loss>@B=<b>`.
/// A second comment line lists failed resamples per column.
pub fn bootstrap_table(req: &BootstrapRequest, names: &[String], cols: &[BootColumn]) -> String {
    let mut out = metadata_line(req.seed, req);
    out.push('\n');
    let failures: Vec<String> = cols.iter().map(|c| format!("{}@B={}:{}", c.estimator, c.b, c.failures)).collect();
    let _ = writeln!(out, "# failed_resamples {}", failures.join(" "));
    out.push_str("parameter");
    for c in cols {
        let _ = write!(out, ",{}@B={}", c.estimator, c.b);
    }
    out.push('\n');
    for (j, name) in names.iter().enumerate() {
        out.push_str(name);
        for c in cols {
            let _ = write!(out, ",{}", c.bmse[j]);
        }
        out.push('\n');
    }
    out
}

pub fn bootstrap_command(req: &BootstrapRequest) -> CliResult<String> {
    let (names, cols) = bootstrap_columns(req)?;
    Ok(bootstrap_table(req, &names, &cols))
}
