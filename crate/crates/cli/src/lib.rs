//! Commands behind the `tradenet` binary.
//!
//! Each `cmd_*` function takes a validated [`RunConfig`] plus the paths it
//! needs, writes its output files and returns a short summary. Failures are
//! [`CliError`]s whose [`exit_code`](CliError::exit_code) is stable across
//! commands: 2 for configuration or usage, 3 for unreadable or malformed
//! input, 4 for input that parses but fails validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tradenet::dynamics::{run_simulation, AvalancheRecord, SimulationOutput};
use tradenet::graph::Graph;
use tradenet::io::{self, EdgeList, FileSet, RunConfig};
use tradenet::metrics::{self, degree_distribution, DegreeMode};
use tradenet::renorm::fractal_dimensions;
use tradenet::risk::{empirical_var, losses_from_returns, var_envelope, VaRQuery};
use tradenet::tails::{self, classify_bounds, gamma_from_m, BoundClass, TailFit};
use tradenet::{Error, TradeNetwork};

pub const VERSION: &str = concat!("tradenet ", env!("CARGO_PKG_VERSION"));

/// File name of the final network snapshot in a run directory.
pub const SNAPSHOT: &str = "network.edges";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Validation(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Input(m) | CliError::Validation(m) | CliError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config { .. } => CliError::Config(msg),
            Error::Parse { .. } | Error::Io(_) | Error::Json(_) | Error::EmptyInput(_) => CliError::Input(msg),
            Error::Validation { .. }
            | Error::InsufficientData { .. }
            | Error::InsufficientTail { .. }
            | Error::Domain(_) => CliError::Validation(msg),
            Error::UnknownAgent(_) | Error::Contract(_) => CliError::Internal(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_files(dir: &Path, files: &FileSet) -> CliResult<()> {
    io::write_all(dir, files).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// Loads a config file, or the defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(io::parse_config(&read(p)?, &p.display().to_string())?),
        None => Ok(RunConfig::default()),
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize)]
pub struct RunTotals {
    pub steps: usize,
    pub agents: usize,
    pub links: usize,
    pub avalanches: usize,
    pub collapsed_agents: usize,
    pub destroyed_links: usize,
    pub final_u_t: f64,
    pub max_energy_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub totals: RunTotals,
}

fn summarize(cfg: &RunConfig, out: &SimulationOutput) -> RunSummary {
    RunSummary {
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        totals: RunTotals {
            steps: cfg.dynamics.steps,
            agents: out.final_network.len(),
            links: out.final_network.link_count(),
            avalanches: out.avalanches.len(),
            collapsed_agents: out.avalanches.iter().map(|a| a.r).sum(),
            destroyed_links: out.avalanches.iter().map(|a| a.k_t).sum(),
            final_u_t: *out.u_t.last().expect("u_t starts with the seed value"),
            max_energy_drift: out.max_energy_drift,
        },
    }
}

/// `run.json`: report rounding for the totals, the configuration verbatim so
/// that it reproduces the run bit for bit.
fn run_json(summary: &RunSummary) -> CliResult<String> {
    let json_err = |e: serde_json::Error| CliError::Internal(e.to_string());
    let mut v: serde_json::Value = serde_json::from_str(&io::to_report_json(summary)?).map_err(json_err)?;
    v["config"] = serde_json::to_value(&summary.config).map_err(json_err)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(json_err)?;
    text.push('\n');
    Ok(text)
}

/// Output files of one simulation, keyed by file name.
pub fn simulation_files(cfg: &RunConfig, out: &SimulationOutput) -> CliResult<(FileSet, RunSummary)> {
    let summary = summarize(cfg, out);
    let mut files = FileSet::new();
    files.insert("ut.csv".into(), io::ut_csv(&out.u_t));
    files.insert("returns.csv".into(), io::returns_csv(&out.returns));
    files.insert("avalanches.csv".into(), io::avalanches_csv(&out.avalanches));
    files.insert("run.json".into(), run_json(&summary)?);
    files.insert(
        SNAPSHOT.into(),
        EdgeList::from_network(&out.final_network, Some(cfg.dynamics.steps)).to_text(),
    );
    Ok((files, summary))
}

/// Runs one simulation and writes `ut.csv`, `returns.csv`,
/// `avalanches.csv`, `run.json` and the edge-list snapshot into `dir`.
pub fn cmd_simulate(cfg: &RunConfig, dir: &Path) -> CliResult<RunSummary> {
    cfg.validate()?;
    let out = run_simulation(&cfg.dynamics_config(), cfg.seed)?;
    let (files, summary) = simulation_files(cfg, &out)?;
    write_files(dir, &files)?;
    Ok(summary)
}

/// `runs` simulations with consecutive seeds starting at `cfg.seed`, each in
/// `dir/seed-<s>`, spread over up to `jobs` threads.
pub fn cmd_simulate_batch(cfg: &RunConfig, dir: &Path, runs: usize, jobs: usize) -> CliResult<Vec<RunSummary>> {
    cfg.validate()?;
    let configs: Vec<RunConfig> = (0..runs as u64)
        .map(|i| RunConfig {
            seed: cfg.seed.wrapping_add(i),
            ..cfg.clone()
        })
        .collect();
    let per = configs.len().div_ceil(jobs.max(1)).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .chunks(per)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|c| cmd_simulate(c, &dir.join(format!("seed-{}", c.seed))))
                        .collect::<CliResult<Vec<_>>>()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(runs);
        for h in handles {
            all.extend(
                h.join()
                    .map_err(|_| CliError::Internal("simulation thread panicked".into()))??,
            );
        }
        Ok(all)
    })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub method: tails::FitMethod,
    pub m_hat: f64,
    pub stderr: f64,
    pub s_min: f64,
    pub n_tail: usize,
    pub gamma_implied: f64,
    pub classification: BoundClass,
    pub bound_note: String,
    pub notes: Vec<String>,
}

impl From<&TailFit> for FitReport {
    fn from(f: &TailFit) -> Self {
        let check = classify_bounds(f.m_hat, f.stderr);
        Self {
            method: f.method,
            m_hat: f.m_hat,
            stderr: f.stderr,
            s_min: f.s_min,
            n_tail: f.n_tail,
            gamma_implied: gamma_from_m(f.m_hat),
            classification: check.class,
            bound_note: check.note,
            notes: f.notes.clone(),
        }
    }
}

/// A degree-distribution fit: the CCDF exponent plus one.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeFit {
    pub mode: DegreeMode,
    pub gamma_hat: f64,
    pub ccdf_fit: TailFit,
    pub m_implied: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub source: String,
    pub losses: usize,
    /// Loss tail by CCDF regression.
    #[serde(flatten)]
    pub loss_fit: FitReport,
    /// Loss tail by the Hill estimator, when the tail is long enough.
    pub hill: Option<FitReport>,
    pub avalanche_r: Option<TailFit>,
    pub avalanche_k_t: Option<TailFit>,
    pub degree: Option<DegreeFit>,
}

/// Fits the total-degree (or configured mode) CCDF of a network.
pub fn fit_degree(net: &TradeNetwork, mode: DegreeMode, s_min: Option<f64>) -> tradenet::Result<DegreeFit> {
    let h = degree_distribution(net, mode)?;
    let fit = tails::fit_samples(&h.positive_samples(), s_min)?;
    let gamma_hat = fit.m_hat + 1.0;
    Ok(DegreeFit {
        mode,
        gamma_hat,
        m_implied: tails::m_from_gamma(gamma_hat),
        ccdf_fit: fit,
    })
}

fn read_run_returns(dir: &Path) -> CliResult<Vec<Option<f64>>> {
    let p = dir.join("returns.csv");
    Ok(io::read_returns_csv(&read(&p)?, &p.display().to_string())?)
}

fn read_avalanches(dir: &Path) -> CliResult<Vec<AvalancheRecord>> {
    let p = dir.join("avalanches.csv");
    let name = p.display().to_string();
    let text = read(&p)?;
    let table = io::read_table(&text, &name)?;
    let col = |c: &str| {
        table
            .column(c)
            .ok_or_else(|| CliError::Input(format!("{name}:1: missing column {c:?}")))
    };
    let (cs, cr, ck, ca) = (col("step")?, col("r")?, col("k_t")?, col("seed_agent")?);
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let num = |i: usize| {
                row[i]
                    .parse::<usize>()
                    .map_err(|_| CliError::Input(format!("{name}:{line}: bad integer {:?}", row[i])))
            };
            Ok(AvalancheRecord {
                step: num(cs)?,
                r: num(cr)?,
                k_t: num(ck)?,
                seed_agent: tradenet::AgentId(num(ca)?),
            })
        })
        .collect()
}

fn read_snapshot(path: &Path, cfg: &RunConfig) -> CliResult<TradeNetwork> {
    let el = io::parse_edge_list(&read(path)?, &path.display().to_string())?;
    Ok(el.to_network(cfg.growth)?)
}

/// Loss-tail analysis of a run directory or of a returns/losses CSV.
///
/// For a run directory the avalanche sizes and the degree distribution of
/// the snapshot are fitted as well, and the topology tables `pk.csv`,
/// `dk.csv`, `ck.csv` and `lk.csv` are written next to `tailfit.json`.
pub fn cmd_analyze(input: &Path, cfg: &RunConfig, dir: &Path) -> CliResult<AnalysisReport> {
    cfg.validate()?;
    let mut files = FileSet::new();
    let (losses, run_parts) = if input.is_dir() {
        let returns = read_run_returns(input)?;
        let avalanches = read_avalanches(input)?;
        let net = read_snapshot(&input.join(SNAPSHOT), cfg)?;
        (losses_from_returns(&returns), Some((avalanches, net)))
    } else {
        let name = input.display().to_string();
        let text = read(input)?;
        let table = io::read_table(&text, &name)?;
        let losses = if table.column("loss").is_some() {
            io::read_losses_csv(&text, &name)?
        } else {
            losses_from_returns(&io::read_returns_csv(&text, &name)?)
        };
        (losses, None)
    };
    if losses.is_empty() {
        return Err(CliError::Input(format!("{}: no losses to fit", input.display())));
    }

    let loss_fit = tails::fit_samples(&losses, cfg.analysis.s_min)?;
    let hill = tails::hill(&losses, cfg.analysis.tail_fraction).ok();
    let mut report = AnalysisReport {
        source: input.display().to_string(),
        losses: losses.len(),
        loss_fit: FitReport::from(&loss_fit),
        hill: hill.as_ref().map(FitReport::from),
        avalanche_r: None,
        avalanche_k_t: None,
        degree: None,
    };

    if let Some((avalanches, net)) = run_parts {
        let r: Vec<f64> = avalanches.iter().map(|a| a.r as f64).collect();
        let k: Vec<f64> = avalanches.iter().filter(|a| a.k_t > 0).map(|a| a.k_t as f64).collect();
        report.avalanche_r = tails::fit_samples(&r, None).ok();
        report.avalanche_k_t = tails::fit_samples(&k, None).ok();
        report.degree = fit_degree(&net, cfg.analysis.degree_mode, None).ok();
        let h = degree_distribution(&net, cfg.analysis.degree_mode)?;
        files.insert("pk.csv".into(), io::pk_csv(&h));
        let profile = metrics::degree_profile(&net, cfg.analysis.path_sources, cfg.sampling_seed())?;
        files.insert("dk.csv".into(), io::dk_csv(&profile.neighbor_degree));
        files.insert("ck.csv".into(), io::ck_csv(&profile.clustering));
        files.insert("lk.csv".into(), io::lk_csv(&profile.path_length));
    }
    files.insert("tailfit.json".into(), io::to_report_json(&report)?);
    write_files(dir, &files)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub date_column: String,
    pub value_column: String,
    pub label: Option<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            value_column: "value".into(),
            label: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub label: String,
    pub observations: usize,
    pub returns: usize,
    pub losses: usize,
}

/// Validates a `(date, value)` CSV and writes `returns.csv` and
/// `losses.csv`.
pub fn cmd_ingest(csv: &Path, opts: &IngestOptions, dir: &Path) -> CliResult<IngestSummary> {
    let label = opts.label.clone().unwrap_or_else(|| {
        csv.file_stem()
            .map_or_else(|| "series".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let series = io::parse_series_csv(
        &read(csv)?,
        &csv.display().to_string(),
        &opts.date_column,
        &opts.value_column,
        &label,
    )?;
    let mut files = FileSet::new();
    files.insert("returns.csv".into(), series.returns_csv());
    files.insert("losses.csv".into(), series.losses_csv());
    write_files(dir, &files)?;
    Ok(IngestSummary {
        label,
        observations: series.observations.len(),
        returns: series.observations.len().saturating_sub(1),
        losses: series.losses().len(),
    })
}

// ---------------------------------------------------------------------------
// renorm

#[derive(Debug, Clone, Serialize)]
pub struct RenormReport {
    pub source: String,
    pub nodes: usize,
    pub giant_component: usize,
    pub cover_seeds: usize,
    pub seed: u64,
    pub d_b: Option<f64>,
    pub d_k: Option<f64>,
    pub r2_b: Option<f64>,
    pub r2_k: Option<f64>,
    pub gamma_predicted: Option<f64>,
    /// Where the prediction falls against `[2, 3]`.
    pub gamma_band_check: Option<BoundClass>,
    pub gamma_fitted: Option<f64>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

fn gamma_band(g: f64) -> BoundClass {
    if g < 2.0 {
        BoundClass::Below
    } else if g > 3.0 {
        BoundClass::Above
    } else {
        BoundClass::Within
    }
}

/// Box-covering dimensions of an edge list; writes `renorm.csv` and
/// `renorm.json`.
pub fn cmd_renorm(edge_list: &Path, cfg: &RunConfig, jobs: usize, dir: &Path) -> CliResult<RenormReport> {
    io::validate_scales(&cfg.renorm.scales)?;
    let name = edge_list.display().to_string();
    let el = io::parse_edge_list(&read(edge_list)?, &name)?;
    let g: Graph = el.to_graph();
    let seed = cfg.covering_seed();
    let fit = fractal_dimensions(&g, &cfg.renorm.scales, seed, cfg.renorm.cover_seeds, jobs)?;
    let gamma_fitted = el
        .to_network(cfg.growth)
        .ok()
        .and_then(|net| fit_degree(&net, DegreeMode::Total, None).ok())
        .map(|d| d.gamma_hat);
    let gamma_predicted = fit.gamma_prediction();
    let report = RenormReport {
        source: name,
        nodes: g.node_count(),
        giant_component: g.giant_component().len(),
        cover_seeds: cfg.renorm.cover_seeds,
        seed,
        d_b: fit.d_b,
        d_k: fit.d_k,
        r2_b: fit.r2_b,
        r2_k: fit.r2_k,
        gamma_predicted,
        gamma_band_check: gamma_predicted.map(gamma_band),
        gamma_fitted,
        degenerate: fit.degenerate,
        notes: fit.notes.clone(),
    };
    let mut files = FileSet::new();
    files.insert("renorm.csv".into(), io::renorm_csv(&fit));
    files.insert("renorm.json".into(), io::to_report_json(&report)?);
    write_files(dir, &files)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// var

/// Where the tail exponent of a VaR report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MSource {
    Given,
    Fitted,
    BoundsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MChoice {
    None,
    Given(f64),
    Fit,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarLine {
    pub alpha: f64,
    pub empirical: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_point: Option<f64>,
    pub var_lower: f64,
    pub var_upper: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarReport {
    pub source: String,
    pub losses: usize,
    pub x_min: f64,
    pub horizon: usize,
    pub m_source: MSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<f64>,
    pub levels: Vec<VarLine>,
}

/// Empirical and Pareto VaR per confidence level; writes `var.json`.
///
/// `x_min` defaults to the configured value, then to the smallest loss. With
/// [`MChoice::Fit`] the exponent is the CCDF regression of the losses above
/// `x_min`.
pub fn cmd_var(losses_csv: &Path, cfg: &RunConfig, m: MChoice, dir: &Path) -> CliResult<VarReport> {
    io::validate_alphas(&cfg.var.alpha)?;
    let name = losses_csv.display().to_string();
    let losses = io::read_losses_csv(&read(losses_csv)?, &name)?;
    if losses.is_empty() {
        return Err(CliError::Input(format!("{name}: no losses")));
    }
    let x_min = match cfg.var.x_min {
        Some(x) => x,
        None => losses.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let (m_source, m_hat) = match m {
        MChoice::None => (MSource::BoundsOnly, None),
        MChoice::Given(v) => (MSource::Given, Some(v)),
        MChoice::Fit => (MSource::Fitted, Some(tails::fit_samples(&losses, Some(x_min))?.m_hat)),
    };
    let mut levels = Vec::with_capacity(cfg.var.alpha.len());
    for &alpha in &cfg.var.alpha {
        let q = VaRQuery::new(alpha, cfg.var.horizon, x_min)?;
        let env = var_envelope(&q, m_hat)?;
        levels.push(VarLine {
            alpha,
            empirical: empirical_var(&losses, alpha)?,
            var_point: env.var_point,
            var_lower: env.var_lower,
            var_upper: env.var_upper,
            notes: env.notes,
        });
    }
    let report = VarReport {
        source: name,
        losses: losses.len(),
        x_min,
        horizon: cfg.var.horizon,
        m_source,
        m_hat,
        levels,
    };
    let mut files = FileSet::new();
    files.insert("var.json".into(), io::to_report_json(&report)?);
    write_files(dir, &files)?;
    Ok(report)
}

/// Default output directory of a command: the configured one unless
/// overridden.
pub fn out_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}
