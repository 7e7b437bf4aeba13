use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tradenet_cli::{
    cmd_analyze, cmd_ingest, cmd_renorm, cmd_simulate, cmd_simulate_batch, cmd_var, load_config, out_dir, CliError,
    CliResult, IngestOptions, MChoice,
};

#[derive(Parser)]
#[command(
    name = "tradenet",
    version,
    about = "Trade-network simulation and heavy-tail risk analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a network and run the collapse dynamics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of runs with consecutive seeds, each in `seed-<s>/`.
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads for batch runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fit tails of a run directory or a returns/losses CSV.
    Analyze {
        /// Run directory from `simulate`, or a CSV with a `loss` or `log_return` column.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Convert a dated price or index series into returns and losses.
    Ingest {
        /// CSV with a date column and a positive value column.
        csv: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Name of the date column.
        #[arg(long, default_value = "date")]
        date_col: String,
        /// Name of the value column.
        #[arg(long, default_value = "value")]
        value_col: String,
        /// Series label recorded in the summary; defaults to the file stem.
        #[arg(long)]
        label: Option<String>,
    },
    /// Box-covering renormalization of an edge list.
    Renorm {
        /// Edge list, such as `network.edges` from a run.
        edges: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma-separated box sizes, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<usize>>,
        /// Worker threads for the covering ensemble.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Value-at-Risk of a losses CSV.
    Var {
        /// CSV with a `loss` column.
        losses: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Comma-separated confidence levels, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Pareto scale; defaults to the smallest loss.
        #[arg(long)]
        x_min: Option<f64>,
        /// Tail exponent, or `fit` to estimate it from the losses.
        #[arg(long)]
        m_hat: Option<String>,
    },
}

fn prepare(common: &Common) -> CliResult<(tradenet::io::RunConfig, PathBuf)> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let dir = out_dir(&cfg, common.out.clone());
    Ok((cfg, dir))
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate { common, runs, jobs } => {
            let (cfg, dir) = prepare(&common)?;
            match runs {
                Some(n) => {
                    let all = cmd_simulate_batch(&cfg, &dir, n, jobs)?;
                    Ok(format!("{} runs written to {}", all.len(), dir.display()))
                }
                None => {
                    let s = cmd_simulate(&cfg, &dir)?;
                    Ok(format!(
                        "{} steps, {} agents, {} links, {} avalanches -> {}",
                        s.totals.steps,
                        s.totals.agents,
                        s.totals.links,
                        s.totals.avalanches,
                        dir.display()
                    ))
                }
            }
        }
        Command::Analyze { input, common } => {
            let (cfg, dir) = prepare(&common)?;
            let r = cmd_analyze(&input, &cfg, &dir)?;
            Ok(format!(
                "m_hat = {:.4} +/- {:.4} ({:?}) from {} losses -> {}",
                r.loss_fit.m_hat,
                r.loss_fit.stderr,
                r.loss_fit.classification,
                r.losses,
                dir.display()
            ))
        }
        Command::Ingest {
            csv,
            common,
            date_col,
            value_col,
            label,
        } => {
            let (_, dir) = prepare(&common)?;
            let opts = IngestOptions {
                date_column: date_col,
                value_column: value_col,
                label,
            };
            let s = cmd_ingest(&csv, &opts, &dir)?;
            Ok(format!(
                "{}: {} observations, {} losses -> {}",
                s.label,
                s.observations,
                s.losses,
                dir.display()
            ))
        }
        Command::Renorm {
            edges,
            common,
            scales,
            jobs,
        } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(s) = scales {
                cfg.renorm.scales = s;
            }
            let r = cmd_renorm(&edges, &cfg, jobs, &dir)?;
            let show = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
            Ok(format!(
                "d_B = {}, d_k = {}, gamma = {} -> {}",
                show(r.d_b),
                show(r.d_k),
                show(r.gamma_predicted),
                dir.display()
            ))
        }
        Command::Var {
            losses,
            common,
            alpha,
            x_min,
            m_hat,
        } => {
            let (mut cfg, dir) = prepare(&common)?;
            if let Some(a) = alpha {
                cfg.var.alpha = a;
            }
            if x_min.is_some() {
                cfg.var.x_min = x_min;
            }
            let m = match m_hat.as_deref() {
                None => cfg.var.m_hat.map_or(MChoice::None, MChoice::Given),
                Some("fit") => MChoice::Fit,
                Some(v) => MChoice::Given(
                    v.parse()
                        .map_err(|_| CliError::Config(format!("m_hat: expected a number or `fit`, got {v:?}")))?,
                ),
            };
            let r = cmd_var(&losses, &cfg, m, &dir)?;
            let lines: Vec<String> = r
                .levels
                .iter()
                .map(|l| {
                    format!(
                        "alpha {}: empirical {:.6}, envelope [{:.6}, {:.6}]",
                        l.alpha, l.empirical, l.var_lower, l.var_upper
                    )
                })
                .collect();
            Ok(lines.join("\n"))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
