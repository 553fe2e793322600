//! Command-line surface for vine-copula model selection, simulation,
//! replication studies, and portfolio backtesting.

use bayesvine::baselines::{dissmann_select, scenario};
use bayesvine::io::{
    self, prepare_unit_data, read_csv_matrix, seed_stream, write_artifact, write_csv_matrix,
    write_selection_outputs, write_study_csv, RunConfig, VineModelJson,
};
use bayesvine::portfolio::{self, BacktestConfig, Bounds};
use bayesvine::rjmcmc::select_vine;
use bayesvine::vine::VineCopula;
use bayesvine::Error;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bayesvine",
    version,
    about = "Sequential Bayesian model selection of regular vine copulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFit {
    /// Input CSV (header row, one column per variable)
    #[arg(long)]
    input: PathBuf,
    /// Output directory for all artifacts
    #[arg(long)]
    out_dir: PathBuf,
    /// Root seed; named sub-streams are derived from it
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Comma-separated candidate families
    #[arg(long, default_value = "I,N,T,C,C180,G,G180", value_delimiter = ',')]
    families: Vec<String>,
    /// Rank-transform raw data columns to (0,1) before fitting
    #[arg(long)]
    rank_transform: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit by sequential Bayesian model selection (reversible jump MCMC)
    FitBayes {
        #[command(flatten)]
        common: CommonFit,
        /// MCMC iterations per tree level
        #[arg(long, default_value_t = 15_000)]
        iterations: usize,
        /// Burn-in iterations discarded before the mode search
        #[arg(long, default_value_t = 2_500)]
        burn_in: usize,
        /// Family-shrinkage prior rate
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Degrees-of-freedom prior variant (lognu | flat-lognu)
        #[arg(long, default_value = "lognu")]
        df_prior: String,
        /// Drop the tree-proposal normalizer correction term
        #[arg(long)]
        paper_cancellation: bool,
    },
    /// Fit by the greedy tree-by-tree frequentist baseline
    FitDissmann {
        #[command(flatten)]
        common: CommonFit,
    },
    /// Simulate a benchmark scenario to CSV
    Simulate {
        /// Scenario id (1-4)
        #[arg(long)]
        scenario: usize,
        /// Number of rows
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation study: simulate, fit all methods, tabulate
    ReplicateStudy {
        /// Scenario id (1-4)
        #[arg(long)]
        scenario: usize,
        /// Number of replications
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Rows per replication
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 15_000)]
        iterations: usize,
        #[arg(long, default_value_t = 2_500)]
        burn_in: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "I,N,T,C,C180,G,G180", value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Daily rolling forecast/optimization backtest on a price panel
    Backtest {
        /// Adjusted-close CSV: date column first, then one column per asset
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Dependence model fitted to the warm-up PITs
        /// (dissmann | independence)
        #[arg(long, default_value = "dissmann")]
        method: String,
        #[arg(long, default_value = "I,N,T,C,C180,G,G180", value_delimiter = ',')]
        families: Vec<String>,
        /// Warm-up days used to fit the dependence model
        #[arg(long, default_value_t = 250)]
        warmup: usize,
        /// Simulated next-day samples per trading day
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.10)]
        var_level: f64,
        /// Lower weight bound
        #[arg(long, default_value_t = 0.05)]
        lo: f64,
        /// Upper weight bound
        #[arg(long, default_value_t = 0.25)]
        hi: f64,
        /// Refit the dependence model every this many trading days
        #[arg(long)]
        refit_every: Option<usize>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Structure(_) => 2,
        Error::Data(_) | Error::Csv(_) | Error::Io(_) => 3,
        Error::Numerical(_) | Error::Estimation(_) | Error::ParamDomain(_) | Error::Serde(_) => 4,
    }
}

fn check_iterations(iterations: usize, burn_in: usize) -> bayesvine::Result<()> {
    if !(15_000..=30_000).contains(&iterations) {
        return Err(Error::Config(format!(
            "iterations {iterations} outside the supported range [15000, 30000]"
        )));
    }
    if burn_in >= iterations {
        return Err(Error::Config(format!(
            "burn-in {burn_in} must be below iterations {iterations}"
        )));
    }
    Ok(())
}

fn load_unit_csv(
    input: &Path,
    rank_transform: bool,
) -> bayesvine::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (headers, rows) = read_csv_matrix(input)?;
    let unit = prepare_unit_data(&headers, &rows, rank_transform)?;
    Ok((headers, unit))
}

fn run(cli: Cli) -> bayesvine::Result<()> {
    match cli.command {
        Command::FitBayes {
            common,
            iterations,
            burn_in,
            lambda,
            df_prior,
            paper_cancellation,
        } => {
            check_iterations(iterations, burn_in)?;
            let config = RunConfig {
                command: "fit-bayes".into(),
                inputs: vec![common.input.display().to_string()],
                seed: common.seed,
                iterations,
                burn_in,
                lambda,
                candidates: common.families.clone(),
                paper_cancellation,
                df_prior,
                output_dir: common.out_dir.display().to_string(),
                rank_transform: common.rank_transform,
                scenario: None,
                n: None,
            };
            let candidates = config.candidate_tags()?;
            let prior = config.prior()?;
            let tuning = config.tuning();
            let (_, data) = load_unit_csv(&common.input, common.rank_transform)?;
            let d = data[0].len();
            let mut rng = seed_stream(config.seed, "fit-bayes");
            let out = select_vine(&data, d, &candidates, &prior, &tuning, &mut rng)?;
            write_selection_outputs(&common.out_dir, &config, &out)?;
            println!(
                "fit-bayes: d = {d}, selected model written to {}",
                common.out_dir.join("model.json").display()
            );
            Ok(())
        }
        Command::FitDissmann { common } => {
            let config = RunConfig {
                command: "fit-dissmann".into(),
                inputs: vec![common.input.display().to_string()],
                seed: common.seed,
                iterations: 0,
                burn_in: 0,
                lambda: 0.0,
                candidates: common.families.clone(),
                paper_cancellation: false,
                df_prior: "lognu".into(),
                output_dir: common.out_dir.display().to_string(),
                rank_transform: common.rank_transform,
                scenario: None,
                n: None,
            };
            let candidates = config.candidate_tags()?;
            let (_, data) = load_unit_csv(&common.input, common.rank_transform)?;
            let model = dissmann_select(&data, &candidates)?;
            std::fs::create_dir_all(&common.out_dir)?;
            write_artifact(
                &common.out_dir.join("model.json"),
                &config,
                &VineModelJson::from_copula(&model),
            )?;
            println!(
                "fit-dissmann: model written to {}",
                common.out_dir.join("model.json").display()
            );
            Ok(())
        }
        Command::Simulate {
            scenario: id,
            n,
            seed,
            out,
        } => {
            let truth = scenario(id)?;
            let mut rng = seed_stream(seed, &format!("simulate-{id}"));
            let rows = truth.simulate(n, &mut rng)?;
            let headers: Vec<String> = (1..=truth.d()).map(|j| format!("u{j}")).collect();
            if let Some(dir) = out.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            write_csv_matrix(&out, &headers, &rows)?;
            println!("simulate: {n} rows of scenario {id} written to {}", out.display());
            Ok(())
        }
        Command::ReplicateStudy {
            scenario: id,
            reps,
            n,
            seed,
            iterations,
            burn_in,
            lambda,
            families,
            out_dir,
        } => {
            check_iterations(iterations, burn_in)?;
            let config = RunConfig {
                command: "replicate-study".into(),
                inputs: Vec::new(),
                seed,
                iterations,
                burn_in,
                lambda,
                candidates: families,
                paper_cancellation: false,
                df_prior: "lognu".into(),
                output_dir: out_dir.display().to_string(),
                rank_transform: false,
                scenario: Some(id),
                n: Some(n),
            };
            let candidates = config.candidate_tags()?;
            let prior = config.prior()?;
            let tuning = config.tuning();
            let study =
                io::replicate_study(id, reps, n, &candidates, &prior, &tuning, seed)?;
            std::fs::create_dir_all(&out_dir)?;
            write_study_csv(&out_dir.join("study.csv"), &study)?;
            write_artifact(&out_dir.join("study.json"), &config, &study)?;
            let mean_bayes: f64 =
                study.rows.iter().map(|r| r.bayes_rel).sum::<f64>() / reps.max(1) as f64;
            println!(
                "replicate-study: scenario {id}, {reps} reps, mean relative loglik {mean_bayes:.2}%, \
                 wins vs baseline {}/{reps}",
                study.bayes_wins_vs_dissmann
            );
            Ok(())
        }
        Command::Backtest {
            input,
            out_dir,
            seed,
            method,
            families,
            warmup,
            samples,
            var_level,
            lo,
            hi,
            refit_every,
        } => {
            let config = RunConfig {
                command: "backtest".into(),
                inputs: vec![input.display().to_string()],
                seed,
                iterations: 0,
                burn_in: 0,
                lambda: 0.0,
                candidates: families.clone(),
                paper_cancellation: false,
                df_prior: "lognu".into(),
                output_dir: out_dir.display().to_string(),
                rank_transform: false,
                scenario: None,
                n: Some(samples),
            };
            let candidates = config.candidate_tags()?;
            let (headers, rows) = read_csv_matrix(&input)?;
            if headers.len() < 3 {
                return Err(Error::Data(
                    "price CSV needs a date column plus at least two assets".into(),
                ))?;
            }
            // first column is the date index; remaining columns are prices
            let prices: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
            let bt = BacktestConfig {
                warmup,
                n_samples: samples,
                var_level,
                bounds: Bounds { lo, hi },
                refit_every,
                dlm: Default::default(),
            };
            let mut fit: Box<dyn FnMut(&[Vec<f64>]) -> bayesvine::Result<VineCopula>> =
                match method.as_str() {
                    "dissmann" => Box::new(move |pits: &[Vec<f64>]| {
                        dissmann_select(pits, &candidates)
                    }),
                    "independence" => Box::new(|pits: &[Vec<f64>]| {
                        let d = pits[0].len();
                        let trees: Vec<Vec<(usize, usize)>> = (0..d - 1)
                            .map(|k| (0..d - 1 - k).map(|i| (i, i + 1)).collect())
                            .collect();
                        VineCopula::independence(bayesvine::vine::VineStructure::new(d, trees))
                    }),
                    other => {
                        return Err(Error::Config(format!(
                            "unknown backtest method '{other}' (dissmann | independence)"
                        )))
                    }
                };
            let mut rng = seed_stream(seed, "backtest");
            let report = portfolio::backtest(&prices, &bt, &mut fit, &mut rng)?;
            std::fs::create_dir_all(&out_dir)?;
            write_artifact(&out_dir.join("report.json"), &config, &report)?;
            // plot-ready daily series
            let mut w = csv::WriterBuilder::new()
                .from_path(out_dir.join("daily.csv"))
                .map_err(bayesvine::Error::from)?;
            w.write_record(["day", "realized", "forecast_mean", "var", "exceeded"])
                .map_err(bayesvine::Error::from)?;
            for r in &report.daily {
                w.write_record([
                    r.day.to_string(),
                    format!("{:.10e}", r.realized),
                    format!("{:.10e}", r.forecast_mean),
                    format!("{:.10e}", r.var),
                    (r.exceeded as u8).to_string(),
                ])
                .map_err(bayesvine::Error::from)?;
            }
            w.flush()?;
            println!(
                "backtest: {} days, annualized Sharpe {:.3}, VaR coverage {:.3}",
                report.daily.len(),
                report.sharpe,
                report.var_coverage
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
