use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use knockoff_causal::baseline::granger_graph;
use knockoff_causal::eval::{run_benchmark, BenchConfig};
use knockoff_causal::inference::{discover_graph, Aggregation, DiscoveryConfig, WindowScheme};
use knockoff_causal::interventions::InterventionKind;
use knockoff_causal::knockoff::{diagnose_exchangeability, fit_gaussian, fit_gmm};
use knockoff_causal::series::{load_csv, CsvConfig, MultivariateTimeSeries};
use knockoff_causal::synth::{sample_spec, simulate, ParameterRanges};
use knockoff_causal::{Error, Result, RngSeed};

#[derive(Parser)]
#[command(name = "kcausal", version, about = "Causal discovery in multivariate time series via knockoff interventions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CsvArgs {
    /// Input CSV with a header row
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated column names to read (default: all numeric columns)
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Date/time column to skip (default: auto-detected first column)
    #[arg(long)]
    date_column: Option<String>,
}

impl CsvArgs {
    fn load(&self) -> Result<MultivariateTimeSeries> {
        let loaded = load_csv(
            &self.input,
            &CsvConfig {
                columns: self.columns.clone(),
                date_column: self.date_column.clone(),
            },
        )?;
        if loaded.dropped_rows > 0 {
            eprintln!("dropped {} rows with missing values", loaded.dropped_rows);
        }
        Ok(loaded.series)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random structural causal model and simulate it
    Synth {
        /// Number of variables
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        /// Number of distinct directed cross-variable edges
        #[arg(long, default_value_t = 5)]
        edges: usize,
        /// Rows kept after burn-in (source setup: 2000)
        #[arg(long, default_value_t = 2000)]
        length: usize,
        /// Discarded warm-up rows (implementation choice)
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        /// Probability that an edge uses exp(-z^2) instead of a linear map (source setup: mixed)
        #[arg(long, default_value_t = 0.5)]
        exp_prob: f64,
        /// Master seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (series.csv, spec.json, truth.json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a knockoff model, sample a copy and print exchangeability diagnostics
    Knockoff {
        #[command(flatten)]
        csv: CsvArgs,
        /// Output CSV with original and knockoff columns side by side
        #[arg(long)]
        out: PathBuf,
        /// Use a K-component Gaussian mixture instead of a single Gaussian (source: Gaussian or mixture)
        #[arg(long)]
        gmm: Option<usize>,
        /// Master seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Discover the causal graph by intervening on each predictor
    Discover {
        #[command(flatten)]
        csv: CsvArgs,
        /// Intervention kind: knockoff, mean, uniform or ood (source: knockoff is the proposed method)
        #[arg(long, default_value = "knockoff")]
        kind: InterventionKind,
        /// Per-window KS significance level (source: 0.05)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Forecast window length, 20-30 (source range; 25 chosen)
        #[arg(long, default_value_t = 25)]
        window: usize,
        /// Offset between windows, 5-10 (source range; 10 chosen)
        #[arg(long, default_value_t = 10)]
        step: usize,
        /// Rejection fraction above which an edge is accepted (implementation choice: 0.5)
        #[arg(long, default_value_t = 0.5)]
        majority: f64,
        /// Autoregressive lag depth (implementation choice: 10, matching the maximum lag)
        #[arg(long, default_value_t = 10)]
        lags: usize,
        /// Hidden units of the forecaster (implementation choice)
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        /// Training epochs (implementation choice)
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        /// Fraction of rows used for training (implementation choice)
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Mixture components for the knockoff model (1 = single Gaussian)
        #[arg(long, default_value_t = 1)]
        gmm: usize,
        /// Use one pooled KS test over the forecast segment instead of window voting
        #[arg(long)]
        pooled: bool,
        /// Master seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON report
        #[arg(long)]
        out: PathBuf,
    },
    /// VAR Granger-causality baseline
    Baseline {
        #[command(flatten)]
        csv: CsvArgs,
        /// VAR order (implementation choice: 10, matching the maximum lag)
        #[arg(long, default_value_t = 10)]
        order: usize,
        /// F-test significance level (source: 0.05)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Output JSON report
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a synthetic benchmark sweep from a TOML config
    Bench {
        /// TOML config; omitted keys take their defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the default config and exit
        #[arg(long)]
        print_default: bool,
        /// Output JSON report
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_graph(names: &[String], adjacency: &[Vec<u8>]) {
    println!("edges (row causes column):");
    let mut any = false;
    for (i, row) in adjacency.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v == 1 {
                println!("  {} -> {}", names[i], names[j]);
                any = true;
            }
        }
    }
    if !any {
        println!("  (none)");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            nodes,
            edges,
            length,
            burn_in,
            exp_prob,
            seed,
            out,
        } => {
            let ranges = ParameterRanges {
                length,
                burn_in,
                exponential_probability: exp_prob,
                ..Default::default()
            };
            let spec = sample_spec(nodes, edges, &RngSeed::new(seed, "synth"), &ranges)?;
            let data = simulate(&spec, &RngSeed::new(seed, "simulate"))?;
            data.save(&out)?;
            println!("wrote {} rows x {} variables to {}", data.series.len(), nodes, out.display());
        }
        Command::Knockoff { csv, out, gmm, seed } => {
            let series = csv.load()?;
            let model = match gmm {
                Some(k) if k > 1 => fit_gmm(&series, k, &RngSeed::new(seed, "knockoff-fit"))?,
                _ => fit_gaussian(&series)?,
            };
            let copy = model.sample(&series, &RngSeed::new(seed, "knockoff-sample"))?;
            let report = diagnose_exchangeability(&series, &copy, &model)?;
            print!("{}", report.to_table());
            if report.flagged(0.1) {
                eprintln!("warning: exchangeability deviation above 0.1");
            }
            series.write_side_by_side(&copy, "_knockoff", &out)?;
        }
        Command::Discover {
            csv,
            kind,
            alpha,
            window,
            step,
            majority,
            lags,
            hidden,
            epochs,
            train_fraction,
            gmm,
            pooled,
            seed,
            out,
        } => {
            let series = csv.load()?;
            let mut config = DiscoveryConfig {
                scheme: WindowScheme::new(window, step)?,
                alpha,
                majority,
                kind,
                train_fraction,
                knockoff_components: gmm,
                aggregation: if pooled { Aggregation::Pooled } else { Aggregation::Vote },
                ..Default::default()
            };
            config.forecaster.lag_depth = lags;
            config.forecaster.hidden = hidden;
            config.forecaster.epochs = epochs;
            let (_, report) = discover_graph(&series, &config, seed)?;
            print_graph(&report.variables, &report.adjacency);
            write_json(&report, &out)?;
        }
        Command::Baseline { csv, order, alpha, out } => {
            let series = csv.load()?;
            let (_, report) = granger_graph(&series, order, alpha)?;
            print_graph(&report.variables, &report.adjacency);
            write_json(&report, &out)?;
        }
        Command::Bench {
            config,
            print_default,
            out,
        } => {
            if print_default {
                print!("{}", BenchConfig::default().to_toml());
                return Ok(());
            }
            let cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
                    BenchConfig::from_toml(&text)?
                }
                None => BenchConfig::default(),
            };
            let report = run_benchmark(&cfg)?;
            println!("{:<10} {:>5} {:>8} {:>8} {:>8} {:>8}", "method", "runs", "FPR", "sd", "F", "sd");
            for s in &report.summary {
                println!(
                    "{:<10} {:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                    s.method.to_string(),
                    s.runs,
                    s.mean_fpr,
                    s.sd_fpr,
                    s.mean_f_score,
                    s.sd_f_score
                );
            }
            match out {
                Some(path) => write_json(&report, &path)?,
                None => return Err(Error::InvalidParameter("bench needs --out".into())),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
