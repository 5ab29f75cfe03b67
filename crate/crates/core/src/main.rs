use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use osgpcp::bench::{read_trace, run_experiment, summarize, Dataset, ExperimentConfig};
use osgpcp::conformal::EtaMode;

#[derive(Parser)]
#[command(name = "osgpcp", version, about = "Online random-feature GP with adaptive conformal prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Iid,
    Shift,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtaModeArg {
    Constant,
    Decaying,
}

#[derive(Subcommand)]
enum Command {
    /// Run an online experiment and write a trace CSV plus a JSON sidecar.
    Run {
        #[arg(long, value_enum, default_value = "iid")]
        dataset: DatasetKind,
        /// Input CSV for `--dataset csv`.
        #[arg(long)]
        csv_path: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "open,high,low")]
        feature_columns: Vec<String>,
        #[arg(long, default_value = "close")]
        target_column: String,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Stream length for the synthetic datasets.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Number of sampled spectral frequencies D.
        #[arg(long, default_value_t = 200)]
        features: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        #[arg(long, value_enum, default_value = "constant")]
        eta_mode: EtaModeArg,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 15)]
        window: usize,
        #[arg(long, default_value_t = 100)]
        consecutive: usize,
        #[arg(long, default_value_t = 20.0)]
        clip_b: f64,
        #[arg(long, default_value_t = 0)]
        seed_features: u64,
        #[arg(long, default_value_t = 0)]
        seed_data: u64,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Print final coverage and mean set size per method from a trace CSV.
    Summarize { trace: PathBuf },
}

fn run(cli: Cli) -> osgpcp::Result<()> {
    match cli.command {
        Command::Run {
            dataset,
            csv_path,
            feature_columns,
            target_column,
            delimiter,
            samples,
            alpha,
            features,
            warmup,
            eta_mode,
            eta,
            window,
            consecutive,
            clip_b,
            seed_features,
            seed_data,
            out,
        } => {
            let dataset = match dataset {
                DatasetKind::Iid => Dataset::Iid { samples },
                DatasetKind::Shift => Dataset::Shift { samples },
                DatasetKind::Csv => {
                    let path = csv_path.ok_or_else(|| {
                        osgpcp::Error::InvalidParameter("--dataset csv requires --csv-path".into())
                    })?;
                    Dataset::Csv {
                        path,
                        feature_columns,
                        target_column,
                        delimiter,
                    }
                }
            };
            let config = ExperimentConfig {
                dataset,
                alpha,
                num_features: features,
                warmup,
                eta_mode: match eta_mode {
                    EtaModeArg::Constant => EtaMode::Constant,
                    EtaModeArg::Decaying => EtaMode::DecayingWithReset,
                },
                eta_const: eta,
                window,
                consecutive,
                clip_bound: clip_b,
                seed_features,
                seed_data,
                ..ExperimentConfig::default()
            };
            let experiment = run_experiment(&config)?;
            let sidecar = experiment.write(&out)?;
            let p = experiment.hyperparams;
            println!(
                "fitted sigma_theta2={:.6} sigma_l2={:.6} sigma_n2={:.6}",
                p.sigma_theta2, p.sigma_l2, p.sigma_n2
            );
            print_summary(&experiment.rows);
            let resets = osgpcp::bench::reset_slots(&experiment.rows);
            if !resets.is_empty() {
                println!("resets at slots {resets:?}");
            }
            println!("wrote {} and {}", out.display(), sidecar.display());
        }
        Command::Summarize { trace } => {
            let rows = read_trace(&trace)?;
            print_summary(&rows);
        }
    }
    Ok(())
}

fn print_summary(rows: &[osgpcp::bench::TraceRow]) {
    println!("{:<12} {:>10} {:>12}", "method", "coverage", "mean_size");
    for s in summarize(rows) {
        println!("{:<12} {:>10.4} {:>12.4}", s.method.to_string(), s.final_coverage, s.mean_size);
    }
    println!("slots: {}", rows.len());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
