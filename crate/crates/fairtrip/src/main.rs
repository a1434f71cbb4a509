use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairtrip::analysis_cmd::{histogram_command, inspect_command};
use fairtrip::config::{Dataset, ExperimentConfig, Overrides};
use fairtrip::error::{Error, Result};
use fairtrip::experiment::{emit_baseline, run_experiment, run_table, write_table};
use fairtrip::io::stata::convert_stata;
use fairtrip::report::write_json;

/// Triplet-loss embeddings of tabular data, collapse diagnostics and
/// random-forest fairness probes.
#[derive(Parser)]
#[command(name = "fairtrip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one embedder and probe every snapshot.
    Run(ConfigArgs),
    /// Run a JSON array of config deltas and write one CSV row per entry.
    Table {
        /// JSON array of objects, each laid over the base config.
        matrix: PathBuf,
        /// Combined CSV to write.
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Probe the raw encoded features (no embedder).
    Baseline {
        #[command(flatten)]
        config: ConfigArgs,
        /// JSON report path (printed to stdout otherwise).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pairwise-distance histogram of a snapshot CSV.
    Histogram {
        /// Snapshot CSV with columns e0,e1,e2,y,s.
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        #[arg(long, default_value_t = 2_000_000)]
        max_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collapse diagnosis and group summary of a snapshot CSV.
    InspectSnapshot {
        embeddings: PathBuf,
        /// Also write cluster_report.txt and summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a Stata .dta file (such as the LSAC export) to CSV.
    ConvertStata {
        input: PathBuf,
        output: PathBuf,
        /// Keep numeric codes instead of value labels.
        #[arg(long)]
        codes: bool,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset file or directory.
    #[arg(long)]
    data_path: Option<PathBuf>,
    /// Sensitive column (`sex` or `race`).
    #[arg(long)]
    sensitive: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Subsample the dataset to at most this many rows.
    #[arg(long)]
    max_rows: Option<usize>,
    /// Replace files in a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&Overrides {
            dataset: self.dataset.as_deref().map(str::parse::<Dataset>).transpose()?,
            data_path: self.data_path.clone(),
            sensitive: self.sensitive.clone(),
            method: self.method.clone(),
            activation: self.activation.clone(),
            margin: self.margin,
            epochs: self.epochs,
            seed: self.seed,
            out: self.out.clone(),
            max_rows: self.max_rows,
        });
        Ok(config)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.load()?;
            if config.out.is_none() {
                return Err(Error::Config("`run` needs an output directory (--out or \"out\")".into()));
            }
            let report = run_experiment(&config, args.overwrite)?;
            for snap in &report.snapshots {
                println!(
                    "epoch {:>5}  loss {:.6}  auc_y {:.3}  auc_s {:.3}  collapsed {}",
                    snap.epoch, snap.mean_loss, snap.probe.auc_y, snap.probe.auc_s, snap.cluster.collapsed
                );
            }
            Ok(())
        }
        Command::Table { matrix, csv, config } => {
            let base = config.load()?;
            if csv.exists() && !config.overwrite {
                return Err(Error::Config(format!("{} exists (pass --overwrite)", csv.display())));
            }
            let text = std::fs::read_to_string(&matrix).map_err(|e| Error::io(&matrix, e))?;
            let matrix: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", matrix.display())))?;
            let rows = run_table(&base, &matrix, config.overwrite)?;
            write_table(&csv, &rows)?;
            let failed = rows.iter().filter(|r| r.last().is_some_and(|s| s != "ok")).count();
            println!("{} rows, {failed} failed", rows.len());
            Ok(())
        }
        Command::Baseline { config, report } => {
            let baseline = emit_baseline(&config.load()?)?;
            match report {
                Some(path) => {
                    if path.exists() && !config.overwrite {
                        return Err(Error::Config(format!("{} exists (pass --overwrite)", path.display())));
                    }
                    write_json(&path, &baseline)?;
                    println!("auc_y {:.3}  auc_s {:.3}", baseline.probe.auc_y, baseline.probe.auc_s);
                    Ok(())
                }
                None => print_json(&baseline),
            }
        }
        Command::Histogram {
            embeddings,
            out,
            bins,
            max_pairs,
            seed,
        } => histogram_command(&embeddings, &out, bins, max_pairs, seed),
        Command::InspectSnapshot { embeddings, out } => {
            print!("{}", inspect_command(&embeddings, out.as_deref())?);
            Ok(())
        }
        Command::ConvertStata { input, output, codes } => {
            let rows = convert_stata(&input, &output, !codes)?;
            println!("wrote {rows} rows to {}", output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fairtrip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
