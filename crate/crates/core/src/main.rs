use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tae_mapper::cli::{self, GraphSource};
use tae_mapper::config::RunConfig;
use tae_mapper::filters::FilterKind;
use tae_mapper::mapper::GraphFormat;
use tae_mapper::Result;

#[derive(Parser)]
#[command(name = "tae-mapper", version, about = "Mapper filter benchmark on nested hyperspheres")]
struct Args {
    /// JSON run configuration (defaults to the chosen preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given: paper, desk or smoke.
    #[arg(long, global = true, default_value = "paper")]
    preset: String,
    /// Override any config field, e.g. `--set mapper.eps=3.5`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Global seed (split, dataset, t-SNE and autoencoder).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the spheres dataset and its scaled train/test split.
    Generate,
    /// Fit one filter (or all configured filters) on the training split.
    Fit {
        #[arg(long, required_unless_present = "all")]
        filter: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Evaluate the overlap × intervals grid for every configured filter.
    Bench {
        /// Fit filters whose model file is missing instead of failing.
        #[arg(long)]
        fit_missing: bool,
    },
    /// Print the best/average/worst table and write histogram files.
    Report {
        /// Bench directory (defaults to <output_dir>/bench).
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Export a Mapper graph as DOT or JSON.
    ExportGraph {
        /// Convert an exported JSON graph.
        #[arg(long, conflicts_with_all = ["filter", "overlap", "intervals"])]
        graph: Option<PathBuf>,
        #[arg(long, requires_all = ["overlap", "intervals"])]
        filter: Option<String>,
        #[arg(long)]
        overlap: Option<f64>,
        #[arg(long)]
        intervals: Option<usize>,
        #[arg(long, default_value = "dot")]
        format: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration as JSON.
    ShowConfig,
}

fn resolve_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(&args.preset)?,
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_global_seed(seed);
    }
    for o in &args.overrides {
        cfg = cfg.with_override(o)?;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    let cfg = resolve_config(&args)?;
    cli::with_threads(&cfg, || match &args.command {
        Command::Generate => {
            let dir = cli::cmd_generate(&cfg)?;
            eprintln!("dataset written to {}", dir.display());
            Ok(())
        }
        Command::Fit { filter, all } => {
            let kinds: Vec<FilterKind> = if *all {
                cfg.grid.filters.iter().map(|s| s.kind()).collect()
            } else {
                vec![filter.as_deref().unwrap_or_default().parse()?]
            };
            for kind in kinds {
                let path = cli::cmd_fit(&cfg, kind)?;
                eprintln!("{kind}: {}", path.display());
            }
            Ok(())
        }
        Command::Bench { fit_missing } => {
            let out = cli::cmd_bench(&cfg, *fit_missing)?;
            eprintln!("{} cells -> {}", out.records.len(), out.results_csv.display());
            Ok(())
        }
        Command::Report { results } => {
            let dir = results.clone().unwrap_or_else(|| cfg.bench_dir());
            let table = cli::cmd_report(&dir, &cfg.output_dir.join("report"))?;
            print!("{table}");
            Ok(())
        }
        Command::ExportGraph { graph, filter, overlap, intervals, format, output } => {
            let source = match (graph, filter) {
                (Some(path), _) => GraphSource::File(path.clone()),
                (None, Some(f)) => GraphSource::Cell {
                    filter: f.parse()?,
                    overlap: overlap.unwrap_or_default(),
                    intervals: intervals.unwrap_or_default(),
                },
                (None, None) => {
                    return Err(tae_mapper::Error::InvalidArgument(
                        "pass --graph or --filter/--overlap/--intervals".into(),
                    ))
                }
            };
            let bytes = cli::cmd_export_graph(&cfg, &source, format.parse::<GraphFormat>()?)?;
            match output {
                Some(path) => tae_mapper::io::write_text(path, &String::from_utf8_lossy(&bytes)),
                None => {
                    print!("{}", String::from_utf8_lossy(&bytes));
                    Ok(())
                }
            }
        }
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
