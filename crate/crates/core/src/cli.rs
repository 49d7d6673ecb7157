//! Command implementations behind the `tae-mapper` binary.
//!
//! Output layout under `config.output_dir`:
//!
//! ```text
//! dataset/  spheres.csv train.csv test.csv manifest.json config.json
//! models/   <filter>.json [tae.checkpoint.json tae.loss.csv] config.json
//! bench/    results.csv summary.json graphs/<filter>_best.{dot,json} config.json
//! report/   table.txt histograms/<filter>.csv
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchRecord};
use crate::dataset::{generate_spheres, split_and_scale, Scaler, SphereSpec, Split};
use crate::filters::{self, FilterKind, FilterModel};
use crate::io::{read_json, read_labeled_csv, write_json, write_labeled_csv, write_text};
use crate::mapper::{export_graph, import_graph_json, GraphFormat, MapperGraph};
use crate::config::RunConfig;
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Sidecar of the generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub spec: SphereSpec,
    pub manifold_count: usize,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub train_points: usize,
    pub test_points: usize,
    pub scaler: Scaler,
    pub config: RunConfig,
}

fn write_config_echo(dir: &Path, config: &RunConfig) -> Result<()> {
    write_json(&dir.join("config.json"), config)
}

/// Runs `f` on a dedicated pool when `config.threads` is set.
pub fn with_threads<T: Send>(config: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match config.threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Writes the raw cloud, the scaled train/test partitions and the manifest.
pub fn cmd_generate(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.dataset_dir();
    let cloud = generate_spheres(&config.dataset)?;
    let split = split_and_scale(&cloud, config.test_fraction, config.seed)?;
    write_labeled_csv(&dir.join("spheres.csv"), &cloud)?;
    write_labeled_csv(&dir.join("train.csv"), &split.train)?;
    write_labeled_csv(&dir.join("test.csv"), &split.test)?;
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        spec: config.dataset.clone(),
        manifold_count: cloud.manifold_count(),
        test_fraction: config.test_fraction,
        split_seed: config.seed,
        train_points: split.train.len(),
        test_points: split.test.len(),
        scaler: split.scaler.clone(),
        config: config.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_config_echo(&dir, config)?;
    Ok(dir)
}

/// Reads the scaled partitions written by [`cmd_generate`].
pub fn load_split(config: &RunConfig) -> Result<Split> {
    let dir = config.dataset_dir();
    let manifest: DatasetManifest = read_json(&dir.join("manifest.json"))?;
    let train = read_labeled_csv(&dir.join("train.csv"), Some(manifest.manifold_count))?;
    let test = read_labeled_csv(&dir.join("test.csv"), Some(manifest.manifold_count))?;
    Ok(Split {
        train,
        test,
        scaler: manifest.scaler,
    })
}

pub fn model_path(config: &RunConfig, kind: FilterKind) -> PathBuf {
    config.models_dir().join(format!("{kind}.json"))
}

/// Fits one filter on the training partition and saves it.
pub fn cmd_fit(config: &RunConfig, kind: FilterKind) -> Result<PathBuf> {
    let spec = config
        .filter_spec(kind)
        .ok_or_else(|| Error::invalid(format!("filter `{kind}` is not configured in grid.filters")))?;
    let dir = config.dataset_dir();
    let manifest: DatasetManifest = read_json(&dir.join("manifest.json"))?;
    let train = read_labeled_csv(&dir.join("train.csv"), Some(manifest.manifold_count))?;
    let test_path = dir.join("test.csv");
    let aux = if kind == FilterKind::Tsne {
        if !test_path.exists() {
            return Err(Error::invalid(format!(
                "t-SNE embeds the test rows jointly with train, but {} is missing",
                test_path.display()
            )));
        }
        Some(read_labeled_csv(&test_path, Some(manifest.manifold_count))?)
    } else {
        None
    };
    let model = filters::fit(spec, train.points().view(), aux.as_ref().map(|c| c.points().view()))?;
    let path = model_path(config, kind);
    model.save(&path)?;
    if let Some(log) = model.loss_log() {
        let mut text = String::from("epoch,recon,topo_x_to_z,topo_z_to_x,total\n");
        for e in log {
            let _ = writeln!(
                text,
                "{},{},{},{},{}",
                e.epoch, e.loss.recon, e.loss.topo_x_to_z, e.loss.topo_z_to_x, e.loss.total
            );
        }
        write_text(&config.models_dir().join(format!("{kind}.loss.csv")), &text)?;
    }
    write_config_echo(&config.models_dir(), config)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    config: &'a RunConfig,
    filters: std::collections::BTreeMap<String, Option<bench::SummaryEntry>>,
}

fn write_graph(dir: &Path, stem: &str, graph: &MapperGraph) -> Result<PathBuf> {
    let json = dir.join(format!("{stem}.json"));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(&json, export_graph(graph, GraphFormat::Json)?).map_err(|e| Error::io(&json, e))?;
    let dot = dir.join(format!("{stem}.dot"));
    std::fs::write(&dot, export_graph(graph, GraphFormat::Dot)?).map_err(|e| Error::io(&dot, e))?;
    Ok(json)
}

/// Evaluates the full grid from saved models. With `fit_missing`, filters
/// without a model file are fitted first; otherwise a missing model is an
/// i/o failure.
pub fn cmd_bench(config: &RunConfig, fit_missing: bool) -> Result<BenchOutcome> {
    let split = load_split(config)?;
    let mut models: Vec<FilterModel> = Vec::with_capacity(config.grid.filters.len());
    for spec in &config.grid.filters {
        let path = model_path(config, spec.kind());
        if !path.exists() && fit_missing {
            cmd_fit(config, spec.kind())?;
        }
        models.push(FilterModel::load(&path)?);
    }
    let mut records = bench::evaluate_grid(&models, &split, &config.grid.overlaps, &config.grid.intervals, &config.mapper)?;
    if records.iter().all(|r| r.metric.is_none()) {
        return Err(Error::MetricUndefined);
    }

    let dir = config.bench_dir();
    let graphs = dir.join("graphs");
    for model in &models {
        let kind = model.kind();
        let Some(best) = bench::best_record(&records, kind).cloned() else { continue };
        let graph = bench::build_cell_graph(model, &split, &config.mapper, best.overlap, best.intervals)?;
        let path = write_graph(&graphs, &format!("{kind}_best"), &graph)?;
        let rel = path.strip_prefix(&dir).unwrap_or(&path).display().to_string();
        if let Some(r) = records
            .iter_mut()
            .find(|r| r.filter == kind && r.overlap == best.overlap && r.intervals == best.intervals)
        {
            r.graph_path = Some(rel);
        }
    }

    let results_csv = dir.join("results.csv");
    bench::write_results_csv(&results_csv, &records)?;
    let summary_json = dir.join("summary.json");
    write_json(
        &summary_json,
        &SummaryFile {
            seed: config.seed,
            config,
            filters: bench::summary_document(&records, split.test.manifold_count()),
        },
    )?;
    write_config_echo(&dir, config)?;
    Ok(BenchOutcome {
        records,
        results_csv,
        summary_json,
    })
}

/// Prints-ready table plus histogram files for a bench directory.
pub fn cmd_report(results_dir: &Path, out_dir: &Path) -> Result<String> {
    let records = bench::read_results_csv(&results_dir.join("results.csv"))?;
    let manifold_count = read_json::<RunConfig>(&results_dir.join("config.json"))
        .map(|c| c.dataset.manifold_count())
        .unwrap_or_else(|_| 11);
    if records.iter().all(|r| r.metric.is_none()) {
        let text = "no defined cells\n".to_string();
        write_text(&out_dir.join("table.txt"), &text)?;
        return Ok(text);
    }
    let table = bench::format_table(&records);
    write_text(&out_dir.join("table.txt"), &table)?;
    for kind in bench::filters_in(&records) {
        let Ok(summary) = bench::summarize(&records, kind) else { continue };
        let mut text = String::from("lo,hi,count\n");
        for b in bench::histogram(&summary.distribution, manifold_count) {
            let _ = writeln!(text, "{:.2},{:.2},{}", b.lo, b.hi, b.count);
        }
        write_text(&out_dir.join("histograms").join(format!("{kind}.csv")), &text)?;
    }
    Ok(table)
}

/// Where `export-graph` takes its graph from.
#[derive(Debug, Clone)]
pub enum GraphSource {
    /// A previously exported JSON graph.
    File(PathBuf),
    /// Rebuild one grid cell from the saved model and dataset.
    Cell { filter: FilterKind, overlap: f64, intervals: usize },
}

pub fn cmd_export_graph(config: &RunConfig, source: &GraphSource, format: GraphFormat) -> Result<Vec<u8>> {
    let graph = match source {
        GraphSource::File(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            import_graph_json(&bytes)?
        }
        GraphSource::Cell { filter, overlap, intervals } => {
            let split = load_split(config)?;
            let model = FilterModel::load(&model_path(config, *filter))?;
            bench::build_cell_graph(&model, &split, &config.mapper, *overlap, *intervals)?
        }
    };
    export_graph(&graph, format)
}
