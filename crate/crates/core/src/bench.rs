//! Separation metric, grid search over cover parameters, and summaries.
//!
//! The metric of a Mapper graph is the mean, over vertices, of the number of
//! distinct manifold labels among a vertex's members. A graph in which every
//! vertex holds points from a single manifold scores exactly 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::filters::{self, FilterKind, FilterModel, FilterSpec};
use crate::io::ensure_parent;
use crate::mapper::{build_mapper, build_mapper_train_then_map, MapperGraph, MapperParams};
use crate::{Error, Matrix, Result};

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

/// Mean number of distinct labels per vertex.
pub fn metric_m(graph: &MapperGraph) -> Result<f64> {
    if graph.vertices.is_empty() {
        return Err(Error::MetricUndefined);
    }
    let total: usize = graph.vertices.iter().map(|v| v.distinct_labels()).sum();
    Ok(total as f64 / graph.vertices.len() as f64)
}

/// Overlaps × interval counts × filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub overlaps: Vec<f64>,
    pub intervals: Vec<usize>,
    pub filters: Vec<FilterSpec>,
}

impl GridSpec {
    /// Overlaps 0.025..=0.4 in steps of 0.025, interval counts 5..=45 in
    /// steps of 5.
    pub fn default_overlaps() -> Vec<f64> {
        (1..=16).map(|k| k as f64 / 40.0).collect()
    }

    pub fn default_intervals() -> Vec<usize> {
        (1..=9).map(|k| 5 * k).collect()
    }

    pub fn cells(&self) -> usize {
        self.overlaps.len() * self.intervals.len()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            overlaps: Self::default_overlaps(),
            intervals: Self::default_intervals(),
            filters: FilterKind::ALL.iter().map(|k| k.default_spec()).collect(),
        }
    }
}

/// Which points the Mapper graph is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltOn {
    /// Cover and cluster the test embeddings directly.
    #[default]
    Test,
    /// Build on the train embeddings, then map the test points into it.
    TrainThenMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperSettings {
    pub eps: f64,
    pub min_samples: usize,
    pub graph_built_on: BuiltOn,
}

impl Default for MapperSettings {
    fn default() -> Self {
        MapperSettings {
            eps: 4.0,
            min_samples: 5,
            graph_built_on: BuiltOn::Test,
        }
    }
}

impl MapperSettings {
    pub fn params(&self, overlap: f64, intervals: usize) -> MapperParams {
        MapperParams {
            intervals,
            overlap,
            eps: self.eps,
            min_samples: self.min_samples,
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub filter: FilterKind,
    pub overlap: f64,
    pub intervals: usize,
    /// `None` when the graph had no vertices or the cell failed.
    pub metric: Option<f64>,
    pub vertices: usize,
    pub noise: usize,
    pub graph_path: Option<String>,
}

/// Fits every filter of the grid on the training partition (t-SNE also
/// embeds the test rows).
pub fn fit_filters(split: &Split, filters: &[FilterSpec]) -> Result<Vec<FilterModel>> {
    filters
        .iter()
        .map(|spec| {
            filters::fit(
                spec,
                split.train.points().view(),
                Some(split.test.points().view()),
            )
        })
        .collect()
}

struct Embedded {
    train: Option<Matrix>,
    test: Matrix,
}

fn embed(model: &FilterModel, split: &Split, settings: &MapperSettings) -> Result<Embedded> {
    let test = model.transform(split.test.points().view())?;
    let train = match settings.graph_built_on {
        BuiltOn::Test => None,
        BuiltOn::TrainThenMap => Some(model.transform(split.train.points().view())?),
    };
    Ok(Embedded { train, test })
}

fn cell_graph(
    embedded: &Embedded,
    split: &Split,
    kind: FilterKind,
    params: &MapperParams,
) -> Result<MapperGraph> {
    let labels = split.test.labels();
    let mc = split.test.manifold_count();
    let mut graph = match &embedded.train {
        None => build_mapper(embedded.test.view(), labels, mc, params)?,
        Some(train) => build_mapper_train_then_map(train.view(), embedded.test.view(), labels, mc, params)?,
    };
    graph.provenance.filter = Some(kind.name().to_string());
    Ok(graph)
}

/// Mapper graph of one (filter, overlap, intervals) cell.
pub fn build_cell_graph(
    model: &FilterModel,
    split: &Split,
    settings: &MapperSettings,
    overlap: f64,
    intervals: usize,
) -> Result<MapperGraph> {
    let embedded = embed(model, split, settings)?;
    cell_graph(&embedded, split, model.kind(), &settings.params(overlap, intervals))
}

/// Scores every (overlap, intervals) cell for each fitted model. Cells run in
/// parallel; the output is ordered by model position, overlap, then
/// intervals. A failing cell is recorded as undefined.
pub fn evaluate_grid(
    models: &[FilterModel],
    split: &Split,
    overlaps: &[f64],
    intervals: &[usize],
    settings: &MapperSettings,
) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::with_capacity(models.len() * overlaps.len() * intervals.len());
    for model in models {
        let embedded = embed(model, split, settings)?;
        let cells: Vec<(f64, usize)> = overlaps
            .iter()
            .flat_map(|&o| intervals.iter().map(move |&i| (o, i)))
            .collect();
        let kind = model.kind();
        let mut batch: Vec<BenchRecord> = cells
            .par_iter()
            .map(|&(o, i)| {
                let graph = cell_graph(&embedded, split, kind, &settings.params(o, i));
                let (metric, vertices, noise) = match graph {
                    Ok(g) => (metric_m(&g).ok(), g.vertices.len(), g.noise_count),
                    Err(_) => (None, 0, 0),
                };
                BenchRecord {
                    filter: kind,
                    overlap: o,
                    intervals: i,
                    metric,
                    vertices,
                    noise,
                    graph_path: None,
                }
            })
            .collect();
        batch.sort_by(|a, b| a.overlap.total_cmp(&b.overlap).then(a.intervals.cmp(&b.intervals)));
        records.extend(batch);
    }
    Ok(records)
}

/// Fits the grid's filters on `split.train` and evaluates every cell.
pub fn run_grid(split: &Split, grid: &GridSpec, settings: &MapperSettings) -> Result<Vec<BenchRecord>> {
    let models = fit_filters(split, &grid.filters)?;
    evaluate_grid(&models, split, &grid.overlaps, &grid.intervals, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed-width bins over `[1, manifold_count]`; values at or beyond the top
/// edge land in the last bin.
pub fn histogram(values: &[f64], manifold_count: usize) -> Vec<HistogramBin> {
    let span = (manifold_count.max(2) - 1) as f64;
    let bins = (span / HISTOGRAM_BIN_WIDTH).round() as usize;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: 1.0 + k as f64 * HISTOGRAM_BIN_WIDTH,
            hi: 1.0 + (k + 1) as f64 * HISTOGRAM_BIN_WIDTH,
            count: 0,
        })
        .collect();
    for &v in values {
        let k = ((v - 1.0) / HISTOGRAM_BIN_WIDTH).floor().max(0.0) as usize;
        out[k.min(bins - 1)].count += 1;
    }
    out
}

/// Best/average/worst over the defined cells of one filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub filter: FilterKind,
    pub best: f64,
    pub average: f64,
    pub worst: f64,
    pub undefined_cells: usize,
    pub distribution: Vec<f64>,
}

pub fn summarize(records: &[BenchRecord], kind: FilterKind) -> Result<FilterSummary> {
    let mine: Vec<&BenchRecord> = records.iter().filter(|r| r.filter == kind).collect();
    let mut distribution: Vec<f64> = mine.iter().filter_map(|r| r.metric).collect();
    if distribution.is_empty() {
        return Err(Error::SummaryUnavailable(kind.name().into()));
    }
    distribution.sort_by(f64::total_cmp);
    let best = distribution[0];
    let worst = distribution[distribution.len() - 1];
    let average = (distribution.iter().sum::<f64>() / distribution.len() as f64).clamp(best, worst);
    Ok(FilterSummary {
        filter: kind,
        best,
        average,
        worst,
        undefined_cells: mine.len() - distribution.len(),
        distribution,
    })
}

/// Share of this filter's cells (undefined ones included) with metric at most
/// `threshold`.
pub fn fraction_at_most(records: &[BenchRecord], kind: FilterKind, threshold: f64) -> f64 {
    let mine: Vec<&BenchRecord> = records.iter().filter(|r| r.filter == kind).collect();
    if mine.is_empty() {
        return 0.0;
    }
    let hits = mine.iter().filter(|r| r.metric.is_some_and(|m| m <= threshold)).count();
    hits as f64 / mine.len() as f64
}

/// Filters in order of first appearance.
pub fn filters_in(records: &[BenchRecord]) -> Vec<FilterKind> {
    let mut kinds = Vec::new();
    for r in records {
        if !kinds.contains(&r.filter) {
            kinds.push(r.filter);
        }
    }
    kinds
}

/// Lowest-metric defined cell of a filter (first in record order on ties).
pub fn best_record(records: &[BenchRecord], kind: FilterKind) -> Option<&BenchRecord> {
    records
        .iter()
        .filter(|r| r.filter == kind && r.metric.is_some())
        .fold(None, |acc: Option<&BenchRecord>, r| match acc {
            Some(b) if b.metric <= r.metric => Some(b),
            _ => Some(r),
        })
}

const CSV_HEADER: [&str; 7] = ["filter", "overlap", "intervals", "metric", "vertices", "noise", "defined"];

pub fn write_results_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut text = CSV_HEADER.join(",");
    text.push('\n');
    for r in records {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            r.filter,
            r.overlap,
            r.intervals,
            r.metric.map(|m| m.to_string()).unwrap_or_default(),
            r.vertices,
            r.noise,
            r.metric.is_some()
        );
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(bad(1, format!("expected header `{}`", CSV_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| bad(row, e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(bad(row, format!("expected {} fields", CSV_HEADER.len())));
        }
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| bad(row, format!("{}: {e}", CSV_HEADER[i]))) };
        let int = |i: usize| -> Result<usize> { rec[i].parse().map_err(|e| bad(row, format!("{}: {e}", CSV_HEADER[i]))) };
        let defined: bool = rec[6].parse().map_err(|e| bad(row, format!("defined: {e}")))?;
        let metric = if defined { Some(num(3)?) } else { None };
        records.push(BenchRecord {
            filter: rec[0].parse().map_err(|e: Error| bad(row, e.to_string()))?,
            overlap: num(1)?,
            intervals: int(2)?,
            metric,
            vertices: int(4)?,
            noise: int(5)?,
            graph_path: None,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub best: f64,
    pub average: f64,
    pub worst: f64,
    pub undefined_cells: usize,
    pub defined_cells: usize,
    pub fraction_at_most_1_05: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Per-filter summary document keyed by filter name. Filters without any
/// defined cell are reported with `null`.
pub fn summary_document(records: &[BenchRecord], manifold_count: usize) -> BTreeMap<String, Option<SummaryEntry>> {
    filters_in(records)
        .into_iter()
        .map(|kind| {
            let entry = summarize(records, kind).ok().map(|s| SummaryEntry {
                best: s.best,
                average: s.average,
                worst: s.worst,
                undefined_cells: s.undefined_cells,
                defined_cells: s.distribution.len(),
                fraction_at_most_1_05: fraction_at_most(records, kind, 1.05),
                histogram: histogram(&s.distribution, manifold_count),
            });
            (kind.name().to_string(), entry)
        })
        .collect()
}

/// Text table with one column per filter and rows Best / Average / Worst.
pub fn format_table(records: &[BenchRecord]) -> String {
    let kinds = filters_in(records);
    let summaries: Vec<Option<FilterSummary>> = kinds.iter().map(|&k| summarize(records, k).ok()).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "");
    for k in &kinds {
        let _ = write!(out, " | {:>14}", k.name());
    }
    out.push('\n');
    let _ = write!(out, "{}", "-".repeat(8 + kinds.len() * 17));
    out.push('\n');
    let rows: [(&str, fn(&FilterSummary) -> f64); 3] = [
        ("Best", |s| s.best),
        ("Average", |s| s.average),
        ("Worst", |s| s.worst),
    ];
    for (name, get) in rows {
        let _ = write!(out, "{name:<8}");
        for s in &summaries {
            match s {
                Some(s) => {
                    let _ = write!(out, " | {:>14.3}", get(s));
                }
                None => {
                    let _ = write!(out, " | {:>14}", "undefined");
                }
            }
        }
        out.push('\n');
    }
    out
}
