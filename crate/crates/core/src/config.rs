//! Run configuration: one JSON document describing a whole experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{GridSpec, MapperSettings};
use crate::dataset::SphereSpec;
use crate::filters::{FilterKind, FilterSpec, TsneParams};
use crate::io::read_json;
use crate::tae::TaeConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: SphereSpec,
    pub test_fraction: f64,
    pub grid: GridSpec,
    pub mapper: MapperSettings,
    pub output_dir: PathBuf,
    /// Seed of the train/test split; `with_global_seed` also propagates it
    /// into the dataset and the stochastic filters.
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::paper()
    }
}

impl RunConfig {
    /// Full-scale setting: 101 ambient dimensions, 500 points per small
    /// sphere and 5000 on the enclosing one, 10% held out (9000 training
    /// points), the 16 × 9 grid and all six filters.
    pub fn paper() -> Self {
        RunConfig {
            dataset: SphereSpec::default(),
            test_fraction: 0.1,
            grid: GridSpec::default(),
            mapper: MapperSettings::default(),
            output_dir: PathBuf::from("runs/paper"),
            seed: 42,
            threads: None,
        }
    }

    /// Desk-scale setting: 101 ambient dimensions, 100 train + 50 test points
    /// on every sphere including the enclosing one, autoencoder trained for
    /// 50 epochs.
    pub fn desk() -> Self {
        let mut cfg = RunConfig::paper();
        cfg.dataset.points_per_sphere = 150;
        cfg.dataset.big_sphere_factor = 1;
        cfg.test_fraction = 1.0 / 3.0;
        cfg.output_dir = PathBuf::from("runs/desk");
        for spec in &mut cfg.grid.filters {
            if let FilterSpec::Tae(tae) = spec {
                tae.epochs = 50;
            }
        }
        cfg
    }

    /// Seconds-scale pipeline check: 4 dimensions, 20 points per sphere and a
    /// 2 × 2 grid.
    pub fn smoke() -> Self {
        let mut cfg = RunConfig::paper();
        cfg.dataset = SphereSpec {
            ambient_dim: 4,
            points_per_sphere: 20,
            big_sphere_factor: 1,
            center_spread: 6.0,
            ..SphereSpec::default()
        };
        cfg.test_fraction = 0.5;
        cfg.grid.overlaps = vec![0.1, 0.3];
        cfg.grid.intervals = vec![5, 10];
        cfg.grid.filters = FilterKind::ALL
            .iter()
            .map(|k| match k.default_spec() {
                FilterSpec::Tsne(p) => FilterSpec::Tsne(TsneParams {
                    perplexity: 10.0,
                    iterations: 250,
                    ..p
                }),
                FilterSpec::Tae(c) => FilterSpec::Tae(TaeConfig {
                    hidden: vec![8],
                    batch_size: 16,
                    epochs: 5,
                    ..c
                }),
                other => other,
            })
            .collect();
        cfg.output_dir = PathBuf::from("runs/smoke");
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(RunConfig::paper()),
            "desk" => Ok(RunConfig::desk()),
            "smoke" => Ok(RunConfig::smoke()),
            other => Err(Error::invalid(format!(
                "unknown preset `{other}` (expected paper, desk or smoke)"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Sets the split seed and derives the dataset and filter seeds from it.
    pub fn with_global_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dataset.seed = seed;
        for spec in &mut self.grid.filters {
            match spec {
                FilterSpec::Tsne(p) => p.seed = seed,
                FilterSpec::Tae(c) => c.seed = seed,
                _ => {}
            }
        }
        self
    }

    /// Applies a `dotted.path=value` override. The value is parsed as JSON
    /// when possible and taken as a string otherwise; array elements are
    /// addressed by index (`grid.filters.0.epochs=3`).
    pub fn with_override(self, assignment: &str) -> Result<Self> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override `{assignment}` is not key=value")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&self)?;
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = match slot {
                Value::Object(map) => map
                    .get_mut(key)
                    .ok_or_else(|| Error::invalid(format!("unknown config field `{key}` in `{path}`")))?,
                Value::Array(items) => {
                    let idx: usize = key
                        .parse()
                        .map_err(|_| Error::invalid(format!("`{key}` is not an index in `{path}`")))?;
                    items
                        .get_mut(idx)
                        .ok_or_else(|| Error::invalid(format!("index {idx} out of range in `{path}`")))?
                }
                _ => return Err(Error::invalid(format!("`{path}` descends into a scalar"))),
            };
        }
        *slot = value;
        serde_json::from_value(doc).map_err(|e| Error::invalid(format!("override `{assignment}`: {e}")))
    }

    /// Rejects settings that would only fail deep inside a run.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction must lie in (0, 1)"));
        }
        if self.grid.overlaps.iter().any(|o| !(*o > 0.0 && *o < 1.0)) {
            return Err(Error::invalid("grid overlaps must lie in (0, 1)"));
        }
        if self.grid.intervals.contains(&0) {
            return Err(Error::invalid("grid interval counts must be at least 1"));
        }
        if self.grid.filters.is_empty() {
            return Err(Error::invalid("grid.filters is empty"));
        }
        if !(self.mapper.eps > 0.0 && self.mapper.eps.is_finite()) {
            return Err(Error::invalid("mapper.eps must be positive"));
        }
        if self.mapper.min_samples == 0 {
            return Err(Error::invalid("mapper.min_samples must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn filter_spec(&self, kind: FilterKind) -> Option<&FilterSpec> {
        self.grid.filters.iter().find(|s| s.kind() == kind)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.output_dir.join("dataset")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.output_dir.join("models")
    }

    pub fn bench_dir(&self) -> PathBuf {
        self.output_dir.join("bench")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_roundtrip_through_json() {
        for name in ["paper", "desk", "smoke"] {
            let cfg = RunConfig::preset(name).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        }
        assert!(RunConfig::preset("huge").is_err());
    }

    #[test]
    fn validation_accepts_presets_and_rejects_bad_fields() {
        for name in ["paper", "desk", "smoke"] {
            RunConfig::preset(name).unwrap().validate().unwrap();
        }
        for bad in ["mapper.eps=-1", "mapper.min_samples=0", "test_fraction=1", "grid.overlaps=[0.5,1.0]", "grid.intervals=[0]", "grid.filters=[]"] {
            let cfg = RunConfig::smoke().with_override(bad).unwrap();
            assert!(cfg.validate().is_err(), "{bad}");
        }
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::smoke()
            .with_override("mapper.eps=2.5")
            .unwrap()
            .with_override("grid.filters.0.epochs=1")
            .unwrap()
            .with_override("output_dir=/tmp/x")
            .unwrap()
            .with_override("mapper.graph_built_on=train_then_map")
            .unwrap();
        assert_eq!(cfg.mapper.eps, 2.5);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.mapper.graph_built_on, crate::bench::BuiltOn::TrainThenMap);
        match &cfg.grid.filters[0] {
            FilterSpec::Tae(c) => assert_eq!(c.epochs, 1),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::smoke().with_override("mapper.nope=1").is_err());
        assert!(RunConfig::smoke().with_override("mapper.eps").is_err());
        assert!(RunConfig::smoke().with_override("mapper.eps=\"wide\"").is_err());
    }

    #[test]
    fn global_seed_propagates() {
        let cfg = RunConfig::smoke().with_global_seed(7);
        assert_eq!(cfg.dataset.seed, 7);
        for spec in &cfg.grid.filters {
            match spec {
                FilterSpec::Tsne(p) => assert_eq!(p.seed, 7),
                FilterSpec::Tae(c) => assert_eq!(c.seed, 7),
                _ => {}
            }
        }
    }

    #[test]
    fn desk_preset_proportions() {
        let cfg = RunConfig::desk();
        let n = cfg.dataset.points_per_sphere as f64;
        assert_eq!((n * cfg.test_fraction).round(), 50.0);
        assert_eq!(cfg.dataset.ambient_dim, 101);
        assert_eq!(cfg.dataset.total_points(), 11 * 150);
        let paper = RunConfig::paper();
        let train = paper.dataset.total_points() as f64 * (1.0 - paper.test_fraction);
        assert_eq!(train.round(), 9000.0);
    }
}
