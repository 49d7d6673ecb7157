//! Filter functions `f: R^d -> R^m` behind one fit/transform contract.
//!
//! | kind             | fitted state                         | out of sample |
//! |------------------|--------------------------------------|---------------|
//! | `pca`            | mean + top covariance eigenvectors   | yes           |
//! | `svd`            | top right singular vectors (uncentered) | yes        |
//! | `eccentricity`   | reference point set                  | yes           |
//! | `kernel_density` | reference point set                  | yes           |
//! | `tsne`           | joint embedding table                | no            |
//! | `tae`            | encoder/decoder weights              | yes           |

pub mod tsne;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{concatenate, Array1, ArrayView2, Axis};
use ndarray::parallel::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json, MatrixDoc};
use crate::numerics::{ensure_finite, svd_topk, sym_eig_topk};
use crate::tae::{self, Checkpoint, EpochLoss, MlpParams, TaeConfig};
use crate::{Error, Matrix, Result};

pub use tsne::{tsne_embed, TsneParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Tae,
    Pca,
    Tsne,
    Svd,
    KernelDensity,
    Eccentricity,
}

impl FilterKind {
    pub const ALL: [FilterKind; 6] = [
        FilterKind::Tae,
        FilterKind::Pca,
        FilterKind::Tsne,
        FilterKind::Svd,
        FilterKind::KernelDensity,
        FilterKind::Eccentricity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Tae => "tae",
            FilterKind::Pca => "pca",
            FilterKind::Tsne => "tsne",
            FilterKind::Svd => "svd",
            FilterKind::KernelDensity => "kernel_density",
            FilterKind::Eccentricity => "eccentricity",
        }
    }

    /// Default spec for this kind.
    pub fn default_spec(self) -> FilterSpec {
        match self {
            FilterKind::Tae => FilterSpec::Tae(TaeConfig::default()),
            FilterKind::Pca => FilterSpec::Pca { latent_dim: 2 },
            FilterKind::Tsne => FilterSpec::Tsne(TsneParams::default()),
            FilterKind::Svd => FilterSpec::Svd { latent_dim: 2 },
            FilterKind::KernelDensity => FilterSpec::KernelDensity { bandwidth: 1.0 },
            FilterKind::Eccentricity => FilterSpec::Eccentricity,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown filter kind `{s}`")))
    }
}

/// A filter family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    Pca { latent_dim: usize },
    Svd { latent_dim: usize },
    Eccentricity,
    KernelDensity { bandwidth: f64 },
    Tsne(TsneParams),
    Tae(TaeConfig),
}

impl FilterSpec {
    pub fn kind(&self) -> FilterKind {
        match self {
            FilterSpec::Pca { .. } => FilterKind::Pca,
            FilterSpec::Svd { .. } => FilterKind::Svd,
            FilterSpec::Eccentricity => FilterKind::Eccentricity,
            FilterSpec::KernelDensity { .. } => FilterKind::KernelDensity,
            FilterSpec::Tsne(_) => FilterKind::Tsne,
            FilterSpec::Tae(_) => FilterKind::Tae,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            FilterSpec::Pca { latent_dim } | FilterSpec::Svd { latent_dim } => *latent_dim,
            FilterSpec::Eccentricity | FilterSpec::KernelDensity { .. } => 1,
            FilterSpec::Tsne(p) => p.latent_dim,
            FilterSpec::Tae(c) => c.latent_dim,
        }
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Linear { mean: Option<Array1<f64>>, basis: Matrix },
    Reference { points: Matrix },
    Table { index: HashMap<u64, usize>, keys: Vec<u64>, embedding: Matrix },
    Network { params: MlpParams, loss_log: Vec<EpochLoss> },
}

/// A fitted filter.
#[derive(Debug, Clone)]
pub struct FilterModel {
    spec: FilterSpec,
    input_dim: usize,
    state: Fitted,
}

/// FNV-1a over the bit patterns of a row; identifies rows of the t-SNE table.
pub fn row_key(row: ndarray::ArrayView1<'_, f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in row {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn build_index(keys: &[u64]) -> HashMap<u64, usize> {
    let mut index = HashMap::with_capacity(keys.len());
    for (i, &k) in keys.iter().enumerate() {
        index.entry(k).or_insert(i);
    }
    index
}

/// Fits a filter on `train`. `aux` is required for t-SNE: those rows are
/// embedded jointly with `train` so that they can be looked up afterwards.
pub fn fit(spec: &FilterSpec, train: ArrayView2<'_, f64>, aux: Option<ArrayView2<'_, f64>>) -> Result<FilterModel> {
    let (n, d) = train.dim();
    if n == 0 {
        return Err(Error::invalid("cannot fit a filter on an empty training set"));
    }
    ensure_finite(train, "training data")?;
    let m = spec.latent_dim();
    if m == 0 || m >= d {
        return Err(Error::invalid(format!(
            "latent dimension {m} must satisfy 1 <= m < d = {d}"
        )));
    }
    let state = match spec {
        FilterSpec::Pca { .. } => {
            if n < 2 {
                return Err(Error::invalid("PCA needs at least 2 training rows"));
            }
            let mean = train.mean_axis(Axis(0)).expect("n > 0");
            let centered = &train - &mean;
            let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
            let (_, basis) = sym_eig_topk(cov.view(), m)?;
            Fitted::Linear { mean: Some(mean), basis }
        }
        FilterSpec::Svd { .. } => {
            if m > n {
                return Err(Error::invalid("SVD filter needs at least latent_dim training rows"));
            }
            let (_, basis) = svd_topk(train, m)?;
            Fitted::Linear { mean: None, basis }
        }
        FilterSpec::Eccentricity => Fitted::Reference { points: train.to_owned() },
        FilterSpec::KernelDensity { bandwidth } => {
            if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::invalid("kernel density bandwidth must be positive"));
            }
            Fitted::Reference { points: train.to_owned() }
        }
        FilterSpec::Tsne(params) => {
            let aux = aux.ok_or_else(|| {
                Error::invalid("t-SNE cannot embed new points; pass the rows to embed as aux")
            })?;
            if aux.ncols() != d {
                return Err(Error::invalid("aux rows must have the training width"));
            }
            let joint = concatenate(Axis(0), &[train, aux]).expect("widths checked");
            let embedding = tsne::run_tsne(joint.view(), params, false)?.embedding;
            let keys: Vec<u64> = joint.rows().into_iter().map(row_key).collect();
            Fitted::Table { index: build_index(&keys), keys, embedding }
        }
        FilterSpec::Tae(config) => {
            let trained = tae::train(config, train)?;
            Fitted::Network { params: trained.params, loss_log: trained.loss_log }
        }
    };
    Ok(FilterModel { spec: spec.clone(), input_dim: d, state })
}

impl FilterModel {
    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn kind(&self) -> FilterKind {
        self.spec.kind()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim()
    }

    /// False only for t-SNE, which can only return rows it was fitted on.
    pub fn out_of_sample(&self) -> bool {
        !matches!(self.state, Fitted::Table { .. })
    }

    /// Number of stored reference points (eccentricity and kernel density).
    pub fn reference_size(&self) -> Option<usize> {
        match &self.state {
            Fitted::Reference { points } => Some(points.nrows()),
            _ => None,
        }
    }

    /// Per-epoch losses of a trained autoencoder filter.
    pub fn loss_log(&self) -> Option<&[EpochLoss]> {
        match &self.state {
            Fitted::Network { loss_log, .. } => Some(loss_log),
            _ => None,
        }
    }

    pub fn network(&self) -> Option<&MlpParams> {
        match &self.state {
            Fitted::Network { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        if x.ncols() != self.input_dim {
            return Err(Error::invalid(format!(
                "filter fitted on {} columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        ensure_finite(x, "filter input")?;
        match (&self.state, &self.spec) {
            (Fitted::Linear { mean, basis }, _) => Ok(match mean {
                Some(mu) => (&x - mu).dot(basis),
                None => x.dot(basis),
            }),
            (Fitted::Reference { points }, FilterSpec::Eccentricity) => {
                Ok(per_row(x, |row| eccentricity(row, points.view())))
            }
            (Fitted::Reference { points }, FilterSpec::KernelDensity { bandwidth }) => {
                Ok(per_row(x, |row| log_density(row, points.view(), *bandwidth)))
            }
            (Fitted::Table { index, embedding, .. }, _) => {
                let mut rows = Vec::with_capacity(x.nrows());
                for row in x.rows() {
                    let i = index
                        .get(&row_key(row))
                        .ok_or_else(|| Error::OutOfSampleUnsupported(self.kind().name().into()))?;
                    rows.push(*i);
                }
                Ok(embedding.select(Axis(0), &rows))
            }
            (Fitted::Network { params, .. }, _) => tae::encode(params, x),
            (Fitted::Reference { .. }, _) => unreachable!("reference state only for density filters"),
        }
    }
}

fn per_row(x: ArrayView2<'_, f64>, f: impl Fn(ndarray::ArrayView1<'_, f64>) -> f64 + Sync + Send) -> Matrix {
    let values: Vec<f64> = x.axis_iter(Axis(0)).into_par_iter().map(f).collect();
    Matrix::from_shape_vec((x.nrows(), 1), values).expect("one value per row")
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Largest Euclidean distance from `x` to any reference point.
fn eccentricity(x: ndarray::ArrayView1<'_, f64>, reference: ArrayView2<'_, f64>) -> f64 {
    reference
        .rows()
        .into_iter()
        .map(|r| sq_dist(x, r))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Log of the Gaussian kernel density estimate, computed with log-sum-exp.
fn log_density(x: ndarray::ArrayView1<'_, f64>, reference: ArrayView2<'_, f64>, bandwidth: f64) -> f64 {
    let two_h2 = 2.0 * bandwidth * bandwidth;
    let exps: Vec<f64> = reference.rows().into_iter().map(|r| -sq_dist(x, r) / two_h2).collect();
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln();
    let d = x.len() as f64;
    lse - (reference.nrows() as f64).ln() - 0.5 * d * (std::f64::consts::TAU * bandwidth * bandwidth).ln()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StateDoc {
    Linear { mean: Option<Vec<f64>>, basis: MatrixDoc },
    Reference { points: MatrixDoc },
    Table { keys: Vec<u64>, embedding: MatrixDoc },
    Checkpoint { path: PathBuf },
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kind: FilterKind,
    spec: FilterSpec,
    input_dim: usize,
    out_of_sample: bool,
    state: StateDoc,
}

impl FilterModel {
    /// Writes the model as versioned JSON. Autoencoder weights go to a
    /// sibling `<stem>.checkpoint.json` that the model document points to.
    pub fn save(&self, path: &Path) -> Result<()> {
        let state = match &self.state {
            Fitted::Linear { mean, basis } => StateDoc::Linear {
                mean: mean.as_ref().map(|m| m.to_vec()),
                basis: MatrixDoc::from(basis),
            },
            Fitted::Reference { points } => StateDoc::Reference { points: MatrixDoc::from(points) },
            Fitted::Table { keys, embedding, .. } => StateDoc::Table {
                keys: keys.clone(),
                embedding: MatrixDoc::from(embedding),
            },
            Fitted::Network { params, loss_log } => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tae");
                let file = PathBuf::from(format!("{stem}.checkpoint.json"));
                let config = match &self.spec {
                    FilterSpec::Tae(c) => Some(c),
                    _ => None,
                };
                let target = path.parent().unwrap_or(Path::new("")).join(&file);
                Checkpoint::new(params, config, loss_log).save(&target)?;
                StateDoc::Checkpoint { path: file }
            }
        };
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind(),
            spec: self.spec.clone(),
            input_dim: self.input_dim,
            out_of_sample: self.out_of_sample(),
            state,
        };
        write_json(path, &doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: ModelDoc = read_json(path)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        let state = match doc.state {
            StateDoc::Linear { mean, basis } => Fitted::Linear {
                mean: mean.map(Array1::from),
                basis: basis.to_matrix()?,
            },
            StateDoc::Reference { points } => Fitted::Reference { points: points.to_matrix()? },
            StateDoc::Table { keys, embedding } => Fitted::Table {
                index: build_index(&keys),
                keys,
                embedding: embedding.to_matrix()?,
            },
            StateDoc::Checkpoint { path: rel } => {
                let full = if rel.is_absolute() {
                    rel
                } else {
                    path.parent().unwrap_or(Path::new("")).join(rel)
                };
                let ck = Checkpoint::load(&full)?;
                Fitted::Network { params: ck.params()?, loss_log: ck.loss_log }
            }
        };
        Ok(FilterModel { spec: doc.spec, input_dim: doc.input_dim, state })
    }
}
