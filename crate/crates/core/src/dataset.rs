//! Nested-hypersphere point clouds and the train/test protocol.
//!
//! A [`SphereSpec`] describes `small_sphere_count` spheres of radius
//! `small_radius`, each translated by a random center, all enclosed by one
//! sphere of radius `big_radius` centered at the origin. Every point carries
//! the index of the sphere that generated it; the enclosing sphere takes the
//! last label.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{numerics::ensure_finite, Error, Matrix, Result};

const MAX_CENTER_ATTEMPTS: usize = 10_000;

/// Points with one manifold label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    points: Matrix,
    labels: Vec<usize>,
    manifold_count: usize,
}

impl LabeledPointCloud {
    pub fn new(points: Matrix, labels: Vec<usize>, manifold_count: usize) -> Result<Self> {
        if labels.len() != points.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                points.nrows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= manifold_count) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {manifold_count} manifolds"
            )));
        }
        ensure_finite(points.view(), "point cloud")?;
        Ok(LabeledPointCloud {
            points,
            labels,
            manifold_count,
        })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn manifold_count(&self) -> usize {
        self.manifold_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    fn select(&self, rows: &[usize]) -> LabeledPointCloud {
        LabeledPointCloud {
            points: self.points.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            manifold_count: self.manifold_count,
        }
    }
}

/// Parameters of the nested-spheres dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub ambient_dim: usize,
    pub small_sphere_count: usize,
    pub small_radius: f64,
    pub big_radius: f64,
    /// Points on each small sphere.
    pub points_per_sphere: usize,
    /// The enclosing sphere carries `big_sphere_factor * points_per_sphere`
    /// points.
    #[serde(default = "default_big_sphere_factor")]
    pub big_sphere_factor: usize,
    /// Small-sphere centers are Gaussian with per-coordinate stddev
    /// `center_spread / sqrt(ambient_dim - 1)`, i.e. a typical center norm
    /// close to `center_spread`.
    #[serde(default = "default_center_spread")]
    pub center_spread: f64,
    pub seed: u64,
}

fn default_center_spread() -> f64 {
    10.0
}

fn default_big_sphere_factor() -> usize {
    10
}

impl Default for SphereSpec {
    fn default() -> Self {
        SphereSpec {
            ambient_dim: 101,
            small_sphere_count: 10,
            small_radius: 5.0,
            big_radius: 25.0,
            points_per_sphere: 500,
            big_sphere_factor: default_big_sphere_factor(),
            center_spread: default_center_spread(),
            seed: 42,
        }
    }
}

impl SphereSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim < 2 {
            return Err(Error::invalid("ambient_dim must be at least 2"));
        }
        if self.points_per_sphere == 0 || self.big_sphere_factor == 0 {
            return Err(Error::invalid("points_per_sphere and big_sphere_factor must be at least 1"));
        }
        if !(self.small_radius > 0.0 && self.small_radius.is_finite()) {
            return Err(Error::invalid("small_radius must be positive"));
        }
        if !(self.big_radius > self.small_radius && self.big_radius.is_finite()) {
            return Err(Error::invalid("big_radius must exceed small_radius"));
        }
        if !(self.center_spread >= 0.0 && self.center_spread.is_finite()) {
            return Err(Error::invalid("center_spread must be nonnegative"));
        }
        Ok(())
    }

    pub fn manifold_count(&self) -> usize {
        self.small_sphere_count + 1
    }

    /// Number of points carrying `label`.
    pub fn points_of(&self, label: usize) -> usize {
        if label < self.small_sphere_count {
            self.points_per_sphere
        } else {
            self.points_per_sphere * self.big_sphere_factor
        }
    }

    pub fn total_points(&self) -> usize {
        (0..self.manifold_count()).map(|l| self.points_of(l)).sum()
    }

    fn center_stddev(&self) -> f64 {
        self.center_spread / ((self.ambient_dim - 1) as f64).sqrt()
    }

    /// Radius of the sphere carrying `label`.
    pub fn radius(&self, label: usize) -> f64 {
        if label < self.small_sphere_count {
            self.small_radius
        } else {
            self.big_radius
        }
    }

    /// Recomputes the small-sphere centers (one row per small sphere) from the
    /// seed alone; `generate_spheres` draws them first from the same stream.
    pub fn centers(&self) -> Result<Matrix> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        draw_centers(self, &mut rng)
    }
}

fn draw_centers(spec: &SphereSpec, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let d = spec.ambient_dim;
    let std = spec.center_stddev();
    let limit = spec.big_radius - spec.small_radius;
    let mut centers = Array2::zeros((spec.small_sphere_count, d));
    for s in 0..spec.small_sphere_count {
        let mut placed = false;
        for _ in 0..MAX_CENTER_ATTEMPTS {
            let c: Vec<f64> = (0..d)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < limit {
                centers.row_mut(s).assign(&ndarray::Array1::from(c));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::GenerationFailure(format!(
                "could not place small sphere {s} strictly inside the enclosing sphere after \
                 {MAX_CENTER_ATTEMPTS} draws (center norm must stay below {limit}, typical norm is {:.3})",
                std * (d as f64).sqrt()
            )));
        }
    }
    Ok(centers)
}

fn unit_sphere_rows(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Matrix {
    let mut out = Array2::zeros((n, dim));
    for mut row in out.rows_mut() {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }
    out
}

/// `n` points drawn uniformly from the unit sphere S^{dim-1}.
pub fn sample_unit_sphere(dim: usize, n: usize, seed: u64) -> Result<Matrix> {
    if dim == 0 || n == 0 {
        return Err(Error::invalid("sample_unit_sphere needs dim >= 1 and n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(unit_sphere_rows(&mut rng, dim, n))
}

/// Generates the nested-spheres cloud. Small sphere `j` gets label `j`; the
/// enclosing sphere gets label `small_sphere_count`.
pub fn generate_spheres(spec: &SphereSpec) -> Result<LabeledPointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = draw_centers(spec, &mut rng)?;
    let m = spec.manifold_count();
    let n = spec.total_points();
    let mut points = Array2::zeros((n, spec.ambient_dim));
    let mut labels = Vec::with_capacity(n);
    let mut offset = 0;
    for label in 0..m {
        let count = spec.points_of(label);
        let unit = unit_sphere_rows(&mut rng, spec.ambient_dim, count);
        let radius = spec.radius(label);
        for (k, u) in unit.rows().into_iter().enumerate() {
            let mut row = points.row_mut(offset + k);
            row.assign(&u.mapv(|v| v * radius));
            if label < spec.small_sphere_count {
                row += &centers.row(label);
            }
            labels.push(label);
        }
        offset += count;
    }
    LabeledPointCloud::new(points, labels, m)
}

/// Per-feature z-score fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Population mean and stddev per column; columns with stddev below
    /// 1e-12 keep stddev 1 so they map to zeros.
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std < 1e-12 { 1.0 } else { std });
        }
        Ok(Scaler { means, stds })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        if x.ncols() != self.means.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} features, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Scaled train/test partitions plus the scaler fitted on train.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledPointCloud,
    pub test: LabeledPointCloud,
    pub scaler: Scaler,
}

/// Stratified random split followed by z-scoring with the train statistics.
///
/// Each label contributes `round(count * test_fraction)` test points, clamped
/// so both sides keep at least one point. Rows keep their original relative
/// order within each partition.
pub fn split_and_scale(
    cloud: &LabeledPointCloud,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie in (0, 1)"));
    }
    if cloud.len() < 2 {
        return Err(Error::invalid("split needs at least 2 points"));
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); cloud.manifold_count()];
    for (i, &l) in cloud.labels().iter().enumerate() {
        by_label[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; cloud.len()];
    for (label, mut idx) in by_label.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::StratificationFailure {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let train_rows: Vec<usize> = (0..cloud.len()).filter(|&i| !is_test[i]).collect();
    let test_rows: Vec<usize> = (0..cloud.len()).filter(|&i| is_test[i]).collect();
    let raw_train = cloud.select(&train_rows);
    let raw_test = cloud.select(&test_rows);
    let scaler = Scaler::fit(raw_train.points().view())?;
    let train = LabeledPointCloud {
        points: scaler.transform(raw_train.points().view())?,
        ..raw_train
    };
    let test = LabeledPointCloud {
        points: scaler.transform(raw_test.points().view())?,
        ..raw_test
    };
    Ok(Split {
        train,
        test,
        scaler,
    })
}
