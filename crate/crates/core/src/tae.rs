//! Topological autoencoder.
//!
//! A plain MLP autoencoder whose loss adds a 0-dimensional persistent homology
//! term: distances along the persistence pairings (minimum spanning tree
//! edges) of the input batch must match the same pairs' latent distances, and
//! vice versa. Pairings are recomputed per batch and treated as constants when
//! differentiating.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json, MatrixDoc};
use crate::numerics::{minimum_spanning_tree, pairwise_distances, DistanceMatrix};
use crate::{Error, Matrix, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer `y = act(x·W + b)` with `W` of shape (inputs, outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Layer {
            weights: Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }
}

/// Encoder and decoder layer stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

impl MlpParams {
    /// Encoder `input -> hidden... -> latent` and the mirrored decoder, ReLU on
    /// hidden layers and linear outputs, Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], latent_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(input_dim, hidden, latent_dim, &mut rng)
    }

    fn init_with(
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let stack = |widths: Vec<usize>, rng: &mut ChaCha8Rng| -> Vec<Layer> {
            let last = widths.len() - 2;
            widths
                .windows(2)
                .enumerate()
                .map(|(k, w)| {
                    let act = if k == last {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    };
                    Layer::glorot(w[0], w[1], act, rng)
                })
                .collect()
        };
        let mut enc_widths = vec![input_dim];
        enc_widths.extend_from_slice(hidden);
        enc_widths.push(latent_dim);
        let dec_widths: Vec<usize> = enc_widths.iter().rev().copied().collect();
        let encoder = stack(enc_widths, rng);
        let decoder = stack(dec_widths, rng);
        let params = MlpParams { encoder, decoder };
        params.validate()?;
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, Layer::outputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::invalid("encoder and decoder need at least one layer"));
        }
        for layer in self.encoder.iter().chain(&self.decoder) {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::invalid("bias length must equal layer output width"));
            }
        }
        let chained = |layers: &[Layer]| layers.windows(2).all(|w| w[0].outputs() == w[1].inputs());
        if !chained(&self.encoder) || !chained(&self.decoder) {
            return Err(Error::invalid("consecutive layer widths do not chain"));
        }
        if self.decoder[0].inputs() != self.latent_dim() {
            return Err(Error::invalid("decoder input width must equal latent_dim"));
        }
        if self.decoder.last().map(Layer::outputs) != Some(self.input_dim()) {
            return Err(Error::invalid("decoder output width must equal input width"));
        }
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    pub fn num_parameters(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters in layer order, weights row-major then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in self.layers() {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::invalid("flat parameter vector has the wrong length"));
        }
        let mut it = flat.iter();
        for l in self.layers_mut() {
            for w in l.weights.iter_mut() {
                *w = *it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

struct Trace {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

fn run_layers<'a>(layers: impl Iterator<Item = &'a Layer>, x: Matrix, trace: &mut Option<Trace>) -> Matrix {
    let mut h = x;
    for layer in layers {
        let mut pre = h.dot(&layer.weights);
        pre += &layer.bias;
        let out = pre.mapv(|v| layer.activation.apply(v));
        if let Some(t) = trace.as_mut() {
            t.inputs.push(std::mem::replace(&mut h, Matrix::zeros((0, 0))));
            t.pre.push(pre);
        }
        h = out;
    }
    h
}

fn check_input(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != params.input_dim() {
        return Err(Error::invalid(format!(
            "network expects {} input columns, got {}",
            params.input_dim(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Latent codes and reconstructions of a batch.
pub fn forward(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<(Matrix, Matrix)> {
    check_input(params, x)?;
    let z = run_layers(params.encoder.iter(), x.to_owned(), &mut None);
    let x_hat = run_layers(params.decoder.iter(), z.clone(), &mut None);
    Ok((z, x_hat))
}

/// Encoder half of [`forward`].
pub fn encode(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<Matrix> {
    check_input(params, x)?;
    Ok(run_layers(params.encoder.iter(), x.to_owned(), &mut None))
}

/// Value and latent gradient of the persistence-pairing distance loss.
#[derive(Debug, Clone)]
pub struct TopoLoss {
    /// ½ Σ over input-space pairings of (d_X − d_Z)².
    pub x_to_z: f64,
    /// ½ Σ over latent-space pairings of (d_Z − d_X)².
    pub z_to_x: f64,
    pub grad_z: Matrix,
}

impl TopoLoss {
    pub fn value(&self) -> f64 {
        self.x_to_z + self.z_to_x
    }
}

pub fn topo_loss(x: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<TopoLoss> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("topological loss needs a batch of at least 2"));
    }
    if z.nrows() != n {
        return Err(Error::invalid("input and latent batches differ in size"));
    }
    let dx = pairwise_distances(x)?;
    let dz = pairwise_distances(z)?;
    let pairs_x = minimum_spanning_tree(&dx)?;
    let pairs_z = minimum_spanning_tree(&dz)?;

    let mut grad_z = Matrix::zeros(z.raw_dim());
    let mut accumulate = |i: usize, j: usize| -> f64 {
        let (a, b) = (dx.get(i, j), dz.get(i, j));
        let diff = b - a;
        if b > 0.0 {
            let scale = diff / b;
            for k in 0..z.ncols() {
                let g = scale * (z[[i, k]] - z[[j, k]]);
                grad_z[[i, k]] += g;
                grad_z[[j, k]] -= g;
            }
        }
        0.5 * diff * diff
    };
    let x_to_z = pairs_x.edges.iter().map(|e| accumulate(e.i, e.j)).sum();
    let z_to_x = pairs_z.edges.iter().map(|e| accumulate(e.i, e.j)).sum();
    Ok(TopoLoss {
        x_to_z,
        z_to_x,
        grad_z,
    })
}

/// Loss components of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoLossBreakdown {
    pub recon: f64,
    pub topo_x_to_z: f64,
    pub topo_z_to_x: f64,
    pub total: f64,
}

impl TopoLossBreakdown {
    fn new(recon: f64, topo: &TopoLoss, weight: f64) -> Self {
        TopoLossBreakdown {
            recon,
            topo_x_to_z: topo.x_to_z,
            topo_z_to_x: topo.z_to_x,
            total: recon + weight * (topo.x_to_z + topo.z_to_x),
        }
    }

    fn is_finite(&self) -> bool {
        self.recon.is_finite()
            && self.topo_x_to_z.is_finite()
            && self.topo_z_to_x.is_finite()
            && self.total.is_finite()
    }
}

/// Gradient of the total loss, one (weights, bias) pair per layer in
/// encoder-then-decoder order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Array1<f64>)>,
}

impl Gradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

fn backprop(layers: &[&Layer], trace: &Trace, grad_out: Matrix, grads: &mut Vec<(Matrix, Array1<f64>)>) -> Matrix {
    let mut g = grad_out;
    let mut collected = Vec::with_capacity(layers.len());
    for (k, layer) in layers.iter().enumerate().rev() {
        let pre = &trace.pre[k];
        let mut delta = g;
        delta.zip_mut_with(pre, |d, &p| *d *= layer.activation.derivative(p));
        let dw = trace.inputs[k].t().dot(&delta);
        let db = delta.sum_axis(Axis(0));
        g = delta.dot(&layer.weights.t());
        collected.push((dw, db));
    }
    collected.reverse();
    grads.extend(collected);
    g
}

fn mean_offdiagonal(d: &DistanceMatrix) -> f64 {
    let n = d.n();
    if n < 2 {
        return 0.0;
    }
    d.as_matrix().sum() / (n * (n - 1)) as f64
}

/// [`topo_loss`] on distances divided by their batch mean in each space,
/// with both sums divided by the batch size. The gradient includes the
/// dependence of the latent mean distance on `z`. A batch whose latent
/// points all coincide is compared unnormalized on the latent side.
pub fn normalized_topo_loss(x: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<TopoLoss> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("topological loss needs a batch of at least 2"));
    }
    let mean_x = mean_offdiagonal(&pairwise_distances(x)?);
    let x_unit = if mean_x > 0.0 { x.mapv(|v| v / mean_x) } else { x.to_owned() };
    let dz = pairwise_distances(z)?;
    let mean_z = mean_offdiagonal(&dz);
    let inv_n = 1.0 / n as f64;
    if mean_z == 0.0 {
        let mut t = topo_loss(x_unit.view(), z)?;
        t.x_to_z *= inv_n;
        t.z_to_x *= inv_n;
        t.grad_z.mapv_inplace(|g| g * inv_n);
        return Ok(t);
    }
    let z_unit = z.mapv(|v| v / mean_z);
    let t = topo_loss(x_unit.view(), z_unit.view())?;
    // L(z) = T(z / μ(z)): dL/dz = G/μ − (G·z/μ²)·∇μ with G = ∂T/∂(z/μ).
    let g_dot_z = t.grad_z.iter().zip(z_unit.iter()).map(|(g, v)| g * v).sum::<f64>();
    let pair_norm = 2.0 / (n * (n - 1)) as f64;
    let mut grad_z = t.grad_z.mapv(|g| g / mean_z);
    for i in 0..n {
        for j in 0..n {
            let d = dz.get(i, j);
            if i == j || d == 0.0 {
                continue;
            }
            let coef = g_dot_z / mean_z * pair_norm / d;
            for k in 0..z.ncols() {
                grad_z[[i, k]] -= coef * (z[[i, k]] - z[[j, k]]);
            }
        }
    }
    grad_z.mapv_inplace(|g| g * inv_n);
    Ok(TopoLoss {
        x_to_z: t.x_to_z * inv_n,
        z_to_x: t.z_to_x * inv_n,
        grad_z,
    })
}

/// Mean squared reconstruction error plus `topo_weight` times the
/// topological loss ([`normalized_topo_loss`] when `normalize` is set, raw
/// [`topo_loss`] otherwise), with gradients for every parameter.
pub fn loss_and_gradients(
    params: &MlpParams,
    x: ArrayView2<'_, f64>,
    topo_weight: f64,
    normalize: bool,
) -> Result<(TopoLossBreakdown, Gradients)> {
    check_input(params, x)?;
    let mut enc_trace = Some(Trace {
        inputs: Vec::new(),
        pre: Vec::new(),
    });
    let z = run_layers(params.encoder.iter(), x.to_owned(), &mut enc_trace);
    let mut dec_trace = Some(Trace {
        inputs: Vec::new(),
        pre: Vec::new(),
    });
    let x_hat = run_layers(params.decoder.iter(), z.clone(), &mut dec_trace);

    let count = x.len() as f64;
    let resid = &x_hat - &x;
    let recon = resid.iter().map(|r| r * r).sum::<f64>() / count;
    let grad_xhat = resid.mapv(|r| 2.0 * r / count);

    if !recon.is_finite() || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDiverged {
            epoch: 0,
            batch: 0,
            recon,
            topo_x_to_z: f64::NAN,
            topo_z_to_x: f64::NAN,
        });
    }
    let topo = if normalize {
        normalized_topo_loss(x, z.view())?
    } else {
        topo_loss(x, z.view())?
    };
    let breakdown = TopoLossBreakdown::new(recon, &topo, topo_weight);

    let dec_layers: Vec<&Layer> = params.decoder.iter().collect();
    let enc_layers: Vec<&Layer> = params.encoder.iter().collect();
    let mut dec_grads = Vec::new();
    let mut grad_z = backprop(&dec_layers, dec_trace.as_ref().expect("traced"), grad_xhat, &mut dec_grads);
    grad_z.scaled_add(topo_weight, &topo.grad_z);
    let mut layers = Vec::new();
    backprop(&enc_layers, enc_trace.as_ref().expect("traced"), grad_z, &mut layers);
    layers.extend(dec_grads);
    Ok((breakdown, Gradients { layers }))
}

/// Training configuration; defaults are the desk-scale choices documented in
/// the README.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaeConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub topo_weight: f64,
    /// Compare mean-normalized distances (see [`normalized_topo_loss`]);
    /// `false` compares raw distances.
    pub normalize_distances: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TaeConfig {
    fn default() -> Self {
        TaeConfig {
            hidden: vec![32, 32],
            latent_dim: 2,
            topo_weight: 1.0,
            normalize_distances: true,
            batch_size: 64,
            epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
        }
    }
}

impl TaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if !(self.topo_weight >= 0.0 && self.topo_weight.is_finite()) {
            return Err(Error::invalid("topo_weight must be a finite nonnegative number"));
        }
        if !(self.learning_rate > 0.0) || self.latent_dim == 0 {
            return Err(Error::invalid("learning_rate and latent_dim must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: TopoLossBreakdown,
}

/// Trained network with its per-epoch mean batch losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedTae {
    pub params: MlpParams,
    pub loss_log: Vec<EpochLoss>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(&mut self, cfg: &TaeConfig, theta: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for (((t, &g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *t -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Minibatch Adam on reconstruction MSE plus the weighted topological loss.
///
/// Rows are reshuffled every epoch from the seeded stream; a trailing partial
/// batch is dropped.
pub fn train(config: &TaeConfig, data: ArrayView2<'_, f64>) -> Result<TrainedTae> {
    config.validate()?;
    if data.nrows() < config.batch_size {
        return Err(Error::invalid(format!(
            "{} training rows is fewer than batch_size {}",
            data.nrows(),
            config.batch_size
        )));
    }
    crate::numerics::ensure_finite(data, "training data")?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::init_with(data.ncols(), &config.hidden, config.latent_dim, &mut rng)?;
    let mut theta = params.to_flat();
    let mut adam = Adam::new(theta.len());
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let batches = data.nrows() / config.batch_size;
    let mut loss_log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = [0.0f64; 4];
        for b in 0..batches {
            let rows = &order[b * config.batch_size..(b + 1) * config.batch_size];
            let batch = data.select(Axis(0), rows);
            let step = loss_and_gradients(&params, batch.view(), config.topo_weight, config.normalize_distances);
            let (loss, grads) = match step {
                Err(Error::TrainingDiverged { recon, topo_x_to_z, topo_z_to_x, .. }) => {
                    return Err(Error::TrainingDiverged { epoch, batch: b, recon, topo_x_to_z, topo_z_to_x })
                }
                other => other?,
            };
            let grad = grads.to_flat();
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: b,
                    recon: loss.recon,
                    topo_x_to_z: loss.topo_x_to_z,
                    topo_z_to_x: loss.topo_z_to_x,
                });
            }
            sum[0] += loss.recon;
            sum[1] += loss.topo_x_to_z;
            sum[2] += loss.topo_z_to_x;
            sum[3] += loss.total;
            adam.update(config, &mut theta, &grad);
            params.set_flat(&theta)?;
        }
        let k = batches as f64;
        loss_log.push(EpochLoss {
            epoch,
            loss: TopoLossBreakdown {
                recon: sum[0] / k,
                topo_x_to_z: sum[1] / k,
                topo_z_to_x: sum[2] / k,
                total: sum[3] / k,
            },
        });
    }
    Ok(TrainedTae { params, loss_log })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDoc {
    role: String,
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: MatrixDoc,
    bias: Vec<f64>,
}

/// On-disk checkpoint: layer shapes, row-major weights, config echo and loss log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub latent_dim: usize,
    layers: Vec<LayerDoc>,
    pub config: Option<TaeConfig>,
    pub loss_log: Vec<EpochLoss>,
}

impl Checkpoint {
    pub fn new(params: &MlpParams, config: Option<&TaeConfig>, loss_log: &[EpochLoss]) -> Self {
        let doc = |role: &str, l: &Layer| LayerDoc {
            role: role.to_string(),
            inputs: l.inputs(),
            outputs: l.outputs(),
            activation: l.activation,
            weights: MatrixDoc::from(&l.weights),
            bias: l.bias.to_vec(),
        };
        let layers = params
            .encoder
            .iter()
            .map(|l| doc("encoder", l))
            .chain(params.decoder.iter().map(|l| doc("decoder", l)))
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            latent_dim: params.latent_dim(),
            layers,
            config: config.cloned(),
            loss_log: loss_log.to_vec(),
        }
    }

    pub fn params(&self) -> Result<MlpParams> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        let mut encoder = Vec::new();
        let mut decoder = Vec::new();
        for l in &self.layers {
            let weights = l.weights.to_matrix()?;
            if weights.dim() != (l.inputs, l.outputs) {
                return Err(Error::invalid("checkpoint layer shape mismatch"));
            }
            let layer = Layer {
                weights,
                bias: Array1::from(l.bias.clone()),
                activation: l.activation,
            };
            match l.role.as_str() {
                "encoder" => encoder.push(layer),
                "decoder" => decoder.push(layer),
                other => return Err(Error::invalid(format!("unknown layer role `{other}`"))),
            }
        }
        let params = MlpParams { encoder, decoder };
        params.validate()?;
        if params.latent_dim() != self.latent_dim {
            return Err(Error::invalid("checkpoint latent_dim disagrees with layers"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
        Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))
    }

    fn zero_params(d: usize, hidden: &[usize], m: usize) -> MlpParams {
        let mut p = MlpParams::init(d, hidden, m, 0).unwrap();
        let zeros = vec![0.0; p.num_parameters()];
        p.set_flat(&zeros).unwrap();
        p
    }

    /// Neuron-by-neuron forward pass.
    fn scalar_forward(layers: &[Layer], x: &Matrix) -> Matrix {
        let mut rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        for layer in layers {
            rows = rows
                .iter()
                .map(|r| {
                    (0..layer.outputs())
                        .map(|o| {
                            let mut acc = layer.bias[o];
                            for (i, v) in r.iter().enumerate() {
                                acc += v * layer.weights[[i, o]];
                            }
                            match layer.activation {
                                Activation::Relu => acc.max(0.0),
                                Activation::Identity => acc,
                            }
                        })
                        .collect()
                })
                .collect();
        }
        let cols = rows[0].len();
        Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = zero_params(5, &[4], 2);
        let x = array![[1.0, 2.0, 3.0, 4.0, 5.0], [0.5, -1.0, 0.0, 2.0, 1.0]];
        let (z, xh) = forward(&p, x.view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(xh.iter().all(|&v| v == 0.0));
        assert_eq!(encode(&p, x.view()).unwrap(), z);
    }

    #[test]
    fn identity_network_reproduces_input() {
        let ident = |d: usize| Layer {
            weights: Array2::eye(d),
            bias: Array1::zeros(d),
            activation: Activation::Identity,
        };
        let p = MlpParams {
            encoder: vec![ident(3), ident(3)],
            decoder: vec![ident(3)],
        };
        let x = array![[1.0, -2.0, 3.0], [0.0, 0.5, -0.25]];
        let (z, xh) = forward(&p, x.view()).unwrap();
        assert_eq!(z, x);
        assert_eq!(xh, x);
    }

    #[test]
    fn forward_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut p = MlpParams::init(6, &[5, 4], 2, 3).unwrap();
        let flat: Vec<f64> = (0..p.num_parameters()).map(|_| rng.sample(StandardNormal)).collect();
        p.set_flat(&flat).unwrap();
        let x = randn(&mut rng, 4, 6);
        let (z, xh) = forward(&p, x.view()).unwrap();
        let z_ref = scalar_forward(&p.encoder, &x);
        let xh_ref = scalar_forward(&p.decoder, &z_ref);
        assert!((&z - &z_ref).iter().all(|v| v.abs() < 1e-10));
        assert!((&xh - &xh_ref).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = MlpParams::init(4, &[3], 2, 0).unwrap();
        assert!(forward(&p, Array2::zeros((2, 5)).view()).is_err());
        assert!(encode(&p, Array2::zeros((2, 3)).view()).is_err());
    }

    #[test]
    fn topo_loss_vanishes_on_identical_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = randn(&mut rng, 10, 3);
        let t = topo_loss(x.view(), x.view()).unwrap();
        assert_eq!(t.value(), 0.0);
        assert!(t.grad_z.iter().all(|&g| g == 0.0));
        let t2 = topo_loss(x.view(), x.mapv(|v| 2.0 * v).view()).unwrap();
        assert!(t2.value() > 0.0);
        assert!(topo_loss(x.slice(ndarray::s![..1, ..]), x.slice(ndarray::s![..1, ..])).is_err());
    }

    #[test]
    fn topo_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = randn(&mut rng, 16, 8);
        let z = randn(&mut rng, 16, 2);
        let t = topo_loss(x.view(), z.view()).unwrap();
        let h = 1e-5;
        for i in 0..16 {
            for k in 0..2 {
                let mut zp = z.clone();
                zp[[i, k]] += h;
                let mut zm = z.clone();
                zm[[i, k]] -= h;
                let fd = (topo_loss(x.view(), zp.view()).unwrap().value()
                    - topo_loss(x.view(), zm.view()).unwrap().value())
                    / (2.0 * h);
                let a = t.grad_z[[i, k]];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-4, "({i},{k}) analytic {a} fd {fd}");
            }
        }
    }

    #[test]
    fn normalized_loss_is_scale_invariant_with_exact_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let x = randn(&mut rng, 12, 6);
        let z = randn(&mut rng, 12, 2);
        let t = normalized_topo_loss(x.view(), z.view()).unwrap();
        let t3 = normalized_topo_loss(x.mapv(|v| 3.0 * v).view(), z.mapv(|v| 0.5 * v).view()).unwrap();
        assert!((t.value() - t3.value()).abs() < 1e-12 * t.value().max(1.0));
        let h = 1e-5;
        for i in 0..12 {
            for k in 0..2 {
                let mut zp = z.clone();
                zp[[i, k]] += h;
                let mut zm = z.clone();
                zm[[i, k]] -= h;
                let fd = (normalized_topo_loss(x.view(), zp.view()).unwrap().value()
                    - normalized_topo_loss(x.view(), zm.view()).unwrap().value())
                    / (2.0 * h);
                let a = t.grad_z[[i, k]];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-4, "({i},{k}) analytic {a} fd {fd}");
            }
        }
        let collapsed = Array2::<f64>::zeros((12, 2));
        assert!(normalized_topo_loss(x.view(), collapsed.view()).unwrap().value() > 0.0);
    }

    #[test]
    fn loss_breakdown_total_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = randn(&mut rng, 8, 4);
        let p = MlpParams::init(4, &[3], 2, 9).unwrap();
        for normalize in [false, true] {
            let (l, _) = loss_and_gradients(&p, x.view(), 0.7, normalize).unwrap();
            assert!((l.total - (l.recon + 0.7 * (l.topo_x_to_z + l.topo_z_to_x))).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = randn(&mut rng, 40, 5);
        let cfg = TaeConfig {
            hidden: vec![6],
            batch_size: 8,
            epochs: 3,
            ..TaeConfig::default()
        };
        let a = train(&cfg, x.view()).unwrap();
        let b = train(&cfg, x.view()).unwrap();
        assert_eq!(a.params.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.params.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.loss_log.len(), 3);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        Checkpoint::new(&a.params, Some(&cfg), &a.loss_log).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.params().unwrap(), a.params);
        assert_eq!(back.loss_log, a.loss_log);
    }

    #[test]
    fn training_rejects_bad_config() {
        let x = Array2::<f64>::zeros((10, 3));
        let cfg = TaeConfig {
            batch_size: 1,
            ..TaeConfig::default()
        };
        assert!(train(&cfg, x.view()).is_err());
        let cfg = TaeConfig {
            batch_size: 20,
            ..TaeConfig::default()
        };
        assert!(train(&cfg, x.view()).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = randn(&mut rng, 16, 3).mapv(|v| v * 1e200);
        let cfg = TaeConfig {
            hidden: vec![4],
            batch_size: 8,
            epochs: 2,
            ..TaeConfig::default()
        };
        match train(&cfg, x.view()) {
            Err(Error::TrainingDiverged { epoch: 0, batch: 0, .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
