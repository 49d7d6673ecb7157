//! Exact t-SNE (no Barnes-Hut approximation).

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ndarray::parallel::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::{ensure_finite, pairwise_sq_distances};
use crate::{Error, Matrix, Result};

const PERPLEXITY_TOL_BITS: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub latent_dim: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            latent_dim: 2,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 42,
        }
    }
}

/// Embedding plus the KL divergence after each iteration (only filled when
/// requested, since it costs a logarithm per pair).
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub embedding: Matrix,
    pub kl_history: Vec<f64>,
}

/// Row-conditional Gaussian affinities `p(j|i)`, each row bisected on the
/// precision until its entropy equals `log2(perplexity)` bits.
pub fn conditional_probabilities(sq_dist: &Matrix, perplexity: f64) -> Result<Matrix> {
    let n = sq_dist.nrows();
    let target = perplexity.log2();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = sq_dist.row(i);
            let dmin = (0..n)
                .filter(|&j| j != i)
                .map(|j| d[j])
                .fold(f64::INFINITY, f64::min);
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut p = vec![0.0; n];
            for _ in 0..MAX_BISECTION_STEPS {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..n {
                    if j == i {
                        p[j] = 0.0;
                        continue;
                    }
                    let shifted = d[j] - dmin;
                    let v = (-beta * shifted).exp();
                    p[j] = v;
                    sum += v;
                    weighted += v * shifted;
                }
                let entropy_bits = (sum.ln() + beta * weighted / sum) / std::f64::consts::LN_2;
                for v in p.iter_mut() {
                    *v /= sum;
                }
                let gap = entropy_bits - target;
                if gap.abs() < PERPLEXITY_TOL_BITS {
                    break;
                }
                if gap > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = 0.5 * (beta + lo);
                }
            }
            p
        })
        .collect();
    let mut out = Array2::zeros((n, n));
    for (i, r) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&ndarray::Array1::from(r));
    }
    Ok(out)
}

/// Symmetrized joint affinities `(P + Pᵀ) / 2n`; entries sum to 1.
pub fn joint_probabilities(conditional: &Matrix) -> Matrix {
    let n = conditional.nrows() as f64;
    (conditional + &conditional.t()) / (2.0 * n)
}

fn validate(n: usize, params: &TsneParams) -> Result<()> {
    if n < 10 {
        return Err(Error::invalid("t-SNE needs at least 10 points"));
    }
    let max_perp = (n as f64 - 1.0) / 3.0;
    if !(params.perplexity >= 5.0 && params.perplexity <= max_perp) {
        return Err(Error::invalid(format!(
            "perplexity {} outside [5, {max_perp:.3}] for {n} points",
            params.perplexity
        )));
    }
    if params.latent_dim == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::invalid("t-SNE latent_dim and learning_rate must be positive"));
    }
    Ok(())
}

/// Runs exact t-SNE with early exaggeration, momentum (0.5 then 0.8) and
/// per-coordinate adaptive gains.
pub fn run_tsne(x: ArrayView2<'_, f64>, params: &TsneParams, record_kl: bool) -> Result<TsneRun> {
    let n = x.nrows();
    validate(n, params)?;
    ensure_finite(x, "t-SNE input")?;
    let m = params.latent_dim;
    let p_joint = joint_probabilities(&conditional_probabilities(&pairwise_sq_distances(x), params.perplexity)?);
    let p_entropy: f64 = if record_kl {
        p_joint.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut y = Array2::from_shape_fn((n, m), |_| 1e-4 * rng.sample::<f64, _>(StandardNormal));
    let mut velocity = Array2::<f64>::zeros((n, m));
    let mut gains = Array2::<f64>::ones((n, m));
    let mut kl_history = Vec::new();
    let mut num = Array2::<f64>::zeros((n, n));

    for iter in 0..params.iterations {
        let exaggerating = iter < params.exaggeration_iterations;
        let exaggeration = if exaggerating { params.early_exaggeration } else { 1.0 };
        let momentum = if exaggerating { 0.5 } else { 0.8 };

        // Student-t kernel, row by row
        num.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                let yi = y.row(i);
                for j in 0..n {
                    row[j] = if i == j {
                        0.0
                    } else {
                        let d2: f64 = yi.iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                        1.0 / (1.0 + d2)
                    };
                }
            });
        let row_sums: Vec<f64> = num.axis_iter(Axis(0)).into_par_iter().map(|r| r.sum()).collect();
        let z: f64 = row_sums.iter().sum();

        let per_row: Vec<(Vec<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = vec![0.0; m];
                let mut cross = 0.0;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let q = num[[i, j]] / z;
                    let p = p_joint[[i, j]];
                    let coeff = (exaggeration * p - q) * num[[i, j]];
                    for k in 0..m {
                        g[k] += 4.0 * coeff * (y[[i, k]] - y[[j, k]]);
                    }
                    if record_kl && p > 0.0 {
                        cross += p * q.max(f64::MIN_POSITIVE).ln();
                    }
                }
                (g, cross)
            })
            .collect();

        if record_kl {
            kl_history.push(p_entropy - per_row.iter().map(|r| r.1).sum::<f64>());
        }
        for (i, (g, _)) in per_row.iter().enumerate() {
            for k in 0..m {
                let grad = g[k];
                let gain = &mut gains[[i, k]];
                if (grad > 0.0) != (velocity[[i, k]] > 0.0) {
                    *gain += 0.2;
                } else {
                    *gain *= 0.8;
                }
                if *gain < MIN_GAIN {
                    *gain = MIN_GAIN;
                }
                velocity[[i, k]] = momentum * velocity[[i, k]] - params.learning_rate * *gain * grad;
                y[[i, k]] += velocity[[i, k]];
            }
        }
        let mean = y.mean_axis(Axis(0)).expect("n >= 10");
        y -= &mean;
    }
    Ok(TsneRun {
        embedding: y,
        kl_history,
    })
}

/// Two-dimensional exact t-SNE with the standard exaggeration schedule.
pub fn tsne_embed(
    x: ArrayView2<'_, f64>,
    perplexity: f64,
    iterations: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Matrix> {
    let params = TsneParams {
        perplexity,
        iterations,
        learning_rate,
        seed,
        ..TsneParams::default()
    };
    Ok(run_tsne(x, &params, false)?.embedding)
}
