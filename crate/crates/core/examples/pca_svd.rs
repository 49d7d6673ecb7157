//! PCA and SVD filters on centered data: the two routes (covariance
//! eigenvectors vs. one-sided Jacobi SVD) give the same projection up to
//! column signs.
//!
//! cargo run --release --example pca_svd

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tae_mapper::filters::{fit, FilterSpec};
use tae_mapper::numerics::{svd_topk, sym_eig};

fn main() -> tae_mapper::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // anisotropic cloud: column k has scale 1 / (k + 1)
    let mut x = Array2::from_shape_fn((200, 6), |(_, k)| rng.sample::<f64, _>(StandardNormal) / (k + 1) as f64);
    let mean = x.mean_axis(Axis(0)).expect("rows");
    x -= &mean;

    let pca = fit(&FilterSpec::Pca { latent_dim: 2 }, x.view(), None)?;
    let svd = fit(&FilterSpec::Svd { latent_dim: 2 }, x.view(), None)?;
    let (zp, zs) = (pca.transform(x.view())?, svd.transform(x.view())?);
    for k in 0..2 {
        let sign = if zp.column(k).dot(&zs.column(k)) < 0.0 { -1.0 } else { 1.0 };
        let gap = zp.column(k).iter().zip(zs.column(k)).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
        println!("component {k}: max |pca - svd| = {gap:.2e}");
    }

    let cov = x.t().dot(&x) / (x.nrows() - 1) as f64;
    let (values, vectors) = sym_eig(cov.view())?;
    println!("covariance spectrum: {values:.4?}");
    for (i, &lambda) in values.iter().enumerate() {
        let v = vectors.column(i);
        let r = &cov.dot(&v) - &(&v * lambda);
        println!("  pair {i}: residual {:.1e}", r.dot(&r).sqrt());
    }
    let (sigma, _) = svd_topk(x.view(), 2)?;
    let implied: Vec<f64> = sigma.iter().map(|s| s * s / (x.nrows() - 1) as f64).collect();
    println!("sigma^2 / (n - 1) for the top 2: {implied:.4?}");
    Ok(())
}
