//! Exact t-SNE on three Gaussian blobs in 10 dimensions; prints the KL trace
//! and how far apart the blobs land.
//!
//! cargo run --release --example tsne_blobs

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tae_mapper::filters::tsne::{run_tsne, TsneParams};

fn main() -> tae_mapper::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let per = 40;
    let x = Array2::from_shape_fn((3 * per, 10), |(i, k)| {
        let blob = i / per;
        let offset = if k == blob { 8.0 } else { 0.0 };
        offset + rng.sample::<f64, _>(StandardNormal)
    });
    let params = TsneParams {
        perplexity: 15.0,
        iterations: 600,
        ..TsneParams::default()
    };
    let run = run_tsne(x.view(), &params, true)?;
    for (it, kl) in run.kl_history.iter().enumerate().step_by(100) {
        println!("iter {it:4}: KL {kl:.4}");
    }
    println!("final KL {:.4}", run.kl_history.last().copied().unwrap_or(f64::NAN));

    let centroid = |b: usize| {
        let rows = run.embedding.slice(ndarray::s![b * per..(b + 1) * per, ..]);
        rows.mean_axis(ndarray::Axis(0)).expect("rows")
    };
    let spread = |b: usize| {
        let c = centroid(b);
        let rows = run.embedding.slice(ndarray::s![b * per..(b + 1) * per, ..]);
        rows.rows().into_iter().map(|r| (&r - &c).dot(&(&r - &c)).sqrt()).fold(0.0, f64::max)
    };
    for a in 0..3 {
        for b in a + 1..3 {
            let d = &centroid(a) - &centroid(b);
            println!("blobs {a}-{b}: centroid gap {:.1}, radii {:.1} / {:.1}", d.dot(&d).sqrt(), spread(a), spread(b));
        }
    }
    Ok(())
}
