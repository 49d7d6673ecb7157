//! Trains the topological autoencoder on a small spheres cloud, prints the
//! loss log, and round-trips the weights through a checkpoint file.
//!
//! cargo run --release --example train_tae

use tae_mapper::dataset::{generate_spheres, split_and_scale, SphereSpec};
use tae_mapper::tae::{encode, train, Checkpoint, TaeConfig};

fn main() -> tae_mapper::Result<()> {
    let spec = SphereSpec {
        ambient_dim: 21,
        points_per_sphere: 60,
        big_sphere_factor: 1,
        ..SphereSpec::default()
    };
    let cloud = generate_spheres(&spec)?;
    let split = split_and_scale(&cloud, 0.25, 7)?;
    let config = TaeConfig {
        epochs: 30,
        batch_size: 32,
        ..TaeConfig::default()
    };
    let trained = train(&config, split.train.points().view())?;
    for e in trained.loss_log.iter().step_by(5) {
        println!(
            "epoch {:3}: recon {:.4}  topo {:.4} + {:.4}  total {:.4}",
            e.epoch, e.loss.recon, e.loss.topo_x_to_z, e.loss.topo_z_to_x, e.loss.total
        );
    }

    let z = encode(&trained.params, split.test.points().view())?;
    println!("test latent: {} x {}", z.nrows(), z.ncols());
    for label in 0..cloud.manifold_count() {
        let rows: Vec<usize> = (0..z.nrows()).filter(|&i| split.test.labels()[i] == label).collect();
        let c = z.select(ndarray::Axis(0), &rows).mean_axis(ndarray::Axis(0)).expect("rows");
        println!("  label {label:2} centroid ({:7.3}, {:7.3})", c[0], c[1]);
    }

    let dir = std::env::temp_dir().join("tae-mapper-example");
    let path = dir.join("tae.checkpoint.json");
    Checkpoint::new(&trained.params, Some(&config), &trained.loss_log).save(&path)?;
    let back = Checkpoint::load(&path)?.params()?;
    assert_eq!(back, trained.params);
    println!("checkpoint round-trip ok: {}", path.display());
    Ok(())
}
