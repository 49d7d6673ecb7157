//! Generates the nested-spheres cloud, splits it and prints per-label
//! statistics. Pass a directory to also write the CSV files.
//!
//! cargo run --release --example generate_spheres -- [out_dir]

use std::path::PathBuf;

use tae_mapper::dataset::{generate_spheres, split_and_scale, SphereSpec};
use tae_mapper::io::write_labeled_csv;

fn main() -> tae_mapper::Result<()> {
    let spec = SphereSpec {
        points_per_sphere: 150,
        big_sphere_factor: 1,
        ..SphereSpec::default()
    };
    let cloud = generate_spheres(&spec)?;
    let split = split_and_scale(&cloud, 1.0 / 3.0, 42)?;
    println!(
        "{} points in {} dims, {} manifolds; train {} / test {}",
        cloud.len(),
        cloud.dim(),
        cloud.manifold_count(),
        split.train.len(),
        split.test.len()
    );

    let centers = spec.centers()?;
    for label in 0..cloud.manifold_count() {
        let rows: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.labels()[i] == label).collect();
        let center_norm = if label < spec.small_sphere_count {
            centers.row(label).dot(&centers.row(label)).sqrt()
        } else {
            0.0
        };
        let worst = rows
            .iter()
            .map(|&i| {
                let p = cloud.points().row(i);
                let d = if label < spec.small_sphere_count { &p - &centers.row(label) } else { p.to_owned() };
                (d.dot(&d).sqrt() - spec.radius(label)).abs()
            })
            .fold(0.0f64, f64::max);
        println!(
            "label {label:2}: {:4} points, radius {:5.1}, |center| {center_norm:6.2}, max radial error {worst:.1e}",
            rows.len(),
            spec.radius(label)
        );
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        write_labeled_csv(&dir.join("spheres.csv"), &cloud)?;
        write_labeled_csv(&dir.join("train.csv"), &split.train)?;
        write_labeled_csv(&dir.join("test.csv"), &split.test)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
