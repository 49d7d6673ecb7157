//! Mapper on a circle: the graph closes into a single loop.
//!
//! cargo run --release --example circle_mapper

use std::f64::consts::TAU;

use ndarray::Array2;
use tae_mapper::mapper::{build_mapper, MapperParams};

fn main() -> tae_mapper::Result<()> {
    let n = 200;
    let circle = Array2::from_shape_fn((n, 2), |(i, k)| {
        let t = TAU * i as f64 / n as f64;
        if k == 0 { 10.0 * t.cos() } else { 10.0 * t.sin() }
    });
    // two arcs, labelled by half-plane
    let labels: Vec<usize> = (0..n).map(|i| usize::from(circle[[i, 1]] < 0.0)).collect();
    // eps spans three arc spacings and a core point needs all seven
    // neighbours, so a bin that only clips an overlap corner yields no
    // cluster and the nerve does not pick up spurious triangles.
    let spacing = TAU * 10.0 / n as f64;
    let params = MapperParams {
        intervals: 8,
        overlap: 0.3,
        eps: 3.5 * spacing,
        min_samples: 7,
    };
    let graph = build_mapper(circle.view(), &labels, 2, &params)?;
    println!(
        "vertices {}, edges {}, components {}, independent cycles {}",
        graph.vertices.len(),
        graph.edges.len(),
        graph.components(),
        graph.cycle_rank()
    );
    for v in &graph.vertices {
        println!("  v{:2} bin {:?}: {:3} points, labels {:?}", v.id, v.bin, v.members.len(), v.label_histogram);
    }
    Ok(())
}
