//! Builds a PCA Mapper graph of a small spheres split and writes it as DOT
//! and JSON. Render with `dot -Tsvg mapper.dot > mapper.svg`.
//!
//! cargo run --release --example export_graph -- [out_dir]

use std::path::PathBuf;

use tae_mapper::dataset::{generate_spheres, split_and_scale, SphereSpec};
use tae_mapper::filters::{fit, FilterSpec};
use tae_mapper::mapper::{build_mapper, export_graph, import_graph_json, GraphFormat, MapperParams};

fn main() -> tae_mapper::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tae-mapper-example"));
    let spec = SphereSpec {
        ambient_dim: 11,
        points_per_sphere: 80,
        big_sphere_factor: 1,
        center_spread: 8.0,
        ..SphereSpec::default()
    };
    let split = split_and_scale(&generate_spheres(&spec)?, 0.5, 1)?;
    let model = fit(&FilterSpec::Pca { latent_dim: 2 }, split.train.points().view(), None)?;
    let z = model.transform(split.test.points().view())?;
    let params = MapperParams {
        intervals: 10,
        overlap: 0.3,
        eps: 1.0,
        min_samples: 5,
    };
    let mut graph = build_mapper(z.view(), split.test.labels(), split.test.manifold_count(), &params)?;
    graph.provenance.filter = Some("pca".into());

    std::fs::create_dir_all(&dir).map_err(|e| tae_mapper::Error::Io { path: dir.clone(), source: e })?;
    for (format, name) in [(GraphFormat::Dot, "mapper.dot"), (GraphFormat::Json, "mapper.json")] {
        let bytes = export_graph(&graph, format)?;
        let path = dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| tae_mapper::Error::Io { path: path.clone(), source: e })?;
        println!("{} ({} bytes)", path.display(), bytes.len());
    }
    let back = import_graph_json(&export_graph(&graph, GraphFormat::Json)?)?;
    assert_eq!(back, graph);
    println!("{} vertices, {} edges; JSON round-trip ok", graph.vertices.len(), graph.edges.len());
    Ok(())
}
