use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MapperGraph;
use crate::{Error, Result};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Fill-color stops (viridis) for `mean_label / (manifold_count - 1)` at
/// 0, 0.25, 0.5, 0.75 and 1; colors are linearly interpolated in RGB. The
/// last label, the enclosing sphere in the spheres dataset, comes out yellow.
pub const COLOR_RAMP: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            other => Err(Error::invalid(format!("unknown graph format `{other}`"))),
        }
    }
}

fn ramp_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let scaled = t * (COLOR_RAMP.len() - 1) as f64;
    let k = (scaled.floor() as usize).min(COLOR_RAMP.len() - 2);
    let f = scaled - k as f64;
    let (a, b) = (COLOR_RAMP[k], COLOR_RAMP[k + 1]);
    let mix = |x: u8, y: u8| (x as f64 + f * (y as f64 - x as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn to_dot(graph: &MapperGraph) -> String {
    let denom = graph.manifold_count.saturating_sub(1).max(1) as f64;
    let p = &graph.provenance;
    let mut out = String::new();
    out.push_str("graph mapper {\n");
    let _ = writeln!(
        out,
        "  graph [label=\"filter={} intervals={} overlap={} eps={} min_samples={}\"];",
        p.filter.as_deref().unwrap_or("-"),
        p.intervals,
        p.overlap,
        p.eps,
        p.min_samples
    );
    out.push_str("  node [shape=circle, style=filled, fixedsize=true, label=\"\"];\n");
    for v in &graph.vertices {
        let width = 0.2 + 0.05 * (v.members.len() as f64).sqrt();
        let _ = writeln!(
            out,
            "  v{} [fillcolor=\"{}\", width={:.3}, tooltip=\"members={} mean_label={:.3}\"];",
            v.id,
            ramp_color(v.mean_label / denom),
            width,
            v.members.len(),
            v.mean_label
        );
    }
    for (a, b) in &graph.edges {
        let _ = writeln!(out, "  v{a} -- v{b};");
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    schema_version: u32,
    #[serde(flatten)]
    graph: MapperGraph,
}

/// Serializes a graph as Graphviz DOT or versioned JSON.
pub fn export_graph(graph: &MapperGraph, format: GraphFormat) -> Result<Vec<u8>> {
    match format {
        GraphFormat::Dot => Ok(to_dot(graph).into_bytes()),
        GraphFormat::Json => {
            let doc = GraphDoc {
                schema_version: GRAPH_SCHEMA_VERSION,
                graph: graph.clone(),
            };
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn import_graph_json(bytes: &[u8]) -> Result<MapperGraph> {
    let doc: GraphDoc = serde_json::from_slice(bytes)?;
    if doc.schema_version != GRAPH_SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported graph schema version {}",
            doc.schema_version
        )));
    }
    Ok(doc.graph)
}
