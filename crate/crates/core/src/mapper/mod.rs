//! The Mapper construction: cover the filter image with overlapping boxes,
//! run DBSCAN inside each box, and connect clusters that share points.

mod cover;
mod dbscan;
mod export;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cover::{build_cover, Cover, Interval};
pub use dbscan::dbscan;
pub use export::{export_graph, import_graph_json, GraphFormat, COLOR_RAMP, GRAPH_SCHEMA_VERSION};

/// Cover and clustering parameters of one Mapper run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapperParams {
    pub intervals: usize,
    pub overlap: f64,
    pub eps: f64,
    pub min_samples: usize,
}

/// One cluster inside one cover bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperVertex {
    pub id: usize,
    /// Interval index per embedding dimension.
    pub bin: Vec<usize>,
    /// Sorted point ids.
    pub members: Vec<usize>,
    pub label_histogram: Vec<usize>,
    pub mean_label: f64,
}

impl MapperVertex {
    fn new(id: usize, bin: Vec<usize>, members: Vec<usize>, labels: &[usize], manifold_count: usize) -> Self {
        let mut label_histogram = vec![0; manifold_count];
        for &p in &members {
            label_histogram[labels[p]] += 1;
        }
        let mean_label = members.iter().map(|&p| labels[p] as f64).sum::<f64>() / members.len() as f64;
        MapperVertex { id, bin, members, label_histogram, mean_label }
    }

    /// Number of distinct labels among the members.
    pub fn distinct_labels(&self) -> usize {
        self.label_histogram.iter().filter(|&&c| c > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub filter: Option<String>,
    pub overlap: f64,
    pub intervals: usize,
    pub eps: f64,
    pub min_samples: usize,
    /// `test` or `train_then_map`.
    pub built_on: String,
}

/// Nerve graph of the clustered cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapperGraph {
    pub vertices: Vec<MapperVertex>,
    /// `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub provenance: Provenance,
    pub manifold_count: usize,
    pub point_count: usize,
    /// Points that ended up in no vertex.
    pub noise_count: usize,
}

impl MapperGraph {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of connected components (isolated vertices included).
    pub fn components(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        let mut count = n;
        for &(u, v) in &self.edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    /// First Betti number of the graph: `E - V + components`.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.components() - self.vertices.len()
    }
}

fn nerve_edges(vertices: &[MapperVertex], point_count: usize) -> Vec<(usize, usize)> {
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); point_count];
    for v in vertices {
        for &p in &v.members {
            owners[p].push(v.id);
        }
    }
    let mut edges = BTreeSet::new();
    for list in &owners {
        for (a, &u) in list.iter().enumerate() {
            for &v in &list[a + 1..] {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }
    edges.into_iter().collect()
}

struct Clustered {
    cover: Cover,
    /// (bin, member ids) in vertex-id order.
    clusters: Vec<(Vec<usize>, Vec<usize>)>,
}

fn cluster_bins(embedding: ArrayView2<'_, f64>, params: &MapperParams) -> Result<Clustered> {
    let cover = build_cover(embedding, params.intervals, params.overlap)?;
    if !(params.eps > 0.0) || params.min_samples < 1 {
        return Err(Error::invalid("eps must be positive and min_samples at least 1"));
    }
    let mut bins: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (p, row) in embedding.rows().into_iter().enumerate() {
        let coords = row.to_vec();
        for bin in cover.bins_of(&coords) {
            bins.entry(bin).or_default().push(p);
        }
    }
    let bins: Vec<(Vec<usize>, Vec<usize>)> = bins.into_iter().collect();
    let per_bin: Vec<Vec<(Vec<usize>, Vec<usize>)>> = bins
        .par_iter()
        .map(|(bin, members)| {
            let local = embedding.select(Axis(0), members);
            let labels = dbscan(local.view(), params.eps, params.min_samples)?;
            let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
            for (k, l) in labels.iter().enumerate() {
                if let Some(c) = l {
                    groups[*c].push(members[k]);
                }
            }
            Ok(groups.into_iter().map(|g| (bin.clone(), g)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Clustered {
        cover,
        clusters: per_bin.into_iter().flatten().collect(),
    })
}

fn assemble(
    clusters: Vec<(Vec<usize>, Vec<usize>)>,
    labels: &[usize],
    manifold_count: usize,
    provenance: Provenance,
) -> MapperGraph {
    let point_count = labels.len();
    let vertices: Vec<MapperVertex> = clusters
        .into_iter()
        .filter(|(_, members)| !members.is_empty())
        .enumerate()
        .map(|(id, (bin, members))| MapperVertex::new(id, bin, members, labels, manifold_count))
        .collect();
    let mut covered = vec![false; point_count];
    for v in &vertices {
        for &p in &v.members {
            covered[p] = true;
        }
    }
    let edges = nerve_edges(&vertices, point_count);
    MapperGraph {
        vertices,
        edges,
        provenance,
        manifold_count,
        point_count,
        noise_count: covered.iter().filter(|c| !**c).count(),
    }
}

fn check_labels(rows: usize, labels: &[usize], manifold_count: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::invalid("one label per embedded point is required"));
    }
    if labels.iter().any(|&l| l >= manifold_count) {
        return Err(Error::invalid("label exceeds manifold_count"));
    }
    Ok(())
}

/// Builds the Mapper graph of `embedding`; `labels` only feed the vertex
/// histograms.
///
/// Vertex ids follow (bin, cluster id) order, so the result does not depend on
/// how the per-bin clustering is scheduled.
pub fn build_mapper(
    embedding: ArrayView2<'_, f64>,
    labels: &[usize],
    manifold_count: usize,
    params: &MapperParams,
) -> Result<MapperGraph> {
    check_labels(embedding.nrows(), labels, manifold_count)?;
    let clustered = cluster_bins(embedding, params)?;
    Ok(assemble(
        clustered.clusters,
        labels,
        manifold_count,
        Provenance {
            filter: None,
            overlap: params.overlap,
            intervals: params.intervals,
            eps: params.eps,
            min_samples: params.min_samples,
            built_on: "test".into(),
        },
    ))
}

/// Builds the graph on `train_embedding`, then places each test point in
/// every bin that contains it, joining the vertex of its nearest clustered
/// training point in that bin when that point lies within `eps`. Vertices
/// are re-indexed over the test points; those that receive none are dropped.
pub fn build_mapper_train_then_map(
    train_embedding: ArrayView2<'_, f64>,
    test_embedding: ArrayView2<'_, f64>,
    test_labels: &[usize],
    manifold_count: usize,
    params: &MapperParams,
) -> Result<MapperGraph> {
    check_labels(test_embedding.nrows(), test_labels, manifold_count)?;
    if test_embedding.ncols() != train_embedding.ncols() {
        return Err(Error::invalid("train and test embeddings differ in width"));
    }
    let clustered = cluster_bins(train_embedding, params)?;
    let mut by_bin: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for (idx, (bin, _)) in clustered.clusters.iter().enumerate() {
        by_bin.entry(bin.as_slice()).or_default().push(idx);
    }
    let mut test_members: Vec<Vec<usize>> = vec![Vec::new(); clustered.clusters.len()];
    for (t, row) in test_embedding.rows().into_iter().enumerate() {
        let coords = row.to_vec();
        for bin in clustered.cover.bins_of(&coords) {
            let Some(candidates) = by_bin.get(bin.as_slice()) else { continue };
            let mut best: Option<(f64, usize)> = None;
            for &c in candidates {
                for &p in &clustered.clusters[c].1 {
                    let d = row
                        .iter()
                        .zip(train_embedding.row(p))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if d <= params.eps && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
            if let Some((_, c)) = best {
                test_members[c].push(t);
            }
        }
    }
    let clusters = clustered
        .clusters
        .into_iter()
        .zip(test_members)
        .map(|((bin, _), members)| (bin, members))
        .collect();
    Ok(assemble(
        clusters,
        test_labels,
        manifold_count,
        Provenance {
            filter: None,
            overlap: params.overlap,
            intervals: params.intervals,
            eps: params.eps,
            min_samples: params.min_samples,
            built_on: "train_then_map".into(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn params(intervals: usize, overlap: f64, eps: f64) -> MapperParams {
        MapperParams { intervals, overlap, eps, min_samples: 1 }
    }

    #[test]
    fn single_blob_single_vertex() {
        let e = array![[0.0, 0.0], [0.1, 0.2], [0.2, 0.1]];
        let g = build_mapper(e.view(), &[0, 0, 0], 1, &params(1, 0.2, 1.0)).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.vertices[0].label_histogram, vec![3]);
    }

    #[test]
    fn two_far_blobs_two_vertices() {
        let e = array![[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]];
        let g = build_mapper(e.view(), &[0, 0, 1, 1], 2, &params(1, 0.0, 1.0)).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert!(g.edges.is_empty());
        assert_eq!(g.vertices[0].mean_label, 0.0);
        assert_eq!(g.vertices[1].mean_label, 1.0);
    }

    #[test]
    fn circle_has_one_cycle() {
        let n = 100;
        let e = Array2::from_shape_fn((n, 2), |(i, k)| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            10.0 * if k == 0 { t.cos() } else { t.sin() }
        });
        // spacing is ~0.63, so eps = 1.5 links neighbors only
        let g = build_mapper(e.view(), &vec![0; n], 1, &params(5, 0.3, 1.5)).unwrap();
        assert_eq!(g.cycle_rank(), 1);
        assert_eq!(g.components(), 1);
    }

    #[test]
    fn noise_is_counted_not_placed() {
        let e = array![[0.0], [0.1], [0.2], [50.0]];
        let g = build_mapper(e.view(), &[0, 0, 0, 0], 1, &MapperParams { intervals: 1, overlap: 0.0, eps: 1.0, min_samples: 2 }).unwrap();
        assert_eq!(g.vertices.len(), 1);
        assert_eq!(g.noise_count, 1);
    }

    #[test]
    fn label_mismatch_rejected() {
        let e = array![[0.0], [1.0]];
        assert!(build_mapper(e.view(), &[0], 1, &params(1, 0.0, 1.0)).is_err());
        assert!(build_mapper(e.view(), &[0, 5], 2, &params(1, 0.0, 1.0)).is_err());
    }

    #[test]
    fn train_then_map_places_test_points() {
        let train = array![[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]];
        let test = array![[0.05], [5.05], [50.0]];
        let g = build_mapper_train_then_map(train.view(), test.view(), &[0, 1, 1], 2, &params(1, 0.0, 1.0)).unwrap();
        assert_eq!(g.vertices.len(), 2);
        assert_eq!(g.vertices[0].members, vec![0]);
        assert_eq!(g.vertices[1].members, vec![1]);
        assert_eq!(g.noise_count, 1);
        assert_eq!(g.provenance.built_on, "train_then_map");
    }

    fn random_embedding(seed: u64, n: usize) -> Array2<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..10.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn edges_are_exactly_shared_members(seed in 0u64..10_000, i in 1usize..6, o in 0.0f64..0.6) {
            let e = random_embedding(seed, 40);
            let g = build_mapper(e.view(), &vec![0; 40], 1, &MapperParams { intervals: i, overlap: o, eps: 2.0, min_samples: 2 }).unwrap();
            for a in 0..g.vertices.len() {
                for b in (a + 1)..g.vertices.len() {
                    let sa: BTreeSet<_> = g.vertices[a].members.iter().collect();
                    let shared = g.vertices[b].members.iter().any(|p| sa.contains(p));
                    prop_assert_eq!(shared, g.edges.binary_search(&(a, b)).is_ok());
                }
            }
            prop_assert!(g.edges.iter().all(|(u, v)| u < v));
            for v in &g.vertices {
                prop_assert!(!v.members.is_empty());
                prop_assert_eq!(v.label_histogram.iter().sum::<usize>(), v.members.len());
            }
        }

        #[test]
        fn non_noise_points_are_placed(seed in 0u64..10_000, i in 1usize..6, o in 0.0f64..0.5) {
            let e = random_embedding(seed, 40);
            let g = build_mapper(e.view(), &vec![0; 40], 1, &MapperParams { intervals: i, overlap: o, eps: 3.0, min_samples: 1 }).unwrap();
            // with min_samples = 1 nothing is noise
            prop_assert_eq!(g.noise_count, 0);
            let mut seen = vec![0usize; 40];
            for v in &g.vertices {
                for &p in &v.members {
                    seen[p] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| (1..=4).contains(&c)));
        }

        #[test]
        fn larger_overlap_never_loses_incidences(seed in 0u64..10_000, i in 2usize..8, o in 0.0f64..0.45, extra in 0.0f64..0.45) {
            let e = random_embedding(seed, 30);
            let count = |ov: f64| {
                let c = build_cover(e.view(), i, ov).unwrap();
                e.rows().into_iter().map(|r| c.bins_of(&r.to_vec()).len()).sum::<usize>()
            };
            prop_assert!(count(o + extra) >= count(o));
        }

        #[test]
        fn dbscan_partition_ignores_row_order(seed in 0u64..10_000, eps in 0.5f64..3.0, min_samples in 1usize..5) {
            let e = random_embedding(seed, 30);
            let mut rev = e.clone();
            rev.invert_axis(Axis(0));
            let a = dbscan(e.view(), eps, min_samples).unwrap();
            let b = dbscan(rev.view(), eps, min_samples).unwrap();
            // core-reachable structure is order free; only border ties may move,
            // so compare the partition restricted to core points and the noise set
            let core = |x: &Array2<f64>, i: usize| {
                (0..x.nrows()).filter(|&j| {
                    x.row(i).iter().zip(x.row(j)).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() <= eps
                }).count() >= min_samples
            };
            for i in 0..30 {
                prop_assert_eq!(a[i].is_none(), b[29 - i].is_none());
                for j in 0..30 {
                    if core(&e, i) && core(&e, j) {
                        prop_assert_eq!(a[i] == a[j], b[29 - i] == b[29 - j]);
                    }
                }
            }
        }
    }
}
