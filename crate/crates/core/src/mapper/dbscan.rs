use std::collections::VecDeque;

use ndarray::ArrayView2;

use crate::{Error, Result};

fn distance(points: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(points.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// DBSCAN with Euclidean distance.
///
/// A point is core when at least `min_samples` points (itself included) lie
/// within `eps`. Clusters are seeded from unvisited core points in ascending
/// index order and expanded breadth-first; a border point keeps the first
/// cluster that reaches it. Returns `None` for noise.
pub fn dbscan(points: ArrayView2<'_, f64>, eps: f64, min_samples: usize) -> Result<Vec<Option<usize>>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps must be positive"));
    }
    if min_samples < 1 {
        return Err(Error::invalid("min_samples must be at least 1"));
    }
    let n = points.nrows();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        neighbors[i].push(i);
        for j in 0..i {
            if distance(points, i, j) <= eps {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[seed] = Some(cluster);
        queue.push_back(seed);
        while let Some(q) = queue.pop_front() {
            for &nb in &neighbors[q] {
                if labels[nb].is_none() {
                    labels[nb] = Some(cluster);
                    if core[nb] {
                        queue.push_back(nb);
                    }
                }
            }
        }
    }
    Ok(labels)
}
