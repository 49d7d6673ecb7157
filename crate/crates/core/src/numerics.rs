//! Dense numeric kernels shared by the filters, the autoencoder and Mapper.

use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Matrix, Result};

const MAX_JACOBI_SWEEPS: usize = 100;

/// Symmetric matrix of Euclidean distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.values
    }

    /// Wraps an explicit matrix, checking symmetry, zero diagonal and nonnegativity.
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::invalid("distance matrix must be square"));
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..i {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 || v != values[[j, i]] {
                    return Err(Error::invalid(format!(
                        "distance matrix entry ({i}, {j}) is not a symmetric nonnegative finite value"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { values })
    }
}

pub(crate) fn ensure_finite(x: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}

/// Squared Euclidean distances between all row pairs, computed by direct differences.
pub fn pairwise_sq_distances(x: ArrayView2<'_, f64>) -> Matrix {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..i {
            let d2: f64 = xi
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[[i, j]] = d2;
            out[[j, i]] = d2;
        }
    }
    out
}

/// Euclidean distance matrix of the rows of `x`.
pub fn pairwise_distances(x: ArrayView2<'_, f64>) -> Result<DistanceMatrix> {
    if x.nrows() == 0 {
        return Err(Error::invalid("pairwise_distances needs at least one row"));
    }
    ensure_finite(x, "input matrix")?;
    let mut values = pairwise_sq_distances(x);
    values.mapv_inplace(f64::sqrt);
    Ok(DistanceMatrix { values })
}

/// Flips each column so that its largest-magnitude entry is positive.
fn normalize_signs(vectors: &mut Matrix) {
    for mut col in vectors.columns_mut() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns, each sign-normalized so its largest-magnitude entry is positive.
pub fn sym_eig(s: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Matrix)> {
    let d = s.nrows();
    if s.ncols() != d || d == 0 {
        return Err(Error::invalid("sym_eig needs a nonempty square matrix"));
    }
    ensure_finite(s, "symmetric matrix")?;
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..d {
        for j in 0..i {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-9 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut a = s.to_owned();
    // symmetrize exactly so the rotations stay consistent
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    let mut v = Array2::<f64>::eye(d);
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = f64::EPSILON * frob;

    let off_norm = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..i {
                acc += 2.0 * a[[i, j]] * a[[i, j]];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= tol || off == 0.0 {
            break;
        }
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::ConvergenceFailure {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..d {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - sn * akq;
                    a[[k, q]] = sn * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - sn * aqk;
                    a[[q, k]] = sn * apk + c * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..d).map(|i| a[[i, i]]).collect();
    let order = descending_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = v.select(Axis(1), &order);
    normalize_signs(&mut vectors);
    Ok((values, vectors))
}

/// Top-`k` eigenpairs of a symmetric matrix.
pub fn sym_eig_topk(s: ArrayView2<'_, f64>, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let d = s.nrows();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={d}")));
    }
    let (mut values, vectors) = sym_eig(s)?;
    values.truncate(k);
    let top = vectors.slice(ndarray::s![.., ..k]).to_owned();
    Ok((values, top))
}

/// Extends `basis` (orthonormal columns, some possibly zero) to a full
/// orthonormal set by Gram-Schmidt against the standard basis.
fn complete_orthonormal(columns: &mut [Vec<f64>], valid: &mut [bool]) {
    let dim = columns.first().map_or(0, Vec::len);
    let mut candidate = 0;
    for idx in 0..columns.len() {
        if valid[idx] {
            continue;
        }
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (other, ok) in columns.iter().zip(valid.iter()) {
                    if !*ok {
                        continue;
                    }
                    let dot: f64 = e.iter().zip(other).map(|(a, b)| a * b).sum();
                    for (ei, oi) in e.iter_mut().zip(other) {
                        *ei -= dot * oi;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                columns[idx] = e.into_iter().map(|x| x / norm).collect();
                valid[idx] = true;
                break;
            }
        }
    }
}

/// One-sided (Hestenes) Jacobi on the columns of `cols` (each of length `rows`).
/// Returns the rotated columns and the accumulated right rotation (as columns).
fn hestenes(mut cols: Vec<Vec<f64>>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let k = cols.len();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = 1e-15;
    for sweep in 0.. {
        if sweep == MAX_JACOBI_SWEEPS {
            return Err(Error::ConvergenceFailure {
                sweeps: sweep,
                off_norm: f64::NAN,
            });
        }
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        a += x * x;
                        b += y * y;
                        g += x * y;
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                let (left, right) = v.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    Ok((cols, v))
}

/// Top-`k` singular values (descending) and right singular vectors (d×k) of `x`,
/// computed by one-sided Jacobi directly on the data matrix.
pub fn svd_topk(x: ArrayView2<'_, f64>, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = x.dim();
    if k == 0 || k > n.min(d) {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            n.min(d)
        )));
    }
    ensure_finite(x, "input matrix")?;

    let (sigma, mut right): (Vec<f64>, Vec<Vec<f64>>) = if n >= d {
        // columns of X; right singular vectors are the accumulated rotation
        let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j).to_vec()).collect();
        let (cols, v) = hestenes(cols)?;
        let sigma = cols
            .iter()
            .map(|c| c.iter().map(|a| a * a).sum::<f64>().sqrt())
            .collect();
        (sigma, v)
    } else {
        // columns of Xᵀ; right singular vectors of X are its normalized columns
        let cols: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
        let (cols, _) = hestenes(cols)?;
        let mut sigma = Vec::with_capacity(n);
        let mut dirs = Vec::with_capacity(n);
        for c in cols {
            let norm = c.iter().map(|a| a * a).sum::<f64>().sqrt();
            sigma.push(norm);
            dirs.push(if norm > 0.0 {
                c.into_iter().map(|a| a / norm).collect()
            } else {
                vec![0.0; d]
            });
        }
        (sigma, dirs)
    };

    let order = descending_order(&sigma);
    let values: Vec<f64> = order.iter().take(k).map(|&i| sigma[i]).collect();
    let mut chosen: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&i| std::mem::take(&mut right[i]))
        .collect();
    if n < d {
        let scale = values.first().copied().unwrap_or(0.0);
        let mut valid: Vec<bool> = values
            .iter()
            .map(|&s| s > 1e-12 * scale.max(f64::MIN_POSITIVE))
            .collect();
        complete_orthonormal(&mut chosen, &mut valid);
    }
    let dim = chosen.first().map_or(d, Vec::len);
    let mut vectors = Array2::zeros((dim, k));
    for (j, col) in chosen.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            vectors[[i, j]] = val;
        }
    }
    normalize_signs(&mut vectors);
    Ok((values, vectors))
}

/// Edge of a spanning tree with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl MstEdge {
    fn new(a: usize, b: usize, weight: f64) -> Self {
        MstEdge {
            i: a.min(b),
            j: a.max(b),
            weight,
        }
    }

    fn key(&self) -> (f64, usize, usize) {
        (self.weight, self.i, self.j)
    }
}

fn edge_less(a: &MstEdge, b: &MstEdge) -> bool {
    let (ka, kb) = (a.key(), b.key());
    match ka.0.total_cmp(&kb.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (ka.1, ka.2) < (kb.1, kb.2),
    }
}

/// Spanning tree edges; these are the 0-dimensional persistence pairings of
/// the Vietoris-Rips filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct MstEdges {
    pub edges: Vec<MstEdge>,
}

impl MstEdges {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Minimum spanning tree by dense Prim.
///
/// Edges are totally ordered by `(weight, min(i, j), max(i, j))`, which makes
/// the tree unique. The result is sorted in that order.
pub fn minimum_spanning_tree(dist: &DistanceMatrix) -> Result<MstEdges> {
    let n = dist.n();
    if n < 2 {
        return Err(Error::invalid("minimum spanning tree needs at least 2 points"));
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<MstEdge>> = vec![None; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = Some(MstEdge::new(0, v, dist.get(0, v)));
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            if let Some(e) = &best[v] {
                let better = match pick {
                    None => true,
                    Some(p) => edge_less(e, best[p].as_ref().expect("candidate has edge")),
                };
                if better {
                    pick = Some(v);
                }
            }
        }
        let u = pick.expect("graph is complete");
        in_tree[u] = true;
        edges.push(best[u].take().expect("picked vertex has edge"));
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = MstEdge::new(u, v, dist.get(u, v));
            let replace = match &best[v] {
                None => true,
                Some(cur) => edge_less(&cand, cur),
            };
            if replace {
                best[v] = Some(cand);
            }
        }
    }
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    Ok(MstEdges { edges })
}
