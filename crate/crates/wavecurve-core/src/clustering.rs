//! Curve clustering: mean-scaled squared L2 distances, complete-linkage
//! agglomeration, dendrogram cuts, Hartigan-index selection of k and
//! severity ordering of the resulting clusters.
//!
//! The distance is used exactly as written, `d(x,v) = (1/c) int (x-v)^2 dt`:
//! a squared quantity, not a metric. Complete linkage only compares
//! distances, so the dendrogram topology is the same as for the square-root
//! version; the merge heights are on the squared scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curve::CurveSet;
use crate::error::CoreError;
use crate::grid::Grid;
use crate::linalg::Mat;

/// Symmetric matrix of pairwise curve distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    mat: Mat,
}

impl DistanceMatrix {
    pub fn from_mat(mat: Mat) -> Result<Self, CoreError> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(CoreError::shape("distance matrix must be square"));
        }
        for i in 0..n {
            if mat[(i, i)] != 0.0 {
                return Err(CoreError::input("distance matrix diagonal must be zero"));
            }
            for j in 0..n {
                let v = mat[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(CoreError::input(format!(
                        "distance ({i},{j}) = {v} is not a finite nonnegative value"
                    )));
                }
                if v != mat[(j, i)] {
                    return Err(CoreError::input("distance matrix must be symmetric"));
                }
            }
        }
        Ok(DistanceMatrix { mat })
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }
}

/// Mean-scaled squared L2 distance between two sampled series:
/// `(1/c) int (x-v)^2 dt` by trapezoid quadrature on `grid`.
pub fn l2_distance(x: &[f64], v: &[f64], grid: &Grid) -> Result<f64, CoreError> {
    if x.len() != grid.len() || v.len() != grid.len() {
        return Err(CoreError::shape(format!(
            "series lengths {}/{} != grid length {}",
            x.len(),
            v.len(),
            grid.len()
        )));
    }
    let diff: Vec<f64> = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok(grid.integrate(&diff)? / grid.span())
}

/// Pairwise distances over a curve collection. Curves are evaluated on the
/// working grid refined `refine`-fold so the quadrature resolves the smooth
/// integrand well below the clustering scale.
pub fn l2_distance_matrix(
    curves: &CurveSet,
    grid: &Grid,
    refine: usize,
) -> Result<DistanceMatrix, CoreError> {
    let fine = grid.refined(refine)?;
    let values = curves.values_on(&fine)?;
    distance_matrix_from_values(&values, &fine)
}

/// Pairwise distances between sampled rows.
pub fn distance_matrix_from_values(
    values: &Mat,
    grid: &Grid,
) -> Result<DistanceMatrix, CoreError> {
    let n = values.nrows();
    let w = grid.trapezoid_weights();
    let span = grid.span();
    let mut mat = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (values.row(i), values.row(j));
            let mut acc = 0.0;
            for k in 0..w.len() {
                let d = a[k] - b[k];
                acc += w[k] * d * d;
            }
            let dist = acc / span;
            mat[(i, j)] = dist;
            mat[(j, i)] = dist;
        }
    }
    DistanceMatrix::from_mat(mat)
}

/// One agglomeration step. `left`/`right` are node ids: leaves are
/// `0..n_leaves`, the cluster created by merge `t` is `n_leaves + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n_leaves: usize,
    /// `n_leaves - 1` merges in nondecreasing height order.
    pub merges: Vec<Merge>,
    /// Left-to-right display order of the leaves.
    pub leaf_order: Vec<usize>,
}

impl Dendrogram {
    /// Flat labels from keeping the first `n - k` merges. Clusters are
    /// numbered `0..k` in order of their smallest member index.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, CoreError> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(CoreError::input(format!(
                "cut at k = {k} outside 1..={n}"
            )));
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (t, m) in self.merges.iter().take(n - k).enumerate() {
            let node = n + t;
            let a = find(&mut parent, m.left);
            let b = find(&mut parent, m.right);
            parent[a] = node;
            parent[b] = node;
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        // label clusters by ascending smallest member
        let mut label_of_root: Vec<Option<usize>> = vec![None; 2 * n - 1];
        let mut next = 0;
        let mut labels = vec![0usize; n];
        for i in 0..n {
            let r = roots[i];
            let lbl = match label_of_root[r] {
                Some(l) => l,
                None => {
                    let l = next;
                    label_of_root[r] = Some(l);
                    next += 1;
                    l
                }
            };
            labels[i] = lbl;
        }
        debug_assert_eq!(next, k);
        Ok(labels)
    }
}

/// Complete-linkage agglomerative clustering of a distance matrix.
///
/// Ties are broken deterministically: among equal candidate heights the pair
/// whose smallest member index is lowest wins, then the other side's
/// smallest member.
pub fn hclust_complete(dist: &DistanceMatrix) -> Result<Dendrogram, CoreError> {
    let n = dist.n();
    if n < 2 {
        return Err(CoreError::input(format!(
            "clustering needs at least 2 items, got {n}"
        )));
    }
    // active clusters: node id, min leaf, members
    let mut active: Vec<usize> = (0..n).collect();
    let mut min_leaf: Vec<usize> = (0..n).collect(); // indexed by node id
    min_leaf.resize(2 * n - 1, usize::MAX);
    // working distances between active clusters, keyed by position in `active`
    let mut d = dist.mat().clone();
    // d is indexed by *node id* via a map: we instead rebuild a dense matrix
    // over active positions each merge. n is small; keep it simple with a
    // growing table indexed by node id.
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; 2 * n - 1]; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            table[i][j] = d[(i, j)];
        }
    }
    d = Mat::zeros(0, 0);
    let _ = d;
    let mut children: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); 2 * n - 1];
    let mut merges = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        // find the closest active pair
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for ai in 0..active.len() {
            for bi in ai + 1..active.len() {
                let (u, v) = (active[ai], active[bi]);
                let h = table[u][v];
                let (lo, hi) = if min_leaf[u] <= min_leaf[v] {
                    (min_leaf[u], min_leaf[v])
                } else {
                    (min_leaf[v], min_leaf[u])
                };
                let cand = (h, lo, hi, ai, bi);
                let better = match &best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => {
                        (h, lo, hi) < (*bh, *blo, *bhi)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (h, _, _, ai, bi) = best.unwrap();
        let (u, v) = (active[ai], active[bi]);
        let node = n + t;
        // left child: the side containing the smallest leaf
        let (left, right) = if min_leaf[u] <= min_leaf[v] { (u, v) } else { (v, u) };
        children[node] = (left, right);
        min_leaf[node] = min_leaf[left];
        merges.push(Merge {
            left,
            right,
            height: h,
        });
        // complete linkage: distance to the merged cluster is the max
        for &w in &active {
            if w == u || w == v {
                continue;
            }
            let m = table[u][w].max(table[v][w]);
            table[node][w] = m;
            table[w][node] = m;
        }
        // replace u, v by node
        active.retain(|&x| x != u && x != v);
        active.push(node);
    }
    // display order: depth-first, left child first
    let mut leaf_order = Vec::with_capacity(n);
    let mut stack = vec![2 * n - 2];
    while let Some(node) = stack.pop() {
        if node < n {
            leaf_order.push(node);
        } else {
            let (l, r) = children[node];
            stack.push(r);
            stack.push(l);
        }
    }
    Ok(Dendrogram {
        n_leaves: n,
        merges,
        leaf_order,
    })
}

/// Total within-cluster sum of the squared distances to the pointwise
/// cluster mean curves.
pub fn within_cluster_ss(values: &Mat, grid: &Grid, labels: &[usize]) -> Result<f64, CoreError> {
    if labels.len() != values.nrows() {
        return Err(CoreError::shape("one label per curve required"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let npts = values.ncols();
    let mut sums = Mat::zeros(k, npts);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let row = values.row(i);
        let srow = sums.row_mut(l);
        for (s, v) in srow.iter_mut().zip(row) {
            *s += v;
        }
    }
    for l in 0..k {
        if counts[l] == 0 {
            return Err(CoreError::input(format!("empty cluster label {l}")));
        }
        let c = counts[l] as f64;
        for s in sums.row_mut(l) {
            *s /= c;
        }
    }
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        total += l2_distance(values.row(i), sums.row(l), grid)?;
    }
    Ok(total)
}

/// Hartigan index selection of the cluster count.
///
/// `H(k) = (W(k)/W(k+1) - 1)(n - k - 1)`; the selected k* is the smallest k
/// with `H(k) <= threshold`, capped at `k_max`. A perfect fit (`W(k) = 0`)
/// selects k immediately; `W(k+1) = 0` with `W(k) > 0` makes H infinite.
pub fn select_k_hartigan(
    values: &Mat,
    grid: &Grid,
    dendro: &Dendrogram,
    k_max: usize,
    threshold: f64,
) -> Result<(usize, Vec<f64>), CoreError> {
    let n = dendro.n_leaves;
    if values.nrows() != n {
        return Err(CoreError::shape("values rows != dendrogram leaves"));
    }
    let k_cap = k_max.min(n.saturating_sub(1)).max(1);
    let mut w = Vec::with_capacity(k_cap + 1);
    for k in 1..=(k_cap + 1).min(n) {
        let labels = dendro.cut(k)?;
        w.push(within_cluster_ss(values, grid, &labels)?);
    }
    // a W below rounding noise relative to the curves' own magnitude counts
    // as an exact fit
    let zeros = vec![0.0; values.ncols()];
    let mut scale = 0.0;
    for i in 0..n {
        scale += l2_distance(values.row(i), &zeros, grid)?;
    }
    scale /= n as f64;
    let zero_tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut h_values = Vec::with_capacity(k_cap);
    let mut k_star = None;
    for k in 1..=k_cap {
        let wk = w[k - 1];
        let h = if wk <= zero_tol {
            0.0
        } else if k < w.len() && w[k] > zero_tol {
            (wk / w[k] - 1.0) * (n as f64 - k as f64 - 1.0)
        } else {
            f64::INFINITY
        };
        h_values.push(h);
        if k_star.is_none() && h <= threshold {
            k_star = Some(k);
        }
    }
    Ok((k_star.unwrap_or(k_cap), h_values))
}

/// Severity rank per cluster: 0 for the cluster whose pointwise mean curve
/// has the lowest maximum, ascending from there.
pub fn severity_order(labels: &[usize], values: &Mat) -> Result<Vec<usize>, CoreError> {
    if labels.len() != values.nrows() {
        return Err(CoreError::shape("one label per curve required"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let npts = values.ncols();
    let mut sums = Mat::zeros(k, npts);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let row = values.row(i);
        for (s, v) in sums.row_mut(l).iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut peaks = Vec::with_capacity(k);
    for l in 0..k {
        if counts[l] == 0 {
            return Err(CoreError::input(format!("empty cluster label {l}")));
        }
        let c = counts[l] as f64;
        let peak = sums
            .row(l)
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v / c));
        peaks.push(peak);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| peaks[a].partial_cmp(&peaks[b]).unwrap().then(a.cmp(&b)));
    let mut rank = vec![0usize; k];
    for (r, &l) in order.iter().enumerate() {
        rank[l] = r;
    }
    Ok(rank)
}

/// Adjusted Rand index between two flat labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1;
    }
    let choose2 = |x: u64| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };
    let mut sum_ij = 0.0;
    let mut row_sums = vec![0u64; ka];
    let mut col_sums = vec![0u64; kb];
    for i in 0..ka {
        for j in 0..kb {
            sum_ij += choose2(table[i][j]);
            row_sums[i] += table[i][j];
            col_sums[j] += table[i][j];
        }
    }
    let sum_a: f64 = row_sums.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = col_sums.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0; // both labelings degenerate (all singletons or one block)
    }
    (sum_ij - expected) / (max_index - expected)
}

/// Full clustering pass used by the pipeline: distances, dendrogram,
/// Hartigan k*, flat labels and severity ranks.
#[derive(Debug, Clone)]
pub struct ClusterAnalysis {
    pub distances: DistanceMatrix,
    pub dendrogram: Dendrogram,
    pub k_star: usize,
    pub hartigan: Vec<f64>,
    pub labels: Vec<usize>,
    /// Severity rank of each curve's cluster (0 = mildest).
    pub severity_rank: Vec<usize>,
}

pub fn cluster_curves(
    curves: &CurveSet,
    grid: &Grid,
    refine: usize,
    k_max: usize,
    threshold: f64,
) -> Result<ClusterAnalysis, CoreError> {
    let fine = grid.refined(refine)?;
    let values = curves.values_on(&fine)?;
    let distances = distance_matrix_from_values(&values, &fine)?;
    let dendrogram = hclust_complete(&distances)?;
    let (k_star, hartigan) = select_k_hartigan(&values, &fine, &dendrogram, k_max, threshold)?;
    let labels = dendrogram.cut(k_star)?;
    let cluster_rank = severity_order(&labels, &values)?;
    let severity_rank = labels.iter().map(|&l| cluster_rank[l]).collect();
    Ok(ClusterAnalysis {
        distances,
        dendrogram,
        k_star,
        hartigan,
        labels,
        severity_rank,
    })
}
