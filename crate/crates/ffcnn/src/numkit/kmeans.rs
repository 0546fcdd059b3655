//! Lloyd k-means with k-means++ or random initialization, plus a fast
//! deterministic 1-D variant used for interval partitioning.
//!
//! Determinism rules, applied everywhere: distance ties go to the smallest
//! cluster index, empty clusters are reseeded from the most expensive sample,
//! and all randomness comes from the caller's seed.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    #[serde(rename = "kmeanspp")]
    KMeansPP,
    Random,
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Q × dim centroid matrix.
    pub centroids: Array2<f64>,
    /// Nearest-centroid index per sample.
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
}

/// Movement threshold scaled to the data: 1e-6 of the largest sample norm.
pub fn default_tol(samples: ArrayView2<f64>) -> f64 {
    let max_norm = samples
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0_f64, f64::max);
    1e-6 * max_norm.max(f64::MIN_POSITIVE)
}

/// Bit pattern of a sample row, used for exact duplicate detection
/// (−0.0 normalized to +0.0 so numerically equal rows collide).
fn row_key(row: ArrayView1<f64>) -> Vec<u64> {
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn count_distinct(samples: ArrayView2<f64>) -> usize {
    let mut seen = HashSet::new();
    for row in samples.rows() {
        seen.insert(row_key(row));
    }
    seen.len()
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Nearest-centroid assignment via ‖x‖² − 2xᵀc + ‖c‖², with the cross terms
/// done as one matrix product. Returns (assignment, squared distance) pairs.
fn assign(
    samples: ArrayView2<f64>,
    x_sq: &[f64],
    centroids: &Array2<f64>,
) -> (Vec<usize>, Vec<f64>) {
    let n = samples.nrows();
    let q = centroids.nrows();
    let prod = samples.dot(&centroids.t());
    let c_sq: Vec<f64> = centroids.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut asg = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    for i in 0..n {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..q {
            let d = x_sq[i] - 2.0 * prod[[i, j]] + c_sq[j];
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        asg[i] = best;
        dist[i] = best_d.max(0.0);
    }
    (asg, dist)
}

fn init_centroids(
    samples: ArrayView2<f64>,
    q: usize,
    init: KMeansInit,
    seed: u64,
) -> Result<Array2<f64>> {
    let n = samples.nrows();
    let dim = samples.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Array2::zeros((q, dim));
    match init {
        KMeansInit::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut used = HashSet::new();
            let mut filled = 0;
            for i in order {
                if used.insert(row_key(samples.row(i))) {
                    centroids.row_mut(filled).assign(&samples.row(i));
                    filled += 1;
                    if filled == q {
                        break;
                    }
                }
            }
            debug_assert_eq!(filled, q, "distinct-sample precondition violated");
        }
        KMeansInit::KMeansPP => {
            let first = rng.random_range(0..n);
            centroids.row_mut(0).assign(&samples.row(first));
            let mut d2: Vec<f64> = (0..n)
                .map(|i| squared_distance(samples.row(i), samples.row(first)))
                .collect();
            for k in 1..q {
                let total: f64 = d2.iter().sum();
                let target = rng.random::<f64>() * total;
                let mut pick = None;
                let mut last_positive = None;
                let mut cum = 0.0;
                for (i, &d) in d2.iter().enumerate() {
                    if d > 0.0 {
                        last_positive = Some(i);
                    }
                    cum += d;
                    if cum > target {
                        pick = Some(i);
                        break;
                    }
                }
                // Rounding can leave cum ≤ target at the end; fall back to the
                // last sample that still has positive weight.
                let pick = pick
                    .or(last_positive)
                    .ok_or_else(|| Error::numeric("k-means++ ran out of candidate samples"))?;
                centroids.row_mut(k).assign(&samples.row(pick));
                for i in 0..n {
                    let d = squared_distance(samples.row(i), samples.row(pick));
                    if d < d2[i] {
                        d2[i] = d;
                    }
                }
            }
        }
    }
    Ok(centroids)
}

/// Reseeds every empty cluster at the sample farthest from its assigned
/// centroid, skipping samples that coincide with an existing centroid.
fn repair_empty(
    samples: ArrayView2<f64>,
    dist: &[f64],
    counts: &[usize],
    centroids: &mut Array2<f64>,
) -> Result<bool> {
    let empties: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] == 0).collect();
    if empties.is_empty() {
        return Ok(false);
    }
    let n = samples.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    let mut taken: HashSet<Vec<u64>> = centroids
        .rows()
        .into_iter()
        .map(|r| row_key(r))
        .collect();
    let mut cursor = 0usize;
    for k in empties {
        let mut reseeded = false;
        while cursor < n {
            let i = order[cursor];
            cursor += 1;
            if taken.insert(row_key(samples.row(i))) {
                centroids.row_mut(k).assign(&samples.row(i));
                reseeded = true;
                break;
            }
        }
        if !reseeded {
            return Err(Error::numeric(
                "could not repair an empty k-means cluster: no unused sample values",
            ));
        }
    }
    Ok(true)
}

pub fn kmeans(
    samples: ArrayView2<f64>,
    q: usize,
    init: KMeansInit,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if q == 0 {
        return Err(Error::numeric("k-means requires at least one cluster"));
    }
    if max_iter == 0 {
        return Err(Error::numeric("k-means max_iter must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::numeric("k-means tol must be positive"));
    }
    let distinct = count_distinct(samples);
    if distinct < q {
        return Err(Error::numeric(format!(
            "k-means with {q} clusters needs at least {q} distinct samples, found {distinct}"
        )));
    }

    let dim = samples.ncols();
    let x_sq: Vec<f64> = samples.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut centroids = init_centroids(samples, q, init, seed)?;
    let mut iterations = 0usize;

    while iterations < max_iter {
        let (asg, dist) = assign(samples, &x_sq, &centroids);
        let mut sums = Array2::<f64>::zeros((q, dim));
        let mut counts = vec![0usize; q];
        for (i, &a) in asg.iter().enumerate() {
            counts[a] += 1;
            let mut row = sums.row_mut(a);
            row += &samples.row(i);
        }
        let mut new_centroids = centroids.clone();
        for k in 0..q {
            if counts[k] > 0 {
                let mut row = new_centroids.row_mut(k);
                row.assign(&sums.row(k));
                row.mapv_inplace(|v| v / counts[k] as f64);
            }
        }
        let repaired = repair_empty(samples, &dist, &counts, &mut new_centroids)?;
        let movement = (0..q)
            .map(|k| squared_distance(new_centroids.row(k), centroids.row(k)).sqrt())
            .fold(0.0_f64, f64::max);
        centroids = new_centroids;
        iterations += 1;
        if !repaired && movement < tol {
            break;
        }
    }

    // Final labeling; in rare cases the closing assignment can empty a
    // cluster again, so repair-and-relabel until stable (bounded by q).
    let (mut asg, mut dist) = assign(samples, &x_sq, &centroids);
    for _ in 0..q {
        let mut counts = vec![0usize; q];
        for &a in &asg {
            counts[a] += 1;
        }
        if !repair_empty(samples, &dist, &counts, &mut centroids)? {
            break;
        }
        let relabeled = assign(samples, &x_sq, &centroids);
        asg = relabeled.0;
        dist = relabeled.1;
    }

    let inertia = dist.iter().sum();
    Ok(KMeansResult {
        centroids,
        assignments: asg,
        inertia,
        iterations,
    })
}

/// 1-D k-means on scalar values with deterministic quantile initialization
/// over the distinct sorted values; no randomness involved.
#[derive(Debug, Clone)]
pub struct KMeans1d {
    /// Cluster centers in ascending order.
    pub centers: Vec<f64>,
    /// Cluster index per input position (clusters ordered by center value).
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

pub fn kmeans_1d(values: &[f64], q: usize, max_iter: usize, tol: f64) -> Result<KMeans1d> {
    let n = values.len();
    if n == 0 {
        return Err(Error::numeric("1-D k-means requires at least one value"));
    }
    if q == 0 {
        return Err(Error::numeric("1-D k-means requires at least one cluster"));
    }
    if max_iter == 0 || !(tol > 0.0) {
        return Err(Error::numeric("1-D k-means needs positive max_iter and tol"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sv: Vec<f64> = order.iter().map(|&i| values[i] + 0.0).collect();

    let mut distinct: Vec<f64> = Vec::new();
    for &v in &sv {
        if distinct.last() != Some(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() < q {
        return Err(Error::numeric(format!(
            "1-D k-means with {q} clusters needs {q} distinct values, found {}",
            distinct.len()
        )));
    }

    let mut prefix = vec![0.0f64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + sv[i];
    }

    // Quantile init over distinct values: always q distinct, ordered centers.
    let m = distinct.len();
    let mut centers: Vec<f64> = (0..q).map(|k| distinct[(2 * k + 1) * m / (2 * q)]).collect();

    // Cluster k covers sorted positions bounds[k]..bounds[k+1]; cut points sit
    // at midpoints between adjacent centers, boundary values going left
    // (equidistant → smaller cluster index).
    let cut_bounds = |centers: &[f64]| -> Vec<usize> {
        let mut bounds = vec![0usize; q + 1];
        bounds[q] = n;
        let mut start = 0usize;
        for k in 0..q.saturating_sub(1) {
            let mid = 0.5 * (centers[k] + centers[k + 1]);
            let cut = start + sv[start..].partition_point(|&v| v <= mid);
            bounds[k + 1] = cut;
            start = cut;
        }
        bounds
    };

    for _ in 0..max_iter {
        let bounds = cut_bounds(&centers);
        let mut new_centers = centers.clone();
        let mut empties = Vec::new();
        for k in 0..q {
            let (s, e) = (bounds[k], bounds[k + 1]);
            if e > s {
                new_centers[k] = (prefix[e] - prefix[s]) / (e - s) as f64;
            } else {
                empties.push(k);
            }
        }
        if !empties.is_empty() {
            // Reseed each empty center at the costliest value that is not
            // already a center, then restore center ordering.
            let center_set: HashSet<u64> =
                new_centers.iter().map(|v| (v + 0.0).to_bits()).collect();
            let mut candidates: Vec<(f64, f64)> = Vec::new(); // (cost, value)
            for k in 0..q {
                let c = new_centers[k];
                for i in bounds[k]..bounds[k + 1] {
                    let v = sv[i];
                    if !center_set.contains(&v.to_bits()) {
                        candidates.push(((v - c) * (v - c), v));
                    }
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
            candidates.dedup_by(|a, b| a.1 == b.1);
            if candidates.len() < empties.len() {
                return Err(Error::numeric(
                    "could not repair an empty 1-D k-means cluster",
                ));
            }
            for (slot, k) in empties.iter().enumerate() {
                new_centers[*k] = candidates[slot].1;
            }
            new_centers.sort_by(f64::total_cmp);
            centers = new_centers;
            continue;
        }
        let movement = centers
            .iter()
            .zip(&new_centers)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        centers = new_centers;
        if movement < tol {
            break;
        }
    }

    let bounds = cut_bounds(&centers);
    let mut assignments = vec![0usize; n];
    let mut inertia = 0.0;
    for k in 0..q {
        for pos in bounds[k]..bounds[k + 1] {
            assignments[order[pos]] = k;
            let d = sv[pos] - centers[k];
            inertia += d * d;
        }
    }
    Ok(KMeans1d {
        centers,
        assignments,
        inertia,
    })
}
