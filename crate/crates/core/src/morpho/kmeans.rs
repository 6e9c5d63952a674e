//! Lloyd's K-Means with k-means++ seeding over row-major feature matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

pub const KMEANS_TOLERANCE: f64 = 1e-6;
pub const KMEANS_MAX_ITERATIONS: usize = 100;

/// Row-major `n × d` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub data: Vec<f64>,
    pub dim: usize,
}

impl Features {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Builds features from `d` equally long columns, z-scoring each one.
    /// Constant columns become zero.
    pub fn standardized(columns: &[&[f32]]) -> Result<Features> {
        let dim = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        if dim == 0 || n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("feature columns must be non-empty and equally long".into()));
        }
        let mut data = vec![0f64; n * dim];
        for (j, col) in columns.iter().enumerate() {
            let mean = ordered_sum(n, |i| col[i] as f64) / n as f64;
            let var = ordered_sum(n, |i| (col[i] as f64 - mean).powi(2)) / n as f64;
            let sd = var.sqrt();
            let scale = if sd > 0.0 { 1.0 / sd } else { 0.0 };
            for (i, &v) in col.iter().enumerate() {
                data[i * dim + j] = (v as f64 - mean) * scale;
            }
        }
        Ok(Features { data, dim })
    }
}

/// Sum of `f(0..n)` accumulated per fixed chunk, chunks added in order.
fn ordered_sum(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    par::chunked(n, |s, e| (s..e).map(&f).sum::<f64>()).into_iter().sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster per point, relabelled `0..k'` by first occurrence.
    pub labels: Vec<u32>,
    /// Centroids in the relabelled order (row-major `k' × d`).
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, centre) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, centre);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

/// k-means++: first centre uniform, the rest drawn with probability ∝ D².
/// Stops early when every point coincides with a centre.
fn seed_centroids(f: &Features, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = f.len();
    let mut centroids = f.row(rng.random_range(0..n)).to_vec();
    let mut d2: Vec<f64> = par::map_range(n, |i| sq_dist(f.row(i), &centroids));
    while centroids.len() / f.dim < k {
        let partial = par::chunked(n, |s, e| d2[s..e].iter().sum::<f64>());
        let total: f64 = partial.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        'outer: for (c, &p) in partial.iter().enumerate() {
            if acc + p <= target {
                acc += p;
                continue;
            }
            let start = c * par::REDUCE_CHUNK;
            for (i, &v) in d2[start..(start + par::REDUCE_CHUNK).min(n)].iter().enumerate() {
                acc += v;
                if acc > target && v > 0.0 {
                    pick = start + i;
                    break 'outer;
                }
            }
        }
        if d2[pick] == 0.0 {
            // Rounding pushed the draw past the end; take the last positive weight.
            pick = d2.iter().rposition(|&v| v > 0.0).unwrap_or(pick);
        }
        let new = f.row(pick).to_vec();
        centroids.extend_from_slice(&new);
        let updated = par::map_range(n, |i| d2[i].min(sq_dist(f.row(i), &new)));
        d2 = updated;
    }
    centroids
}

struct Assignment {
    labels: Vec<u32>,
    dist: Vec<f64>,
    objective: f64,
}

fn assign(f: &Features, centroids: &[f64]) -> Assignment {
    let pairs = par::map_range(f.len(), |i| nearest(f.row(i), centroids, f.dim));
    let (labels, dist): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
    let objective = par::chunked(dist.len(), |s, e| dist[s..e].iter().sum::<f64>())
        .into_iter()
        .sum();
    Assignment {
        labels,
        dist,
        objective,
    }
}

/// Per-cluster sums and counts, accumulated per chunk and merged in order.
fn cluster_sums(f: &Features, labels: &[u32], k: usize) -> (Vec<f64>, Vec<u64>) {
    let d = f.dim;
    let parts = par::chunked(f.len(), |s, e| {
        let mut sums = vec![0f64; k * d];
        let mut counts = vec![0u64; k];
        for i in s..e {
            let c = labels[i] as usize;
            counts[c] += 1;
            for (acc, v) in sums[c * d..(c + 1) * d].iter_mut().zip(f.row(i)) {
                *acc += v;
            }
        }
        (sums, counts)
    });
    let mut sums = vec![0f64; k * d];
    let mut counts = vec![0u64; k];
    for (ps, pc) in parts {
        sums.iter_mut().zip(ps).for_each(|(a, b)| *a += b);
        counts.iter_mut().zip(pc).for_each(|(a, b)| *a += b);
    }
    (sums, counts)
}

pub fn kmeans(f: &Features, k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if f.is_empty() {
        return Err(Error::InvalidInput("no points to cluster".into()));
    }
    let d = f.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(f, k, &mut rng);
    let k = centroids.len() / d;
    let mut a = assign(f, &centroids);
    let mut objective = vec![a.objective];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let (sums, counts) = cluster_sums(f, &a.labels, k);
        let mut next = centroids.clone();
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    next[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            } else {
                // Reseed an empty cluster at the point farthest from its centre.
                let far = a
                    .dist
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken.contains(i))
                    .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
                        if v > best.1 { (i, v) } else { best }
                    })
                    .0;
                taken.push(far);
                next[c * d..(c + 1) * d].copy_from_slice(f.row(far));
            }
        }
        let shift = next
            .chunks_exact(d)
            .zip(centroids.chunks_exact(d))
            .map(|(p, q)| sq_dist(p, q).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        a = assign(f, &centroids);
        objective.push(a.objective);
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    // Canonical labels: order of first occurrence; clusters left empty vanish.
    let mut remap = vec![u32::MAX; k];
    let mut order = Vec::new();
    for &l in &a.labels {
        if remap[l as usize] == u32::MAX {
            remap[l as usize] = order.len() as u32;
            order.push(l as usize);
        }
    }
    let labels = a.labels.iter().map(|&l| remap[l as usize]).collect();
    let centroids = order
        .iter()
        .flat_map(|&c| centroids[c * d..(c + 1) * d].iter().copied())
        .collect();
    Ok(KMeansResult {
        labels,
        centroids,
        objective,
        iterations,
    })
}
