//! K-means over label vectors, used to initialize the code matrix `Q` and
//! the cluster centers `A`.

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Zero-based cluster index of each point.
    pub assignments: Vec<usize>,
    /// `L × m`; column `j` is the mean of the points assigned to cluster `j`.
    pub centers: Array2<f64>,
    /// Sum of squared distances after each Lloyd sweep.
    pub objective_trace: Vec<f64>,
}

impl Clustering {
    pub fn n_clusters(&self) -> usize {
        self.centers.ncols()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding. `points` is `n × L` (one label
/// vector per row). Stops when assignments stop changing or after `max_iter`
/// sweeps.
pub fn kmeans(points: &Array2<f64>, m: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let (n, dim) = points.dim();
    if m == 0 {
        return Err(Error::InvalidInput("k-means needs at least one cluster".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!("cannot form {m} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, m, &mut rng);

    let mut assignments = vec![usize::MAX; n];
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, row) in points.rows().into_iter().enumerate() {
            let best = nearest(row, &centers);
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        changed |= repair_empty(points, &centers, &mut assignments, m);
        centers = cluster_means(points, &assignments, m, dim);
        let obj = objective(points, &centers, &assignments);
        if let Some(&prev) = trace.last() {
            debug_assert!(obj <= prev + 1e-9 * prev.abs().max(1.0), "k-means objective rose: {prev} -> {obj}");
        }
        trace.push(obj);
        if !changed {
            break;
        }
    }
    Ok(Clustering { assignments, centers: centers.t().as_standard_layout().into_owned(), objective_trace: trace })
}

/// `m × L` centers; first uniformly, the rest with probability ∝ D².
fn seed_centers(points: &Array2<f64>, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.rows().into_iter().map(|r| sq_dist(r, points.row(chosen[0]))).collect();
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // every point coincides with a chosen center: any unused index will do
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(next);
        for (i, r) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, points.row(next)));
        }
    }
    points.select(Axis(0), &chosen)
}

/// Ties go to the lowest cluster index.
fn nearest(row: ArrayView1<f64>, centers: &Array2<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, c) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// Gives every empty cluster the point farthest from its current center,
/// taken from a cluster that keeps at least one member.
fn repair_empty(points: &Array2<f64>, centers: &Array2<f64>, assignments: &mut [usize], m: usize) -> bool {
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; m];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let mut donor = None;
        let mut worst = -1.0;
        for (i, row) in points.rows().into_iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(row, centers.row(a));
            if d > worst {
                worst = d;
                donor = Some(i);
            }
        }
        match donor {
            Some(i) => {
                assignments[i] = empty;
                repaired = true;
            }
            None => return repaired,
        }
    }
}

fn cluster_means(points: &Array2<f64>, assignments: &[usize], m: usize, dim: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((m, dim));
    let mut counts = vec![0usize; m];
    for (row, &a) in points.rows().into_iter().zip(assignments) {
        let mut s = sums.row_mut(a);
        s += &row;
        counts[a] += 1;
    }
    for (j, mut s) in sums.rows_mut().into_iter().enumerate() {
        if counts[j] > 0 {
            s /= counts[j] as f64;
        }
    }
    sums
}

fn objective(points: &Array2<f64>, centers: &Array2<f64>, assignments: &[usize]) -> f64 {
    points.rows().into_iter().zip(assignments).map(|(r, &a)| sq_dist(r, centers.row(a))).sum()
}

/// One-hot `m × n` code matrix: column `i` indicates the cluster of point `i`.
pub fn init_q(c: &Clustering) -> Array2<f64> {
    let mut q = Array2::zeros((c.n_clusters(), c.assignments.len()));
    for (i, &a) in c.assignments.iter().enumerate() {
        q[[a, i]] = 1.0;
    }
    q
}

/// The `L × m` center matrix.
pub fn init_a(c: &Clustering) -> Array2<f64> {
    c.centers.clone()
}
