//! Unnormalized spectral clustering of transmitter positions.
//!
//! Gaussian affinity on pairwise distances, graph Laplacian `L = D - A`,
//! embedding on the eigenvectors of the smallest eigenvalues, then seeded
//! k-means (k-means++ seeding, best of several restarts) in that embedding.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GroupAssignment;
use crate::mobility::Point;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub groups: usize,
    pub kernel_width: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Side of the square region, used by the grid fallback.
    pub region_side: f64,
}

/// Partition `positions` into `params.groups` geographic groups.
///
/// Falls back to [`grid_partition`] (and sets `fallback`) when the
/// eigensolver does not converge.
pub fn cluster(positions: &[Point], params: &ClusterParams, seed: u64, exec: Execution) -> GroupAssignment {
    let n = positions.len();
    let k = params.groups;
    if k <= 1 {
        return GroupAssignment::from_labels(vec![0; n], k.max(1));
    }
    if n <= k {
        return GroupAssignment::from_labels((0..n).collect(), k);
    }
    match spectral_embedding(positions, k, params.kernel_width) {
        Some(embedding) => {
            let labels = kmeans(&embedding, k, params.restarts, params.max_iterations, seed, exec);
            GroupAssignment::from_labels(labels, k)
        }
        None => {
            let mut fallback = grid_partition(positions, k, params.region_side);
            fallback.fallback = true;
            fallback
        }
    }
}

const LANES: usize = 8;

/// A row chunk; rows are zero-padded to whole blocks.
type Block = [f32; LANES];

/// Points stored row-major, `blocks` blocks per row.
struct Embedding {
    data: Vec<Block>,
    blocks: usize,
}

impl Embedding {
    fn len(&self) -> usize {
        self.data.len() / self.blocks
    }

    fn row(&self, i: usize) -> &[Block] {
        &self.data[i * self.blocks..(i + 1) * self.blocks]
    }
}

/// The `k` eigenvectors of smallest eigenvalue as an `n x k` embedding, or
/// `None` if the eigensolver fails.
fn spectral_embedding(positions: &[Point], k: usize, kernel_width: f64) -> Option<Embedding> {
    let n = positions.len();
    let scale = 2.0 * kernel_width * kernel_width;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (dx, dy) = (positions[i].0 - positions[j].0, positions[i].1 - positions[j].1);
            let a = (-(dx * dx + dy * dy) / scale).exp();
            lap[(i, j)] = -a;
            lap[(j, i)] = -a;
            lap[(i, i)] += a;
            lap[(j, j)] += a;
        }
    }
    let eig = SymmetricEigen::try_new(lap, 1e-14, 10_000)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let blocks = k.div_ceil(LANES);
    let mut data = vec![[0.0; LANES]; n * blocks];
    for (c, &col) in order[..k].iter().enumerate() {
        for row in 0..n {
            data[row * blocks + c / LANES][c % LANES] = eig.eigenvectors[(row, col)] as f32;
        }
    }
    Some(Embedding { data, blocks })
}

#[inline]
fn sq_dist(a: &[Block], b: &[Block]) -> f32 {
    let mut acc = [0.0f32; LANES];
    for (x, y) in a.iter().zip(b) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    acc.iter().sum()
}

struct KMeansRun {
    labels: Vec<usize>,
    inertia: f32,
}

fn kmeans(points: &Embedding, k: usize, restarts: usize, max_iterations: usize, seed: u64, exec: Execution) -> Vec<usize> {
    let pairwise = PairwiseDistances::new(points);
    let runs = par::map_range(exec, restarts, |restart| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        kmeans_once(points, &pairwise, k, max_iterations, &mut rng)
    });
    // first minimum wins, so the choice does not depend on scheduling
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart");
    best.labels
}

/// Point-to-point squared distances, shared by every restart. Seeding and
/// the first assignment only ever measure against data points.
struct PairwiseDistances {
    n: usize,
    data: Vec<f32>,
}

impl PairwiseDistances {
    fn new(points: &Embedding) -> Self {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = sq_dist(points.row(i), points.row(j));
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        PairwiseDistances { n, data }
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// k-means++ seeding; returns the indices of the chosen points.
fn kmeans_plus_plus<R: Rng>(pairwise: &PairwiseDistances, k: usize, rng: &mut R) -> Vec<usize> {
    let n = pairwise.n;
    let mut seeds = Vec::with_capacity(k);
    seeds.push(rng.random_range(0..n));
    let mut nearest = pairwise.row(seeds[0]).to_vec();
    for _ in 1..k {
        let total: f32 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f32>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        for (d, &e) in nearest.iter_mut().zip(pairwise.row(pick)) {
            *d = d.min(e);
        }
        seeds.push(pick);
    }
    seeds
}

/// Lloyd iterations with Hamerly bounds: a point whose distance to its own
/// centre stays below a lower bound on every other centre keeps its label
/// without being measured. Bounds only skip work, so labels match plain Lloyd.
fn kmeans_once<R: Rng>(
    points: &Embedding,
    pairwise: &PairwiseDistances,
    k: usize,
    max_iterations: usize,
    rng: &mut R,
) -> KMeansRun {
    let (n, blocks) = (points.len(), points.blocks);
    let seeds = kmeans_plus_plus(pairwise, k, rng);
    let mut centers: Vec<Block> = Vec::with_capacity(k * blocks);
    for &s in &seeds {
        centers.extend_from_slice(points.row(s));
    }
    let mut previous = centers.clone();
    let mut labels = vec![usize::MAX; n];
    let mut upper = vec![f32::INFINITY; n];
    let mut lower = vec![0.0f32; n];
    let mut counts = vec![0usize; k];
    let mut shift = vec![0.0f32; k];
    for iteration in 0..max_iterations {
        let mut changed = false;
        for i in 0..n {
            if upper[i] < lower[i] {
                continue;
            }
            let (best, nearest, second) = if iteration == 0 {
                nearest_seed(i, &seeds, pairwise)
            } else {
                nearest_center(points.row(i), &centers, blocks)
            };
            upper[i] = nearest.sqrt() * (1.0 + BOUND_SLACK);
            lower[i] = second.sqrt() * (1.0 - BOUND_SLACK);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if repair_empty(points, &mut labels, &centers, k) {
            upper.fill(f32::INFINITY);
        }
        previous.copy_from_slice(&centers);
        centers.fill([0.0; LANES]);
        counts.fill(0);
        for (row, &l) in points.data.chunks_exact(blocks).zip(&labels) {
            counts[l] += 1;
            for (c, x) in centers[l * blocks..(l + 1) * blocks].iter_mut().zip(row) {
                for lane in 0..LANES {
                    c[lane] += x[lane];
                }
            }
        }
        for (c, &m) in centers.chunks_exact_mut(blocks).zip(&counts) {
            let inv = 1.0 / m as f32;
            c.iter_mut().flatten().for_each(|x| *x *= inv);
        }
        if !changed {
            break;
        }
        for (c, s) in shift.iter_mut().enumerate() {
            let range = c * blocks..(c + 1) * blocks;
            *s = sq_dist(&previous[range.clone()], &centers[range]).sqrt() * (1.0 + BOUND_SLACK);
        }
        let largest = shift.iter().copied().fold(0.0, f32::max);
        for i in 0..n {
            upper[i] += shift[labels[i]];
            lower[i] -= largest;
        }
    }
    let inertia = points
        .data
        .chunks_exact(blocks)
        .zip(&labels)
        .map(|(row, &l)| sq_dist(row, &centers[l * blocks..(l + 1) * blocks]))
        .sum();
    KMeansRun { labels, inertia }
}

/// Relative widening of every bound, covering f32 rounding in the distances.
const BOUND_SLACK: f32 = 1e-4;

/// Closest seed to point `i` with the squared distances to it and to the
/// runner-up.
fn nearest_seed(i: usize, seeds: &[usize], pairwise: &PairwiseDistances) -> (usize, f32, f32) {
    let row = pairwise.row(i);
    let (mut best, mut best_d, mut second) = (0, f32::INFINITY, f32::INFINITY);
    for (c, &s) in seeds.iter().enumerate() {
        let d = row[s];
        if d < best_d {
            second = best_d;
            best_d = d;
            best = c;
        } else if d < second {
            second = d;
        }
    }
    (best, best_d, second)
}

fn nearest_center(p: &[Block], centers: &[Block], blocks: usize) -> (usize, f32, f32) {
    let (mut best, mut best_d, mut second) = (0, f32::INFINITY, f32::INFINITY);
    for (c, centre) in centers.chunks_exact(blocks).enumerate() {
        let d = sq_dist(p, centre);
        if d < best_d {
            second = best_d;
            best_d = d;
            best = c;
        } else if d < second {
            second = d;
        }
    }
    (best, best_d, second)
}

/// Give every empty cluster the point of the largest cluster farthest from
/// that cluster's centre. Returns whether any label moved.
fn repair_empty(points: &Embedding, labels: &mut [usize], centers: &[Block], k: usize) -> bool {
    let blocks = points.blocks;
    let mut moved = false;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return moved;
        };
        let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        if counts[largest] < 2 {
            return moved;
        }
        let centre = &centers[largest * blocks..(largest + 1) * blocks];
        let far = (0..labels.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                sq_dist(points.row(a), centre)
                    .total_cmp(&sq_dist(points.row(b), centre))
                    .then(b.cmp(&a))
            })
            .unwrap();
        labels[far] = empty;
        moved = true;
    }
}

/// Split the region into a near-square grid of `groups` cells and group
/// positions by cell.
pub fn grid_partition(positions: &[Point], groups: usize, region_side: f64) -> GroupAssignment {
    let groups = groups.max(1);
    let cols = (groups as f64).sqrt().ceil() as usize;
    let rows = groups.div_ceil(cols);
    let cell = |v: f64, n: usize| (((v / region_side) * n as f64).floor().max(0.0) as usize).min(n - 1);
    let labels = positions
        .iter()
        .map(|&(x, y)| (cell(y, rows) * cols + cell(x, cols)).min(groups - 1))
        .collect();
    GroupAssignment::from_labels(labels, groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{RngPlan, Stream};
    use std::collections::HashMap;

    fn params(groups: usize, n: usize) -> ClusterParams {
        ClusterParams {
            groups,
            kernel_width: 250.0 / (n as f64).sqrt(),
            restarts: 20,
            max_iterations: 100,
            region_side: 250.0,
        }
    }

    /// Same partition up to relabeling.
    pub(crate) fn same_partition(a: &[usize], b: &[usize]) -> bool {
        let mut fwd = HashMap::new();
        let mut back = HashMap::new();
        a.iter().zip(b).all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
    }

    #[test]
    fn two_distant_points_split() {
        let g = cluster(&[(0.0, 0.0), (250.0, 250.0)], &params(2, 2), 1, Execution::Sequential);
        assert_ne!(g.group_of[0], g.group_of[1]);
        g.assert_partition();
    }

    #[test]
    fn single_group_takes_everyone() {
        let pts: Vec<Point> = (0..10).map(|i| (i as f64 * 20.0, 3.0)).collect();
        let g = cluster(&pts, &params(1, 10), 1, Execution::Sequential);
        assert!(g.group_of.iter().all(|&l| l == 0));
        assert_eq!(g.members[0].len(), 10);
    }

    #[test]
    fn more_groups_than_pairs_leaves_empty_groups() {
        let g = cluster(&[(1.0, 1.0), (2.0, 2.0)], &params(4, 2), 1, Execution::Sequential);
        g.assert_partition();
        assert_eq!(g.members.iter().filter(|m| m.is_empty()).count(), 2);
    }

    #[test]
    fn recovers_tight_clusters() {
        let mut rng = RngPlan::new(5).substream(Stream::Clustering, 0);
        let centres: Vec<Point> = (0..15)
            .map(|i| (20.0 + 50.0 * (i % 5) as f64, 40.0 + 80.0 * (i / 5) as f64))
            .collect();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, &(cx, cy)) in centres.iter().enumerate() {
            for _ in 0..2 {
                pts.push((cx + rng.random::<f64>() - 0.5, cy + rng.random::<f64>() - 0.5));
                truth.push(c);
            }
        }
        // the kernel must be narrow next to the cluster spacing, otherwise
        // splitting a twin costs less than separating neighbouring clusters
        let narrow = ClusterParams {
            kernel_width: 10.0,
            ..params(15, 30)
        };
        let g = cluster(&pts, &narrow, 77, Execution::Sequential);
        assert!(same_partition(&g.group_of, &truth));
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let mut rng = RngPlan::new(6).substream(Stream::Clustering, 0);
        let pts: Vec<Point> = (0..40).map(|_| (rng.random::<f64>() * 250.0, rng.random::<f64>() * 250.0)).collect();
        let a = cluster(&pts, &params(15, 40), 9, Execution::Parallel);
        let b = cluster(&pts, &params(15, 40), 9, Execution::Sequential);
        assert_eq!(a, b);
        a.assert_partition();
        assert!(a.members.iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn grid_fallback_is_a_partition() {
        let pts: Vec<Point> = (0..30).map(|i| ((i * 37 % 250) as f64, (i * 91 % 250) as f64)).collect();
        let g = grid_partition(&pts, 15, 250.0);
        g.assert_partition();
        assert_eq!(g.members.len(), 15);
    }
}
