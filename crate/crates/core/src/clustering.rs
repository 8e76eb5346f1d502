//! Lloyd's k-means (vector and scalar) and spherical k-means.
//!
//! All variants seed with k-means++, break nearest-centroid ties towards the
//! lowest centroid index and accumulate objectives sequentially in point
//! order, so the result is a pure function of the inputs and the seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, Matrix};
use crate::par;
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once the relative objective improvement drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iters: 25,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl KMeansParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k × dim` centroids, row-major.
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Sum of squared distances of points to their assigned centroid.
    pub objective: f64,
    pub iterations_run: usize,
    /// Objective after the seeding assignment and after every iteration.
    pub history: Vec<f64>,
    /// Centroids that had to be duplicated from already-chosen points
    /// because the data has fewer than `k` distinct points.
    pub duplicated_centroids: usize,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }
}

/// Index of the nearest row of `centroids` and its squared distance.
#[inline]
pub fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    let pairs = par::map_chunks(points.as_slice(), points.cols(), |x| nearest(centroids, x));
    pairs.into_iter().unzip()
}

fn validate(points: &Matrix, k: usize, max_iters: usize) -> Result<()> {
    if points.rows() == 0 {
        return Err(Error::Domain("k-means on an empty point set".into()));
    }
    if k == 0 {
        return Err(Error::Config("k-means needs K >= 1".into()));
    }
    if max_iters == 0 {
        return Err(Error::Config("k-means needs max_iters >= 1".into()));
    }
    Ok(())
}

/// k-means++ seeding. Once every remaining point coincides with a chosen
/// centroid, further centroids are copies of uniformly drawn points.
fn plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> (Matrix, usize) {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = par::map_chunks(points.as_slice(), points.cols(), |x| {
        sq_dist(x, centroids.row(0))
    });
    let mut duplicated = 0;
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    if target < w {
                        chosen = Some(i);
                        break;
                    }
                    target -= w;
                }
            }
            // Rounding can exhaust the walk; fall back to the last candidate.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            duplicated += 1;
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        let cref = centroids.row(c).to_vec();
        let upd: Vec<f64> = par::map_chunks(points.as_slice(), points.cols(), |x| sq_dist(x, &cref));
        for (a, b) in d2.iter_mut().zip(upd) {
            if b < *a {
                *a = b;
            }
        }
    }
    (centroids, duplicated)
}

/// Means of the assigned points; empty clusters are re-seeded from the
/// points farthest from their centroid (distinct points, farthest first).
fn update_means(points: &Matrix, assignments: &[usize], dists: &[f64], centroids: &mut Matrix) {
    let (k, dim) = (centroids.rows(), centroids.cols());
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, &x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let mut far: Vec<usize> = (0..points.rows()).collect();
    far.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut donors = far.into_iter().filter(|&i| dists[i] > 0.0);
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        } else if let Some(p) = donors.next() {
            centroids.row_mut(c).copy_from_slice(points.row(p));
        }
        // No donor: every point sits on a centroid already; keep the old one.
    }
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn lloyd_kmeans(points: &Matrix, k: usize, params: &KMeansParams) -> Result<KMeansResult> {
    validate(points, k, params.max_iters)?;
    let mut rng = rng_from(params.seed);
    let (centroids, duplicated) = plus_plus(points, k, &mut rng);
    let mut res = lloyd_from(points, centroids, params)?;
    res.duplicated_centroids = duplicated;
    Ok(res)
}

/// Lloyd iterations starting from the given centroids.
pub fn lloyd_from(points: &Matrix, mut centroids: Matrix, params: &KMeansParams) -> Result<KMeansResult> {
    validate(points, centroids.rows(), params.max_iters)?;
    if centroids.cols() != points.cols() {
        return Err(Error::DimensionMismatch {
            expected: points.cols(),
            actual: centroids.cols(),
        });
    }
    let (mut assignments, mut dists) = assign(points, &centroids);
    let mut objective: f64 = dists.iter().sum();
    let mut history = vec![objective];
    let mut iterations_run = 0;
    for it in 1..=params.max_iters {
        update_means(points, &assignments, &dists, &mut centroids);
        let (a, d) = assign(points, &centroids);
        let next: f64 = d.iter().sum();
        assignments = a;
        dists = d;
        history.push(next);
        iterations_run = it;
        let improved = objective - next;
        objective = next;
        if objective == 0.0 || improved <= params.tol * (objective + improved) {
            break;
        }
    }
    Ok(KMeansResult {
        centroids,
        assignments,
        objective,
        iterations_run,
        history,
        duplicated_centroids: 0,
    })
}

/// Restarts tried by [`scalar_kmeans`] besides the quantile start.
pub const SCALAR_RESTARTS: u64 = 8;

/// k-means over scalars; identical contract to [`lloyd_kmeans`] with d = 1.
///
/// Lloyd stalls easily in 1-D, so it runs from evenly spaced quantiles and
/// from [`SCALAR_RESTARTS`] k-means++ seedings; the lowest objective wins.
pub fn scalar_kmeans(values: &[f64], k: usize, params: &KMeansParams) -> Result<KMeansResult> {
    let points = Matrix::from_vec(values.len(), 1, values.to_vec())?;
    validate(&points, k, params.max_iters)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let quantiles = (0..k).map(|j| sorted[((2 * j + 1) * n / (2 * k)).min(n - 1)]).collect();
    let mut best = lloyd_from(&points, Matrix::from_vec(k, 1, quantiles)?, params)?;
    for r in 0..SCALAR_RESTARTS {
        let seed = derive_seed(params.seed, &format!("scalar restart {r}"));
        let run = lloyd_kmeans(&points, k, &params.with_seed(seed))?;
        if run.objective < best.objective {
            best = run;
        }
    }
    Ok(best)
}

fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

/// Index of the most similar unit centroid and the cosine similarity.
#[inline]
fn most_similar(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for c in 0..centroids.rows() {
        let s = dot(x, centroids.row(c));
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// Spherical k-means: unit-norm centroids, assignment by cosine similarity.
///
/// The reported objective is `Σ ‖x − c‖² = Σ (2 − 2·cos)` for unit `x`, so it
/// is comparable with [`lloyd_kmeans`] and non-increasing per iteration.
pub fn spherical_kmeans(points: &Matrix, k: usize, params: &KMeansParams) -> Result<KMeansResult> {
    validate(points, k, params.max_iters)?;
    for i in 0..points.rows() {
        let n = dot(points.row(i), points.row(i)).sqrt();
        if (n - 1.0).abs() > 1e-5 {
            return Err(Error::Domain(format!("row {i} has norm {n}, expected unit vectors")));
        }
    }
    let mut rng = rng_from(params.seed);
    let (mut centroids, duplicated) = plus_plus(points, k, &mut rng);
    for c in 0..k {
        normalize(centroids.row_mut(c));
    }
    let run_assign = |centroids: &Matrix| -> (Vec<usize>, Vec<f64>) {
        let pairs = par::map_chunks(points.as_slice(), points.cols(), |x| most_similar(centroids, x));
        pairs.into_iter().unzip()
    };
    let objective_of = |sims: &[f64]| sims.iter().map(|s| 2.0 - 2.0 * s).sum::<f64>();

    let (mut assignments, mut sims) = run_assign(&centroids);
    let mut objective = objective_of(&sims);
    let mut history = vec![objective];
    let mut iterations_run = 0;
    for it in 1..=params.max_iters {
        let dim = points.cols();
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut worst: Vec<usize> = (0..points.rows()).collect();
        worst.sort_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)));
        let mut donors = worst.into_iter().filter(|&i| sims[i] < 1.0);
        for (c, &count) in counts.iter().enumerate() {
            let mut v = sums.row(c).to_vec();
            if count > 0 && normalize(&mut v) {
                centroids.row_mut(c).copy_from_slice(&v);
            } else if let Some(p) = donors.next() {
                centroids.row_mut(c).copy_from_slice(points.row(p));
                normalize(centroids.row_mut(c));
            }
        }
        let (a, s) = run_assign(&centroids);
        let next = objective_of(&s);
        assignments = a;
        sims = s;
        history.push(next);
        iterations_run = it;
        let improved = objective - next;
        objective = next;
        if objective <= 0.0 || improved <= params.tol * (objective + improved) {
            break;
        }
    }
    Ok(KMeansResult {
        centroids,
        assignments,
        objective,
        iterations_run,
        history,
        duplicated_centroids: duplicated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        let cols = rows[0].len();
        Matrix::from_vec(rows.len(), cols, rows.concat()).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = mat(&[&[0.0, 0.0], &[2.0, 0.0], &[4.0, 3.0]]);
        let r = lloyd_kmeans(&p, 1, &KMeansParams::default()).unwrap();
        assert!((r.centroids.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((r.centroids.get(0, 1) - 1.0).abs() < 1e-12);
        // n × total variance = Σ‖x − mean‖²
        assert!((r.objective - (4.0 + 1.0 + 0.0 + 1.0 + 4.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn k_equal_n_reaches_zero() {
        let p = mat(&[&[0.0], &[1.0], &[5.0], &[9.0]]);
        let r = lloyd_kmeans(&p, 4, &KMeansParams::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.duplicated_centroids, 0);
    }

    #[test]
    fn surplus_centroids_are_flagged() {
        let p = mat(&[&[0.0], &[1.0]]);
        let r = lloyd_kmeans(&p, 5, &KMeansParams::default()).unwrap();
        assert_eq!(r.k(), 5);
        assert_eq!(r.duplicated_centroids, 3);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn two_by_two_square() {
        let p = mat(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 0.0], &[10.0, 1.0]]);
        let r = lloyd_kmeans(&p, 2, &KMeansParams::default()).unwrap();
        let mut cs: Vec<(f64, f64)> = (0..2)
            .map(|c| (r.centroids.get(c, 0), r.centroids.get(c, 1)))
            .collect();
        cs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(cs, vec![(0.0, 0.5), (10.0, 0.5)]);
        assert!((r.objective - 1.0).abs() < 1e-12);

        // Exhaustive oracle over every 2-partition of the four points.
        let mut best = f64::INFINITY;
        for mask in 1u32..15 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<usize> = (0..4).filter(|i| ((mask >> i) & 1 == 1) == side).collect();
                let mut mean = [0.0; 2];
                for &i in &members {
                    mean[0] += p.get(i, 0) / members.len() as f64;
                    mean[1] += p.get(i, 1) / members.len() as f64;
                }
                cost += members.iter().map(|&i| sq_dist(p.row(i), &mean)).sum::<f64>();
            }
            best = best.min(cost);
        }
        assert!((r.objective - best).abs() < 1e-12);
    }

    #[test]
    fn scalar_examples() {
        let r = scalar_kmeans(&[1.0, 1.0, 1.0, 5.0, 5.0, 5.0], 2, &KMeansParams::default()).unwrap();
        let mut c = vec![r.centroids.get(0, 0), r.centroids.get(1, 0)];
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![1.0, 5.0]);
        assert_eq!(r.objective, 0.0);
        let r = scalar_kmeans(&[1.0, 2.0, 6.0], 1, &KMeansParams::default()).unwrap();
        assert!((r.centroids.get(0, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_and_zero_k_are_rejected() {
        let p = Matrix::zeros(0, 2);
        assert!(lloyd_kmeans(&p, 2, &KMeansParams::default()).is_err());
        let p = mat(&[&[1.0, 2.0]]);
        assert!(lloyd_kmeans(&p, 0, &KMeansParams::default()).is_err());
    }

    #[test]
    fn spherical_two_clusters() {
        let p = mat(&[
            &[1.0, 0.0],
            &[0.995, 0.0998749],
            &[0.995, -0.0998749],
            &[0.0, 1.0],
            &[0.0998749, 0.995],
            &[-0.0998749, 0.995],
        ]);
        let r = spherical_kmeans(&p, 2, &KMeansParams::default()).unwrap();
        let mut cs: Vec<(f64, f64)> = (0..2)
            .map(|c| (r.centroids.get(c, 0), r.centroids.get(c, 1)))
            .collect();
        cs.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!((cs[0].0 - 1.0).abs() < 1e-9 && cs[0].1.abs() < 1e-9);
        assert!(cs[1].0.abs() < 1e-9 && (cs[1].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spherical_symmetric_single_cluster() {
        let a = 0.3f64;
        let p = mat(&[&[a.cos(), a.sin()], &[a.cos(), -a.sin()]]);
        let r = spherical_kmeans(&p, 1, &KMeansParams::default()).unwrap();
        assert!((r.centroids.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(r.centroids.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn spherical_rejects_non_unit_rows() {
        let p = mat(&[&[2.0, 0.0]]);
        assert!(spherical_kmeans(&p, 1, &KMeansParams::default()).is_err());
    }
}
