//! Lloyd's k-means with k-means++ seeding, and bag-of-features histograms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::squared_distance;
use crate::dataset::GroupDataset;
use crate::error::{GadError, Result};
use crate::numerics::Tensor;
use crate::rng::{self, GadRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub k: usize,
    /// `k × V` centroid matrix.
    pub centroids: Tensor,
}

impl Codebook {
    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for c in 0..self.k {
            let d = squared_distance(x, self.centroids.row(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Within-cluster sum of squares after seeding and after every iteration.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest chosen centre.
pub fn kmeans_plus_plus(points: &Tensor, k: usize, rng: &mut GadRng) -> Result<Tensor> {
    let n = points.rows();
    if k == 0 || n < k {
        return Err(GadError::TooFewPoints { needed: k.max(1), found: n });
    }
    let dim = points.cols();
    let mut centres = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centres.extend_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centres.extend_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(pick)));
        }
    }
    Tensor::new(k, dim, centres)
}

/// Lloyd iterations from k-means++ seeds. Stops when assignments stop
/// changing or after `max_iter` iterations. An empty cluster is moved to the
/// point currently farthest from its centroid.
pub fn kmeans(points: &Tensor, k: usize, max_iter: usize, seed: u64) -> Result<KMeansFit> {
    let n = points.rows();
    if k == 0 || n < k {
        return Err(GadError::TooFewPoints { needed: k.max(1), found: n });
    }
    let dim = points.cols();
    let mut rng = rng::seeded(seed, rng::stream::KMEANS);
    let mut codebook = Codebook {
        k,
        centroids: kmeans_plus_plus(points, k, &mut rng)?,
    };
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut sse_history = Vec::new();

    let assign_all = |codebook: &Codebook, assign: &mut [usize], dist: &mut [f64]| -> bool {
        let mut changed = false;
        for i in 0..n {
            let (c, d) = codebook.nearest(points.row(i));
            if assign[i] != c {
                changed = true;
                assign[i] = c;
            }
            dist[i] = d;
        }
        changed
    };
    assign_all(&codebook, &mut assign, &mut dist);
    sse_history.push(dist.iter().sum());

    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assign[i];
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    codebook.centroids.set(c, j, sums[c * dim + j] / counts[c] as f64);
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap_or(0);
                for j in 0..dim {
                    codebook.centroids.set(c, j, points.get(far, j));
                }
                dist[far] = 0.0;
            }
        }
        let changed = assign_all(&codebook, &mut assign, &mut dist);
        sse_history.push(dist.iter().sum());
        if !changed {
            break;
        }
    }
    Ok(KMeansFit {
        codebook,
        sse_history,
        iterations,
    })
}

/// Normalised nearest-centroid histogram of every group, one row per group.
pub fn bag_of_features(ds: &GroupDataset, codebook: &Codebook) -> Result<Tensor> {
    if ds.dim() != codebook.dim() {
        return Err(GadError::DimensionMismatch {
            expected: codebook.dim(),
            found: ds.dim(),
        });
    }
    let k = codebook.k;
    let mut out = Tensor::zeros(ds.len(), k);
    for (m, g) in ds.groups().iter().enumerate() {
        let mut counts = vec![0usize; k];
        for row in g.rows() {
            counts[codebook.nearest(row).0] += 1;
        }
        let n = g.n_points() as f64;
        for (c, &cnt) in counts.iter().enumerate() {
            out.set(m, c, cnt as f64 / n);
        }
    }
    Ok(out)
}

/// Up to `max_points` observations pooled across groups (seeded subsample).
pub fn pooled_points(ds: &GroupDataset, max_points: usize, seed: u64) -> Result<Tensor> {
    let total = ds.total_points();
    let dim = ds.dim();
    let mut data = Vec::with_capacity(total.min(max_points) * dim);
    if total <= max_points {
        for p in ds.points() {
            data.extend_from_slice(p);
        }
    } else {
        let idx = super::kernel::subsample_indices(&mut rng::seeded(seed, rng::stream::KMEANS + 100), total, max_points);
        let mut it = idx.into_iter().peekable();
        for (i, p) in ds.points().enumerate() {
            if it.peek() == Some(&i) {
                data.extend_from_slice(p);
                it.next();
            }
        }
    }
    let rows = data.len() / dim;
    Tensor::new(rows, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;
    use crate::rng::BoxMuller;

    #[test]
    fn k_equals_n_gives_zero_sse() {
        let pts = Tensor::from_rows(&[&[0.0, 0.0], &[1.0, 2.0], &[-3.0, 1.0], &[5.0, 5.0]]).unwrap();
        let fit = kmeans(&pts, 4, 20, 1).unwrap();
        assert_eq!(*fit.sse_history.last().unwrap(), 0.0);
    }

    #[test]
    fn too_few_points() {
        let pts = Tensor::zeros(2, 2);
        assert!(matches!(kmeans(&pts, 3, 10, 0), Err(GadError::TooFewPoints { .. })));
    }

    fn blobs(seed: u64) -> (Tensor, [[f64; 2]; 2]) {
        let mut rng = rng::seeded(seed, 0);
        let mut bm = BoxMuller::new();
        let means = [[-3.0, 1.0], [4.0, -2.0]];
        let mut data = Vec::new();
        for m in &means {
            for _ in 0..500 {
                data.push(m[0] + 0.3 * bm.sample(&mut rng));
                data.push(m[1] + 0.3 * bm.sample(&mut rng));
            }
        }
        (Tensor::new(1000, 2, data).unwrap(), means)
    }

    #[test]
    fn recovers_separated_blobs() {
        let (pts, means) = blobs(5);
        let fit = kmeans(&pts, 2, 100, 9).unwrap();
        for m in &means {
            let (_, d) = fit.codebook.nearest(m);
            assert!(d.sqrt() < 0.1, "centroid off by {}", d.sqrt());
        }
    }

    #[test]
    fn sse_never_increases() {
        for seed in 0..20 {
            let (pts, _) = blobs(100 + seed);
            let fit = kmeans(&pts, 5, 50, seed).unwrap();
            for w in fit.sse_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{:?}", fit.sse_history);
            }
        }
    }

    #[test]
    fn histogram_examples() {
        let codebook = Codebook {
            k: 3,
            centroids: Tensor::from_rows(&[&[0.0, 0.0], &[10.0, 10.0], &[-10.0, 5.0]]).unwrap(),
        };
        let g = Group::from_rows(&[vec![0.1, 0.0], vec![-0.2, 0.3], vec![0.0, 0.5]]).unwrap();
        let h = Group::from_rows(&[vec![9.0, 9.0], vec![0.0, 0.5], vec![-9.0, 5.0], vec![0.1, 0.0]]).unwrap();
        let h_rev = Group::from_rows(&[vec![0.1, 0.0], vec![-9.0, 5.0], vec![0.0, 0.5], vec![9.0, 9.0]]).unwrap();
        let ds = GroupDataset::new(vec![g, h, h_rev], None).unwrap();
        let bof = bag_of_features(&ds, &codebook).unwrap();
        assert_eq!(bof.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(bof.row(1), &[0.5, 0.25, 0.25]);
        assert_eq!(bof.row(1), bof.row(2));

        let wrong = Codebook { k: 1, centroids: Tensor::zeros(1, 3) };
        assert!(bag_of_features(&ds, &wrong).is_err());
    }

    #[test]
    fn histogram_counts_match_brute_force() {
        let (pts, _) = blobs(7);
        let fit = kmeans(&pts, 6, 30, 2).unwrap();
        let group = Group::new(1000, 2, pts.data().to_vec()).unwrap();
        let ds = GroupDataset::new(vec![group], None).unwrap();
        let bof = bag_of_features(&ds, &fit.codebook).unwrap();
        let mut counts = [0usize; 6];
        for i in 0..1000 {
            let mut best = (0, f64::INFINITY);
            for c in 0..6 {
                let d: f64 = (0..2).map(|j| (pts.get(i, j) - fit.codebook.centroids.get(c, j)).powi(2)).sum();
                if d < best.1 {
                    best = (c, d);
                }
            }
            counts[best.0] += 1;
        }
        for c in 0..6 {
            assert_eq!(bof.get(0, c), counts[c] as f64 / 1000.0);
        }
        assert!((bof.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
